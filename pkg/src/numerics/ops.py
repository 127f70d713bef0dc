"""
Primitive Ops - 인코더와 손실 함수가 사용하는 미분 가능 연산

각 연산의 backward 는 손으로 유도한 규칙이며 gradcheck 로 개별 검증한다.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..domain.errors import DimensionError
from .tensor import Tensor, record_op

ArrayLike = Union[Tensor, np.ndarray, float]

LAYER_NORM_EPS = 1e-5
MASK_VALUE = -1e9
_GELU_C = float(np.sqrt(2.0 / np.pi))


def as_tensor(x: ArrayLike, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def sigmoid_array(x: np.ndarray) -> np.ndarray:
    """오버플로 없는 시그모이드"""
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """브로드캐스트된 그래디언트를 원래 shape 로 합산"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ============ Elementwise ============

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.values + b.values

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record_op("add", out, (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.values - b.values

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return record_op("sub", out, (a, b), backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.values, b.values
    out = av * bv

    def backward(g):
        return _unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)

    return record_op("mul", out, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    out = a.values * factor

    def backward(g):
        return (g * factor,)

    return record_op("scale", out, (a,), backward)


# ============ Reductions / Shape ============

def sum(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    out = np.sum(a.values, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record_op("sum", np.asarray(out), (a,), backward)


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    count = a.values.size if axis is None else a.values.shape[axis]
    return scale(sum(a, axis=axis), 1.0 / count)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    out = a.values.reshape(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return record_op("reshape", out, (a,), backward)


def transpose(a: Tensor, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.values.ndim)))
    out = np.transpose(a.values, axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return record_op("transpose", out, (a,), backward)


# ============ Linear algebra ============

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """행렬곱 (선행 배치 차원 브로드캐스트 허용)"""
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.values, b.values
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} vs {b.shape}")
    out = av @ bv

    def backward(g):
        grad_a = g @ np.swapaxes(bv, -1, -2)
        grad_b = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return record_op("matmul", out, (a, b), backward)


# ============ Indexing ============

def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """table[ids] 조회 (임베딩 lookup)"""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError(f"row id out of range for table {table.shape}")
    out = table.values[ids]

    def backward(g):
        grad = np.zeros_like(table.values)
        np.add.at(grad, ids.reshape(-1), g.reshape((-1,) + table.shape[1:]))
        return (grad,)

    return record_op("take_rows", out, (table,), backward)


def scatter_rows(x: Tensor, ids: np.ndarray, n_rows: int) -> Tensor:
    """x 의 행을 n_rows 행 출력의 ids 위치에 더한다"""
    ids = np.asarray(ids, dtype=np.int64)
    out = np.zeros((n_rows,) + x.shape[1:], dtype=x.values.dtype)
    np.add.at(out, ids, x.values)

    def backward(g):
        return (g[ids],)

    return record_op("scatter_rows", out, (x,), backward)


def pick(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """2차원 텐서에서 (rows[i], cols[i]) 원소를 모은다"""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    out = x.values[rows, cols]

    def backward(g):
        grad = np.zeros_like(x.values)
        np.add.at(grad, (rows, cols), g)
        return (grad,)

    return record_op("pick", out, (x,), backward)


# ============ Nonlinearities ============

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.values - np.max(x.values, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / np.sum(exp, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return record_op("softmax", out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.values - np.max(x.values, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return record_op("log_softmax", out, (x,), backward)


def log_sigmoid(x: ArrayLike):
    """log σ(x) = −softplus(−x)

    Tensor 가 아니면 numpy 값으로 바로 계산한다.
    """
    if not isinstance(x, Tensor):
        return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))
    xv = x.values
    out = -np.logaddexp(0.0, -xv)

    def backward(g):
        return (g * sigmoid_array(-xv),)

    return record_op("log_sigmoid", out, (x,), backward)


def softplus(x: Tensor) -> Tensor:
    xv = x.values
    out = np.logaddexp(0.0, xv)

    def backward(g):
        return (g * sigmoid_array(xv),)

    return record_op("softplus", out, (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """GELU (tanh 근사)"""
    xv = x.values
    inner = _GELU_C * (xv + 0.044715 * xv ** 3)
    t = np.tanh(inner)
    out = 0.5 * xv * (1.0 + t)

    def backward(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * xv ** 2)
        local = 0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t ** 2) * d_inner
        return (g * local,)

    return record_op("gelu", out, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """마지막 축 기준 layer normalization"""
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    xv = x.values
    mu = xv.mean(axis=-1, keepdims=True)
    centered = xv - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gain.values + bias.values

    def backward(g):
        grad_gain = _unbroadcast(g * xhat, gain.shape)
        grad_bias = _unbroadcast(g, bias.shape)
        gx = g * gain.values
        grad_x = inv_std * (
            gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        )
        return grad_x, grad_gain, grad_bias

    return record_op("layer_norm", out, (x, gain, bias), backward)


def masked_fill_bias(mask: np.ndarray, dtype=np.float64) -> np.ndarray:
    """허용 위치 0, 금지 위치 MASK_VALUE 인 가산 마스크"""
    return np.where(mask, 0.0, MASK_VALUE).astype(dtype)
