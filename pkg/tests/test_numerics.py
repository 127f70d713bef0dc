"""
Numerics Module Tests - 텐서 / 테이프 / 그래디언트 검증 테스트
"""
import numpy as np
import pytest

from src.domain.errors import DimensionError, GradientContractError
from src.numerics import (
    Tape,
    Tensor,
    add,
    check_gradients,
    gelu,
    layer_norm,
    log_sigmoid,
    log_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    pick,
    record_op,
    reshape,
    scale,
    scatter_rows,
    softmax,
    softplus,
    sub,
    take_rows,
    transpose,
)
from src.numerics import sum as tsum


SEEDS = range(20)


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """스칼라 손실을 만들기 위한 고정 가중합"""
    return tsum(mul(out, Tensor(weights)))


# ============ Forward Tests ============

class TestMatmul:
    def test_identity(self):
        """단위행렬 곱"""
        out = matmul(Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([[3.0, 4.0], [5.0, 6.0]]))
        np.testing.assert_array_equal(out.values, [[3.0, 4.0], [5.0, 6.0]])

    def test_row_times_column(self):
        """1·3 + 2·4 = 11"""
        out = matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.values, [[11.0]])

    def test_shape_mismatch_names_both_shapes(self):
        """내부 차원 불일치 시 두 shape 모두 메시지에 포함"""
        with pytest.raises(DimensionError) as exc:
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
        assert "(2, 3)" in str(exc.value)
        assert "(4, 5)" in str(exc.value)

    def test_batched_matmul_gradients(self):
        """배치 × 2차원 행렬곱 그래디언트"""
        rng = np.random.default_rng(3)
        a = Tensor(rng.standard_normal((2, 4, 5)), requires_grad=True, name="a")
        b = Tensor(rng.standard_normal((5, 3)), requires_grad=True, name="b")
        w = rng.standard_normal((2, 4, 3))
        report = check_gradients(lambda: _weighted_sum(matmul(a, b), w), [a, b])
        assert report.max_error < 1e-6

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients_match_finite_differences(self, seed):
        """random 4×5 · 5×3 그래디언트"""
        rng = np.random.default_rng(seed)
        a = Tensor(rng.standard_normal((4, 5)), requires_grad=True, name="a")
        b = Tensor(rng.standard_normal((5, 3)), requires_grad=True, name="b")
        w = rng.standard_normal((4, 3))
        report = check_gradients(lambda: _weighted_sum(matmul(a, b), w), [a, b], eps=1e-5)
        assert report.max_error < 1e-6


class TestSoftmax:
    def test_uniform(self):
        out = softmax(Tensor([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.values, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_no_overflow(self):
        """큰 입력에서도 오버플로 없음"""
        out = softmax(Tensor([1000.0, 0.0, 0.0]))
        assert np.all(np.isfinite(out.values))
        assert out.values[0] == pytest.approx(1.0)
        assert out.values[1] == pytest.approx(0.0, abs=1e-300)

    def test_matches_direct_formula(self):
        x = np.array([1.0, 2.0, 3.0])
        direct = np.exp(x) / np.exp(x).sum()
        np.testing.assert_allclose(softmax(Tensor(x)).values, direct, atol=1e-12)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_sums_to_one_and_shift_invariant(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((3, 7)) * 5
        out = softmax(Tensor(x), axis=-1).values
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)
        shifted = softmax(Tensor(x + 12.5), axis=-1).values
        np.testing.assert_allclose(shifted, out, atol=1e-9)


class TestLogSigmoid:
    def test_zero(self):
        assert float(log_sigmoid(0.0)) == pytest.approx(-np.log(2.0), abs=1e-12)

    def test_large_positive_does_not_underflow(self):
        value = float(log_sigmoid(50.0))
        assert value < 0.0
        assert value == pytest.approx(-1.9287498479639178e-22, rel=1e-6)

    def test_one(self):
        assert float(log_sigmoid(1.0)) == pytest.approx(-0.313262, abs=1e-6)

    def test_monotone_and_non_positive(self):
        xs = np.linspace(-40, 40, 201)
        values = log_sigmoid(xs)
        assert np.all(values <= 0.0)
        assert np.all(np.diff(values) > 0.0)

    def test_tensor_path_matches_array_path(self):
        xs = np.array([-3.0, 0.0, 2.5])
        np.testing.assert_array_equal(log_sigmoid(Tensor(xs)).values, log_sigmoid(xs))


class TestLayerNorm:
    def test_constant_row_is_zero(self):
        x = Tensor(np.full((1, 4), 3.0))
        out = layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(out.values, np.zeros((1, 4)))

    def test_symmetric_pair(self):
        out = layer_norm(Tensor([[1.0, 3.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
        np.testing.assert_allclose(out.values, [[-1.0, 1.0]], atol=1e-9)

    def test_rejects_non_positive_eps(self):
        with pytest.raises(ValueError):
            layer_norm(Tensor([[1.0, 2.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=0.0)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        x = Tensor(rng.standard_normal((3, 8)), requires_grad=True, name="x")
        gain = Tensor(1.0 + 0.1 * rng.standard_normal(8), requires_grad=True, name="gain")
        bias = Tensor(0.1 * rng.standard_normal(8), requires_grad=True, name="bias")
        w = rng.standard_normal((3, 8))
        report = check_gradients(lambda: _weighted_sum(layer_norm(x, gain, bias), w), [x, gain, bias])
        assert report.max_error < 1e-5


# ============ Gradient Suite ============

def _unary_cases():
    return {
        "softmax": lambda x: softmax(x, axis=-1),
        "log_softmax": lambda x: log_softmax(x, axis=-1),
        "log_sigmoid": log_sigmoid,
        "softplus": softplus,
        "gelu": gelu,
        "transpose": lambda x: transpose(x),
        "reshape": lambda x: reshape(x, (-1,)),
        "scale": lambda x: scale(x, 0.37),
        "mean_rows": lambda x: mean(x, axis=0),
        "sum_cols": lambda x: tsum(x, axis=1, keepdims=True),
    }


class TestPrimitiveGradients:
    """모든 미분 가능 primitive 의 유한 차분 검증 (배정밀도)"""

    @pytest.mark.parametrize("name", sorted(_unary_cases()))
    @pytest.mark.parametrize("seed", SEEDS)
    def test_unary(self, name, seed):
        rng = np.random.default_rng(seed)
        rows, cols = int(rng.integers(1, 5)), int(rng.integers(2, 6))
        x = Tensor(rng.standard_normal((rows, cols)), requires_grad=True, name="x")
        op = _unary_cases()[name]
        w = rng.standard_normal(op(x).shape)
        report = check_gradients(lambda: _weighted_sum(op(x), w), [x], eps=1e-5, tol=1e-4)
        assert report.passed, report.get_summary()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_binary_broadcast(self, seed):
        rng = np.random.default_rng(seed)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True, name="a")
        b = Tensor(rng.standard_normal((1, 4)), requires_grad=True, name="b")
        w = rng.standard_normal((3, 4))

        def fn():
            return _weighted_sum(add(mul(a, b), sub(a, b)), w)

        report = check_gradients(fn, [a, b])
        assert report.passed, report.get_summary()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_indexing(self, seed):
        rng = np.random.default_rng(seed)
        table = Tensor(rng.standard_normal((6, 3)), requires_grad=True, name="table")
        ids = rng.integers(0, 6, size=(2, 4))
        rows = rng.integers(0, 8, size=5)
        cols = rng.integers(0, 3, size=5)

        def fn():
            looked_up = reshape(take_rows(table, ids), (8, 3))
            scattered = scatter_rows(looked_up, np.arange(8) % 4, 4)
            picked = tsum(mul(pick(looked_up, rows, cols), Tensor(np.arange(1.0, 6.0))))
            return add(picked, tsum(mul(scattered, scattered)))

        report = check_gradients(fn, [table])
        assert report.passed, report.get_summary()


# ============ Tape Tests ============

class TestTape:
    def test_leaf_grad_flushed_once_per_pass(self):
        """같은 파라미터를 여러 번 써도 누적 카운터는 1"""
        w = Tensor(np.array([1.5, -2.0]), requires_grad=True, name="w")
        with Tape() as tape:
            loss = tsum(add(mul(w, w), w))
            tape.backward(loss)
        assert w.grad_updates == 1
        np.testing.assert_allclose(w.grad, 2 * w.values + 1)

    def test_tape_cleared_after_backward(self):
        w = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            loss = tsum(mul(w, w))
            assert len(tape) > 0
            tape.backward(loss)
            assert len(tape) == 0

    def test_no_record_outside_tape(self):
        w = Tensor(np.ones(3), requires_grad=True)
        out = mul(w, w)
        assert not out.requires_grad

    def test_no_grad_blocks_recording(self):
        w = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            with no_grad():
                mul(w, w)
            assert len(tape) == 0

    def test_unused_branch_not_visited(self):
        """손실에 포함되지 않은 분기는 그래디언트를 받지 않음"""
        w = Tensor(np.ones(2), requires_grad=True, name="w")
        v = Tensor(np.ones(2), requires_grad=True, name="v")
        with Tape() as tape:
            loss = tsum(mul(w, w))
            tsum(mul(v, v))
            tape.backward(loss)
        assert v.grad is None
        assert v.grad_updates == 0

    def test_non_scalar_loss_rejected(self):
        w = Tensor(np.ones(2), requires_grad=True)
        with Tape() as tape:
            out = mul(w, w)
            with pytest.raises(DimensionError):
                tape.backward(out)


# ============ check_gradients Tests ============

class TestCheckGradients:
    def test_linear_function_exact(self):
        """wᵀx 는 정확히 일치"""
        w = Tensor(np.array([1.0, -2.0, 3.0, 4.0]), requires_grad=True, name="w")
        x = Tensor(np.array([2.0, 1.0, -1.0, 0.5]))
        report = check_gradients(lambda: tsum(mul(w, x)), [w], eps=2.0 ** -10)
        assert report.max_error <= 1e-12

    def test_corrupted_gradient_detected(self):
        """가중치 하나의 그래디언트를 10% 오염시키면 실패"""
        rng = np.random.default_rng(0)
        w = Tensor(rng.standard_normal(5), requires_grad=True, name="w")
        x = rng.standard_normal(5)

        def faulty_dot(t: Tensor) -> Tensor:
            def backward(g):
                grad = g * x
                grad[2] *= 1.1
                return (grad,)
            return record_op("faulty_dot", np.asarray(np.dot(t.values, x)), (t,), backward)

        report = check_gradients(lambda: faulty_dot(w), [w])
        assert report.max_error > report.tol
        assert not report.passed

    def test_nondeterministic_function_rejected(self):
        rng = np.random.default_rng(0)
        w = Tensor(np.ones(3), requires_grad=True)

        def noisy():
            return tsum(mul(w, Tensor(rng.standard_normal(3))))

        with pytest.raises(GradientContractError):
            check_gradients(noisy, [w])

    def test_params_restored(self):
        w = Tensor(np.array([0.5, 1.5]), requires_grad=True, name="w")
        before = w.values.copy()
        check_gradients(lambda: tsum(mul(w, w)), [w])
        np.testing.assert_array_equal(w.values, before)

    def test_max_entries_subsample(self):
        rng = np.random.default_rng(1)
        w = Tensor(rng.standard_normal((10, 10)), requires_grad=True, name="w")
        report = check_gradients(lambda: tsum(gelu(w)), [w], max_entries=7)
        assert report.passed
