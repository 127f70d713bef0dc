"""
Sequential Encoder - 멀티모달 순차 추천 점수 모델

모달리티(id / txt / img)별 임베딩 → (선택) 콘텐츠 MoE 정제 → 위치 임베딩 →
모달리티별 pre-norm Transformer → 시간 간격 융합 → 가중 점수 융합
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..data.batching import Batch, collate
from ..domain.errors import CatalogMismatchError, DimensionError
from ..domain.models import ItemCatalog, TrainingExample
from ..numerics import (
    Tensor,
    add,
    layer_norm,
    matmul,
    mul,
    no_grad,
    reshape,
    scale,
    softmax,
    take_rows,
    transpose,
)
from .moe import MoELayer, feed_forward
from .params import (
    MODALITIES,
    EncoderConfig,
    EncoderParams,
    init_params,
    parameter_shapes,
    params_from_snapshot,
    params_to_snapshot,
    refinement_prefixes,
)
from .snapshot import PolicySnapshot

logger = logging.getLogger(__name__)


def interval_buckets(timestamps: np.ndarray, mask: np.ndarray, n_buckets: int) -> np.ndarray:
    """이전 이벤트와의 간격(초)을 log2 버킷으로 변환

    Δt < 1 (첫 위치, 패딩, 동시각) 은 버킷 0, 그 외 min(n_buckets-1, floor(log2 Δt) + 1)
    """
    deltas = np.zeros(timestamps.shape, dtype=np.float64)
    deltas[:, 1:] = timestamps[:, 1:] - timestamps[:, :-1]
    valid = mask.copy()
    valid[:, 1:] &= mask[:, :-1]
    valid[:, 0] = False
    deltas = np.where(valid, deltas, 0.0)
    buckets = np.zeros(timestamps.shape, dtype=np.int64)
    positive = deltas >= 1.0
    buckets[positive] = np.floor(np.log2(deltas[positive])).astype(np.int64) + 1
    return np.minimum(buckets, n_buckets - 1)


@dataclass
class ScoreOutput:
    """전체 아이템 로짓과 모달리티별 성분 (B × |I|)"""
    logits: Tensor
    s_id: Tensor
    s_txt: Tensor
    s_img: Tensor


@dataclass
class ScoreVector:
    """컨텍스트 1개의 점수 벡터 (길이 |I|, 패딩 id 는 포함하지 않음)"""
    logits: np.ndarray
    s_id: np.ndarray
    s_txt: np.ndarray
    s_img: np.ndarray

    def __len__(self) -> int:
        return int(self.logits.shape[0])


class SequentialEncoder:
    """멀티모달 순차 인코더 (π_θ / π_ref 공용)"""

    def __init__(self, config: EncoderConfig, catalog: ItemCatalog, params: EncoderParams):
        self.config = config
        self.catalog = catalog
        self.params = params
        dtype = config.np_dtype
        self._text = np.vstack([catalog.text_features, np.zeros((1, catalog.d_txt))]).astype(dtype)
        self._image = np.vstack([catalog.image_features, np.zeros((1, catalog.d_img))]).astype(dtype)
        self.content_moe: Dict[str, MoELayer] = {}
        prefixes = refinement_prefixes(config)
        if config.moe_variant == "sparse":
            layers = {p: MoELayer(params, p, config.n_experts, config.active_k) for p in dict.fromkeys(prefixes.values())}
            self.content_moe = {m: layers[p] for m, p in prefixes.items()}
        self._content_prefix = prefixes
        self.temporal_moe: Optional[MoELayer] = None
        if config.temporal and config.moe_variant == "sparse":
            self.temporal_moe = MoELayer(params, "temporal_moe", config.n_experts, config.active_k)

    # ============ Construction ============

    @classmethod
    def initialize(cls, config: EncoderConfig, catalog: ItemCatalog, rng: np.random.Generator) -> "SequentialEncoder":
        params = init_params(config, catalog.n_items, catalog.d_txt, catalog.d_img, rng)
        return cls(config, catalog, params)

    @classmethod
    def from_snapshot(cls, config: EncoderConfig, catalog: ItemCatalog, snapshot: PolicySnapshot) -> "SequentialEncoder":
        expected = parameter_shapes(config, catalog.n_items, catalog.d_txt, catalog.d_img)
        if "id_embedding" in snapshot and snapshot["id_embedding"].shape != expected["id_embedding"]:
            raise CatalogMismatchError(
                f"snapshot id table {snapshot['id_embedding'].shape} does not fit a catalog of {catalog.n_items} items"
            )
        return cls(config, catalog, params_from_snapshot(snapshot, config, expected))

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def to_snapshot(self) -> PolicySnapshot:
        return params_to_snapshot(self.params)

    def load_snapshot(self, snapshot: PolicySnapshot) -> None:
        """스냅샷 값을 현재 파라미터에 복사 (새 배열 대입)"""
        expected = parameter_shapes(self.config, self.catalog.n_items, self.catalog.d_txt, self.catalog.d_img)
        restored = params_from_snapshot(snapshot, self.config, expected)
        for name, tensor in restored.items():
            self.params[name].values = tensor.values
            self.params[name].zero_grad()

    def moe_layers(self) -> List[MoELayer]:
        layers = list(dict.fromkeys(self.content_moe.values()))
        if self.temporal_moe is not None:
            layers.append(self.temporal_moe)
        return layers

    # ============ Forward ============

    def _refine(self, x: Tensor, modality: Optional[str], training: bool, rng) -> Tensor:
        """콘텐츠 / 시간 정제층 (sparse MoE, dense FFN, 또는 항등)"""
        variant = self.config.moe_variant
        if variant == "none":
            return x
        if modality is None:
            moe, prefix = self.temporal_moe, "temporal_moe"
        else:
            moe, prefix = self.content_moe.get(modality), self._content_prefix[modality]
        if variant == "sparse":
            return moe.forward(x, training, rng)
        return add(x, feed_forward(x, self.params, prefix))

    def embed_sequence(self, batch: Batch, training: bool = False, rng: Optional[np.random.Generator] = None) -> Dict[str, Tensor]:
        """모달리티별 (B, L, d) 임베딩

        e_id = 테이블 조회, e_txt = v_txt W_txt, e_img = v_img W_img, 각 스트림에
        위치 임베딩을 더하고 패딩 위치는 0 으로 만든다.
        """
        ids = batch.item_ids
        n_rows = self.params["id_embedding"].shape[0]
        if ids.min() < 0 or ids.max() >= n_rows:
            raise DimensionError(f"item id out of range 0..{n_rows - 1}")
        size, length = ids.shape
        if length != self.config.max_seq_len:
            raise DimensionError(f"batch length {length} != max_seq_len {self.config.max_seq_len}")
        d = self.config.d
        dtype = self.config.np_dtype

        content = {
            "id": take_rows(self.params["id_embedding"], ids),
            "txt": matmul(Tensor(self._text[ids]), self.params["text_projection"]),
            "img": matmul(Tensor(self._image[ids]), self.params["image_projection"]),
        }
        position = self.params["position_embedding"]
        keep = Tensor(batch.mask[..., None].astype(dtype))
        embedded = {}
        for m in MODALITIES:
            stream = content[m]
            if self.config.moe_variant != "none":
                flat = self._refine(reshape(stream, (size * length, d)), m, training, rng)
                stream = reshape(flat, (size, length, d))
            embedded[m] = mul(add(stream, position), keep)
        return embedded

    def _attention(self, x: Tensor, block: str, bias: np.ndarray) -> Tensor:
        size, length, d = x.shape
        heads = self.config.n_heads
        head_dim = d // heads

        def split(t: Tensor) -> Tensor:
            return transpose(reshape(t, (size, length, heads, head_dim)), (0, 2, 1, 3))

        q = split(matmul(x, self.params[f"{block}.attn.wq"]))
        k = split(matmul(x, self.params[f"{block}.attn.wk"]))
        v = split(matmul(x, self.params[f"{block}.attn.wv"]))
        scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(head_dim))
        weights = softmax(add(scores, Tensor(bias)), axis=-1)
        context = transpose(matmul(weights, v), (0, 2, 1, 3))
        return matmul(reshape(context, (size, length, d)), self.params[f"{block}.attn.wo"])

    def attention_bias(self, mask: np.ndarray) -> np.ndarray:
        """인과 + 키 패딩 가산 마스크 (B, 1, L, L)

        모든 키가 가려지는 패딩 쿼리는 자기 자신만 본다.
        """
        length = mask.shape[1]
        causal = np.tril(np.ones((length, length), dtype=bool))
        allowed = causal[None] & (mask[:, None, :] | np.eye(length, dtype=bool)[None])
        return np.where(allowed, 0.0, -1e9).astype(self.config.np_dtype)[:, None]

    def transformer_encode(self, modality: str, x: Tensor, mask: np.ndarray) -> Tensor:
        """모달리티별 pre-norm Transformer (B, L, d) → (B, L, d)"""
        bias = self.attention_bias(mask)
        p = self.params
        for layer in range(self.config.n_layers):
            block = f"{modality}.block{layer}"
            normed = layer_norm(x, p[f"{block}.ln1.gain"], p[f"{block}.ln1.bias"])
            x = add(x, self._attention(normed, block, bias))
            normed = layer_norm(x, p[f"{block}.ln2.gain"], p[f"{block}.ln2.bias"])
            x = add(x, feed_forward(normed, p, f"{block}.ffn"))
        return layer_norm(x, p[f"{modality}.final_ln.gain"], p[f"{modality}.final_ln.bias"])

    def temporal_fuse(
        self,
        hidden: Tensor,
        batch: Batch,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """마지막 위치 상태 (B, d) 반환

        시간 모듈이 켜져 있으면 간격 버킷 임베딩을 더한 뒤 시간 MoE 로 정제한다.
        """
        size, length, d = hidden.shape
        if self.config.temporal:
            buckets = interval_buckets(batch.timestamps, batch.mask, self.config.n_buckets)
            keep = Tensor(batch.mask[..., None].astype(self.config.np_dtype))
            interval = mul(take_rows(self.params["interval_embedding"], buckets), keep)
            hidden = add(hidden, interval)
        last = take_rows(reshape(hidden, (size * length, d)), np.arange(size) * length + (length - 1))
        if self.config.temporal:
            last = self._refine(last, None, training, rng)
        return last

    def encode(self, batch: Batch, training: bool = False, rng: Optional[np.random.Generator] = None) -> Dict[str, Tensor]:
        """모달리티별 사용자 표현 (B, d)"""
        embedded = self.embed_sequence(batch, training, rng)
        return {
            m: self.temporal_fuse(self.transformer_encode(m, embedded[m], batch.mask), batch, training, rng)
            for m in MODALITIES
        }

    def item_representations(self) -> Dict[str, Tensor]:
        """후보 아이템 표현 (|I|, d), 텍스트 / 이미지는 투영 행렬 공유"""
        n = self.catalog.n_items
        return {
            "id": take_rows(self.params["id_embedding"], np.arange(n)),
            "txt": matmul(Tensor(self._text[:n]), self.params["text_projection"]),
            "img": matmul(Tensor(self._image[:n]), self.params["image_projection"]),
        }

    def score_all_items(self, reprs: Dict[str, Tensor]) -> ScoreOutput:
        """s = s_id + α_txt·s_txt + α_img·s_img (패딩 id 는 점수 벡터에 없음)"""
        items = self.item_representations()
        s = {m: matmul(reprs[m], transpose(items[m])) for m in MODALITIES}
        logits = add(
            s["id"],
            add(mul(s["txt"], self.params["alpha_txt"]), mul(s["img"], self.params["alpha_img"])),
        )
        return ScoreOutput(logits=logits, s_id=s["id"], s_txt=s["txt"], s_img=s["img"])

    def forward(self, batch: Batch, training: bool = False, rng: Optional[np.random.Generator] = None) -> ScoreOutput:
        return self.score_all_items(self.encode(batch, training, rng))

    # ============ Evaluation-mode scoring ============

    def score_batch(self, batch: Batch) -> np.ndarray:
        """평가 모드 로짓 (B, |I|), 노이즈 / 테이프 없음"""
        with no_grad():
            return self.forward(batch, training=False).logits.values

    def score_examples(self, examples: Sequence[TrainingExample], batch_size: int = 256) -> np.ndarray:
        chunks = []
        for start in range(0, len(examples), batch_size):
            batch = collate(examples[start:start + batch_size], self.config.max_seq_len, self.catalog.padding_id)
            chunks.append(self.score_batch(batch))
        if not chunks:
            return np.zeros((0, self.catalog.n_items), dtype=self.config.np_dtype)
        return np.concatenate(chunks, axis=0)

    def score_sequence(self, items: Sequence[int], timestamps: Sequence[int]) -> ScoreVector:
        """단일 컨텍스트 점수 벡터"""
        example = TrainingExample(user_id=-1, items=tuple(items), timestamps=tuple(timestamps), target=0)
        batch = collate([example], self.config.max_seq_len, self.catalog.padding_id)
        with no_grad():
            out = self.forward(batch, training=False)
        return ScoreVector(
            logits=out.logits.values[0],
            s_id=out.s_id.values[0],
            s_txt=out.s_txt.values[0],
            s_img=out.s_img.values[0],
        )
