"""
Policy Snapshot - 파라미터 스냅샷 및 바이너리 직렬화

바이트 레이아웃 (모두 little-endian):
    magic "RODPOSN1" | u32 version | u32 tensor_count
    tensor_count × ( u16 name_len | name (utf-8) | u8 ndim | ndim × u64 dims | prod(dims) × float32 )
"""
import hashlib
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, Mapping, Tuple, Union

import numpy as np

from ..domain.errors import ContractViolationError, DataFormatError

SNAPSHOT_MAGIC = b"RODPOSN1"
SNAPSHOT_VERSION = 1


@dataclass
class PolicySnapshot:
    """모델 파라미터 전체의 복사본 (π_sft / π_ref / π_θ)"""
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    frozen: bool = False

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "PolicySnapshot":
        return cls(OrderedDict((name, np.array(values, dtype=np.float32)) for name, values in arrays.items()))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.tensors.items())

    @property
    def n_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def checksum(self) -> str:
        """이름 / shape / float32 값 기준 sha256"""
        digest = hashlib.sha256()
        for name, values in self.tensors.items():
            digest.update(name.encode("utf-8"))
            digest.update(np.asarray(values.shape, dtype="<u8").tobytes())
            digest.update(np.ascontiguousarray(values, dtype="<f4").tobytes())
        return digest.hexdigest()

    def copy(self) -> "PolicySnapshot":
        return PolicySnapshot(OrderedDict((k, v.copy()) for k, v in self.tensors.items()), frozen=False)

    def freeze(self) -> "PolicySnapshot":
        """읽기 전용 깊은 복사본"""
        frozen = OrderedDict()
        for name, values in self.tensors.items():
            copy = np.array(values, dtype=np.float32, copy=True)
            copy.flags.writeable = False
            frozen[name] = copy
        return PolicySnapshot(frozen, frozen=True)

    def set(self, name: str, values: np.ndarray) -> None:
        if self.frozen:
            raise ContractViolationError(f"cannot modify frozen snapshot tensor {name}")
        self.tensors[name] = values

    def to_bytes(self) -> bytes:
        chunks = [SNAPSHOT_MAGIC, struct.pack("<II", SNAPSHOT_VERSION, len(self.tensors))]
        for name, values in self.tensors.items():
            encoded = name.encode("utf-8")
            chunks.append(struct.pack("<H", len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack("<B", values.ndim))
            chunks.append(struct.pack(f"<{values.ndim}Q", *values.shape))
            chunks.append(np.ascontiguousarray(values, dtype="<f4").tobytes())
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PolicySnapshot":
        if raw[:8] != SNAPSHOT_MAGIC:
            raise DataFormatError("not a policy snapshot (bad magic)")
        try:
            version, count = struct.unpack_from("<II", raw, 8)
            if version != SNAPSHOT_VERSION:
                raise DataFormatError(f"unsupported snapshot version {version}")
            offset = 16
            tensors: Dict[str, np.ndarray] = OrderedDict()
            for _ in range(count):
                (name_len,) = struct.unpack_from("<H", raw, offset)
                offset += 2
                name = raw[offset:offset + name_len].decode("utf-8")
                offset += name_len
                (ndim,) = struct.unpack_from("<B", raw, offset)
                offset += 1
                shape = struct.unpack_from(f"<{ndim}Q", raw, offset)
                offset += 8 * ndim
                size = int(np.prod(shape, dtype=np.int64))
                values = np.frombuffer(raw, dtype="<f4", count=size, offset=offset).reshape(shape)
                offset += 4 * size
                tensors[name] = values.astype(np.float32)
        except (struct.error, ValueError) as e:
            raise DataFormatError(f"truncated or corrupt snapshot: {e}")
        if offset != len(raw):
            raise DataFormatError(f"{len(raw) - offset} trailing bytes in snapshot")
        return cls(tensors)


def save_snapshot(path: Union[str, Path], snapshot: PolicySnapshot) -> None:
    Path(path).write_bytes(snapshot.to_bytes())


def load_snapshot(path: Union[str, Path]) -> PolicySnapshot:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"snapshot not found: {path}")
    return PolicySnapshot.from_bytes(path.read_bytes())
