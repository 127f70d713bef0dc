"""
RNG Streams - 마스터 시드에서 파생되는 이름별 난수 스트림
"""
import copy
from typing import Any, Dict, Iterable

import numpy as np

from ..domain.errors import ConfigError

# 순서가 spawn_key 를 결정하므로 추가만 허용
STREAM_NAMES = ("init", "moe-noise", "sampler", "data-shuffle", "synth")


class RngStreams:
    """이름별 독립 np.random.Generator 묶음

    각 스트림은 SeedSequence(master_seed, spawn_key=(index,)) 로 만들어지며
    상태는 bit_generator.state 로 저장 / 복원한다.
    """

    def __init__(self, master_seed: int, names: Iterable[str] = STREAM_NAMES):
        if master_seed < 0:
            raise ConfigError(f"master seed must be non-negative, got {master_seed}")
        self.master_seed = int(master_seed)
        self.names = tuple(names)
        self._streams: Dict[str, np.random.Generator] = {
            name: np.random.Generator(np.random.PCG64(self._seed_sequence(name)))
            for name in self.names
        }

    def _seed_sequence(self, name: str, *extra: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=(self.index(name),) + tuple(extra))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"Unknown RNG stream: {name}")

    def get(self, name: str) -> np.random.Generator:
        self.index(name)
        return self._streams[name]

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.get(name)

    def epoch_seed(self, stage: int, epoch: int, name: str = "data-shuffle") -> int:
        """단계 / 에폭별 셔플 시드 (스트림 상태를 소비하지 않음)"""
        return int(self._seed_sequence(name, stage, epoch).generate_state(1)[0])

    def begin_stage(self, stage: int, names: Iterable[str] = ("moe-noise", "sampler")) -> None:
        """학습 단계 시작 시 스트림을 (index, stage) 파생 시드로 재설정"""
        for name in names:
            self._streams[name] = np.random.Generator(np.random.PCG64(self._seed_sequence(name, stage)))

    def fresh(self, name: str) -> np.random.Generator:
        """해당 스트림을 초기 상태로 새로 만든 Generator"""
        return np.random.Generator(np.random.PCG64(self._seed_sequence(name)))

    def reset(self, name: str) -> None:
        self._streams[name] = self.fresh(name)

    def get_state(self) -> Dict[str, Any]:
        return {name: copy.deepcopy(gen.bit_generator.state) for name, gen in self._streams.items()}

    def set_state(self, state: Dict[str, Any]) -> None:
        for name, value in state.items():
            self.get(name).bit_generator.state = copy.deepcopy(value)

    def describe(self) -> Dict[str, Any]:
        """매니페스트 기록용 (마스터 시드와 스트림 spawn_key)"""
        return {
            "master_seed": self.master_seed,
            "streams": {name: [self.index(name)] for name in self.names},
        }
