"""
Experiment Manifest - 실행 재현 정보 (설정, 입력 해시, 시드, 산출물)
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
_CHUNK = 1 << 20


def hash_file(path: Union[str, Path]) -> str:
    """git blob 방식 sha256 ("blob <size>\\0" + 내용)"""
    path = Path(path)
    digest = hashlib.sha256(f"blob {path.stat().st_size}\0".encode("ascii"))
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_path(path: Union[str, Path]) -> str:
    """파일이면 blob 해시, 디렉터리면 (상대 경로, blob 해시) 정렬 목록의 해시"""
    path = Path(path)
    if path.is_file():
        return hash_file(path)
    if not path.is_dir():
        raise FileNotFoundError(f"input not found: {path}")
    digest = hashlib.sha256()
    for child in sorted(p for p in path.rglob("*") if p.is_file()):
        digest.update(child.relative_to(path).as_posix().encode("utf-8"))
        digest.update(b"\0")
        digest.update(hash_file(child).encode("ascii"))
    return digest.hexdigest()


def hash_inputs(paths: Iterable[Union[str, Path]]) -> Dict[str, str]:
    return {str(p): hash_path(p) for p in paths}


@dataclass
class ExperimentManifest:
    """학습 / 실험 명령의 재현 정보 (첫 학습 스텝 전에 기록)"""
    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = field(default_factory=dict)
    seeds: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    def add_artifact(self, name: str, path: Union[str, Path]) -> None:
        self.artifacts[name] = str(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentManifest":
        return cls(
            command=data.get("command", ""),
            config=data.get("config", {}),
            inputs=data.get("inputs", {}),
            seeds=data.get("seeds", {}),
            artifacts=data.get("artifacts", {}),
            extra=data.get("extra", {}),
        )

    def save(self, directory: Union[str, Path], filename: str = MANIFEST_FILE) -> Path:
        path = Path(directory) / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, ensure_ascii=False)
        logger.info(f"manifest 저장: {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def find_manifest(start: Union[str, Path]) -> Optional[Path]:
    """start 또는 상위 디렉터리의 manifest.json"""
    start = Path(start)
    for directory in (start, start.parent):
        candidate = directory / MANIFEST_FILE
        if candidate.is_file():
            return candidate
    return None
