# app/crud/crud_artifact.py
# 산출물 파일 입출력. 모든 쓰기는 임시 파일 → replace 로 원자적으로 수행합니다.

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from app.core.config import settings
from app.core.provenance import canonical_json, sha256_hex
from app.schemas.base_schema import ArtifactModel

logger = logging.getLogger(__name__)


def write_bytes_atomic(path: str | Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_text_atomic(path: str | Path, text: str) -> Path:
    return write_bytes_atomic(path, text.encode("utf-8"))


def write_artifact(path: str | Path, artifact: ArtifactModel) -> Path:
    written = write_text_atomic(path, artifact.to_artifact_json())
    logger.info(f"✅ Artifact written: {written}")
    return written


def write_json(path: str | Path, payload: dict) -> Path:
    return write_text_atomic(path, canonical_json({"schema": settings.ARTIFACT_SCHEMA_VERSION, **payload}) + "\n")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    written = write_text_atomic(path, buffer.getvalue())
    logger.info(f"✅ CSV written: {written}")
    return written


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def dump_recovered(directory: str | Path, images: np.ndarray, stem: str = "recovered") -> tuple[Path, Path]:
    """복원 이미지: f64-LE 행 우선 바이너리 + 모양을 담은 JSON sidecar."""
    directory = Path(directory)
    images = np.ascontiguousarray(images, dtype="<f8")
    blob = write_bytes_atomic(directory / f"{stem}.bin", images.tobytes())
    sidecar = write_json(
        directory / f"{stem}.json",
        {"shape": list(images.shape), "dtype": "float64-le", "sha256": sha256_hex(images.tobytes())},
    )
    return blob, sidecar


def load_recovered(directory: str | Path, stem: str = "recovered") -> np.ndarray:
    directory = Path(directory)
    meta = json.loads((directory / f"{stem}.json").read_text(encoding="utf-8"))
    data = np.fromfile(directory / f"{stem}.bin", dtype="<f8")
    return data.reshape(meta["shape"])


# --- 역변환 모델 캐시 (.npz) ---

def inversion_cache_path(model_hash: str, point: str, config_key: str, mode: str, data_key: str) -> Path:
    """data_key 는 학습 데이터 내용의 해시입니다. 다른 데이터로 학습한 역변환 모델은 재사용하지 않습니다."""
    key = sha256_hex(canonical_json([model_hash, point, config_key, mode, data_key]).encode("utf-8"))[:24]
    return Path(settings.CACHE_DIR) / f"inversion-{mode}-{point}-{key}.npz"


def save_params(path: str | Path, params: dict[str, np.ndarray]) -> Path:
    buffer = io.BytesIO()
    np.savez(buffer, **params)
    return write_bytes_atomic(path, buffer.getvalue())


def load_params(path: str | Path) -> dict[str, np.ndarray] | None:
    path = Path(path)
    if not path.is_file():
        return None
    try:
        with np.load(path, allow_pickle=False) as archive:
            return {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as e:
        logger.warning(f"⚠️ Ignoring unreadable cache entry {path}: {e}")
        return None

