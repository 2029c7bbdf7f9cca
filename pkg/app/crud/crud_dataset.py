# app/crud/crud_dataset.py
# CIFAR 바이너리 형식 로더

import logging
from pathlib import Path

import numpy as np

from app.core.config import settings
from app.core.exceptions import ConfigError, DatasetFormatError
from app.models.dataset import Dataset

logger = logging.getLogger(__name__)

IMAGE_BYTES = 3 * 32 * 32
CIFAR10_RECORD = 1 + IMAGE_BYTES
CIFAR100_RECORD = 2 + IMAGE_BYTES


def _read_records(path: str | Path, record_size: int) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"dataset file not found: {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % record_size:
        raise DatasetFormatError(
            f"{path.name}: {raw.size} bytes is not a multiple of the {record_size}-byte record size"
        )
    return raw.reshape(-1, record_size)


def _images(records: np.ndarray, label_bytes: int) -> np.ndarray:
    # 1024 R + 1024 G + 1024 B, 각 채널은 행 우선
    return records[:, label_bytes:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0


def load_cifar10(path: str | Path, split: str = "train") -> Dataset:
    """3073 바이트 레코드 (레이블 1 + 픽셀 3072) 의 연속."""
    records = _read_records(path, CIFAR10_RECORD)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= 10)
    if bad.size:
        raise DatasetFormatError(f"record {int(bad[0])} has label {int(labels[bad[0]])} (CIFAR-10 labels are 0..9)")
    dataset = Dataset(_images(records, 1), labels, 10, split, f"cifar10-binary:{Path(path).name}")
    logger.info(f"✅ CIFAR-10 loaded: {Path(path).name}, N={len(dataset)}")
    return dataset


def load_cifar100(path: str | Path, split: str = "train") -> Dataset:
    """3074 바이트 레코드 (coarse 레이블, fine 레이블, 픽셀). fine 레이블을 사용합니다."""
    if not settings.ALLOW_CIFAR100:
        raise ConfigError("CIFAR-100 loading is disabled (set ALLOW_CIFAR100=true to enable)")
    records = _read_records(path, CIFAR100_RECORD)
    labels = records[:, 1].astype(np.int64)
    bad = np.flatnonzero(labels >= 100)
    if bad.size:
        raise DatasetFormatError(f"record {int(bad[0])} has fine label {int(labels[bad[0]])} (expected 0..99)")
    dataset = Dataset(_images(records, 2), labels, 100, split, f"cifar100-binary:{Path(path).name}")
    logger.info(f"✅ CIFAR-100 loaded: {Path(path).name}, N={len(dataset)}")
    return dataset
