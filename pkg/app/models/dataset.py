# app/models/dataset.py

from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.exceptions import DatasetFormatError
from app.core.provenance import sha256_hex


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    이미지 (N, C, H, W) ∈ [0, 1] 과 정수 레이블.
    provenance 예: "cifar10-binary:data_batch_1.bin", "synthetic(seed=1,classes=3,size=16)"
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: Literal["train", "test"] = "train"
    provenance: str = "unknown"

    def __post_init__(self):
        images = np.array(self.images, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        if images.ndim != 4:
            raise DatasetFormatError(f"images must be (N, C, H, W), got shape {images.shape}")
        if len(labels) != len(images):
            raise DatasetFormatError(f"{len(images)} images but {len(labels)} labels")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DatasetFormatError(f"labels must be in [0, {self.num_classes}), got max {labels.max()}")
        images.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def fingerprint(self) -> str:
        """이미지와 레이블 내용의 해시. 같은 provenance 라도 분할이나 시드가 다르면 달라집니다."""
        return sha256_hex(self.images.tobytes() + self.labels.tobytes())[:16]

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices: np.ndarray | slice, split: str | None = None) -> "Dataset":
        return Dataset(
            images=self.images[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            split=split or self.split,
            provenance=self.provenance,
        )

    def take(self, count: int) -> "Dataset":
        return self.subset(slice(0, count))
