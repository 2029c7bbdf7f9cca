# app/services/dataset_service.py

import logging

import numpy as np

from app.core.exceptions import ConfigError
from app.crud import crud_dataset
from app.models.dataset import Dataset
from app.schemas.experiment import ExperimentConfig

logger = logging.getLogger(__name__)


def gen_synthetic(seed: int, classes: int, size: int, n_per_class: int, channels: int = 3) -> Dataset:
    """
    클래스마다 고유한 주파수 무늬와 가우시안 blob 위치를 갖는 합성 이미지.
    같은 시드면 비트 단위로 같은 데이터셋을 만듭니다.
    """
    if size < 8:
        raise ConfigError(f"synthetic image size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    v, u = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    images, labels = [], []
    for label in range(classes):
        # 클래스 서명: 공간 주파수, 위상, 채널 가중치, blob 중심
        fx, fy = rng.integers(1, 4, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        weights = rng.uniform(0.4, 1.0, size=channels)
        center = rng.uniform(0.25 * size, 0.75 * size, size=2)
        texture = np.sin(2 * np.pi * (fx * u + fy * v) / size + phase)
        for _ in range(n_per_class):
            jitter = rng.normal(0, size / 16, size=2)
            cy, cx = center + jitter
            width = rng.uniform(size / 8, size / 4)
            blob = np.exp(-((v - cy) ** 2 + (u - cx) ** 2) / (2 * width**2))
            amplitude = rng.uniform(0.2, 0.35)
            base = 0.5 + amplitude * texture[None] * weights[:, None, None]
            image = base + 0.3 * blob[None] * weights[::-1, None, None]
            image = image + rng.normal(0, 0.05, size=image.shape)
            images.append(np.clip(image, 0.0, 1.0))
            labels.append(label)
    provenance = f"synthetic(seed={seed},classes={classes},size={size})"
    return Dataset(np.stack(images), np.array(labels), classes, "train", provenance)


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    order = np.random.default_rng(seed).permutation(len(dataset))
    n_test = max(1, int(round(len(dataset) * test_fraction)))
    return dataset.subset(order[n_test:], "train"), dataset.subset(order[:n_test], "test")


class DatasetService:
    """실험 설정에 따라 학습/평가 데이터셋을 준비합니다."""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def load(self) -> tuple[Dataset, Dataset]:
        cfg = self.config
        seed = cfg.seed_for("data")
        if cfg.dataset == "synthetic":
            full = gen_synthetic(seed, cfg.synthetic_classes, cfg.synthetic_size, cfg.synthetic_per_class)
            train, test = split_dataset(full, cfg.test_fraction, seed)
        else:
            if cfg.dataset_path is None:
                raise ConfigError(f"dataset {cfg.dataset} needs dataset_path")
            loader = crud_dataset.load_cifar10 if cfg.dataset == "cifar10" else crud_dataset.load_cifar100
            if cfg.test_path is not None:
                train, test = loader(cfg.dataset_path, "train"), loader(cfg.test_path, "test")
            else:
                train, test = split_dataset(loader(cfg.dataset_path), cfg.test_fraction, seed)
        logger.info(f"✅ Dataset ready: {train.provenance}, train={len(train)}, test={len(test)}")
        return train, test
