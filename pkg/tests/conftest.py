# tests/conftest.py
# 공용 fixture: 작은 합성 데이터셋, 학습하지 않은 toy_cnn, 격리된 캐시 디렉터리

import numpy as np
import pytest

from app.core.config import settings
from app.models.network import TrainedModel
from app.models.zoo import build_spec, init_weights
from app.services.dataset_service import gen_synthetic


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """역변환 모델 캐시가 작업 디렉터리를 건드리지 않도록 합니다."""
    monkeypatch.setattr(settings, "CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setattr(settings, "C2PI_SEED", None)
    return tmp_path / "cache"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def dataset():
    # 3 클래스 × 6 장, 3×8×8
    return gen_synthetic(seed=7, classes=3, size=8, n_per_class=6)


@pytest.fixture
def toy_spec():
    return build_spec("toy_cnn", (3, 8, 8), 3)


@pytest.fixture
def toy_model(toy_spec):
    return TrainedModel(toy_spec, init_weights(toy_spec, 0))
