# app/services/metrics_service.py
# SSIM, top-1 정확도, 노이즈 주입 정확도

import logging
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.signal import correlate2d
from scipy.signal.windows import gaussian

from app.core.exceptions import EmptyInputError, ShapeMismatchError
from app.models.dataset import Dataset
from app.models.network import TrainedModel, next_point
from app.schemas.eval_point import EvalPoint
from app.schemas.metrics import SsimConfig

logger = logging.getLogger(__name__)

DEFAULT_SSIM = SsimConfig()


@lru_cache(maxsize=32)
def ssim_window(size: int, sigma: float, height: int, width: int) -> np.ndarray:
    """합이 1 인 2-D 창. 이미지가 창보다 작으면 min(H, W) 크기의 균등 창."""
    if height < size or width < size:
        side = min(height, width)
        window = np.ones((side, side))
    else:
        line = gaussian(size, sigma)
        window = np.outer(line, line)
    window = window / window.sum()
    window.flags.writeable = False
    return window


def _ssim_channel(a: np.ndarray, b: np.ndarray, window: np.ndarray, cfg: SsimConfig) -> float:
    def filt(image: np.ndarray) -> np.ndarray:
        return correlate2d(image, window, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    numerator = (2 * mu_a * mu_b + cfg.c1) * (2 * cov + cfg.c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + cfg.c1) * (var_a + var_b + cfg.c2)
    return float(np.mean(numerator / denominator))


def ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig = DEFAULT_SSIM) -> float:
    """(C, H, W) 또는 (H, W) 이미지 한 쌍의 SSIM. 채널별로 구해 평균합니다."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError("ssim", a.shape, b.shape)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ShapeMismatchError("ssim (expected an image)", ("C", "H", "W"), a.shape)
    window = ssim_window(cfg.window, cfg.gaussian_sigma, a.shape[1], a.shape[2])
    value = float(np.mean([_ssim_channel(a[c], b[c], window, cfg) for c in range(a.shape[0])]))
    return float(np.clip(value, -1.0, 1.0))


def ssim_batch(recovered: np.ndarray, originals: np.ndarray, cfg: SsimConfig = DEFAULT_SSIM) -> np.ndarray:
    if len(recovered) != len(originals):
        raise ShapeMismatchError("ssim_batch", np.shape(originals), np.shape(recovered))
    return np.array([ssim(r, o, cfg) for r, o in zip(recovered, originals)], dtype=np.float64)


def top1_accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """argmax 일치 비율. 동률이면 가장 작은 클래스 번호를 고릅니다."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise EmptyInputError("accuracy of an empty batch")
    if logits.shape[0] != labels.shape[0]:
        raise ShapeMismatchError("top1_accuracy", (labels.shape[0], "classes"), logits.shape)
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def noised_accuracy(
    model: TrainedModel,
    point: EvalPoint,
    noise_lambda: float,
    dataset: Dataset,
    trials: int = 1,
    seed: int = 0,
    noise_at: Literal["output", "next"] = "output",
) -> float:
    """
    point 까지 평문 실행 → 균등 [−λ, +λ] 노이즈 → 나머지 실행, trials 회 평균 정확도.
    noise_at="next" 이면 다음 지점의 활성값에 노이즈를 넣습니다.
    """
    if len(dataset) == 0:
        raise EmptyInputError("noised accuracy on an empty dataset")
    target = point
    if noise_at == "next":
        following = next_point(model.spec, point)
        if following is None:
            logger.warning(f"⚠️ No EvalPoint after {point}; noise stays at {point}")
        else:
            target = following
    activation = model.forward_prefix(dataset.images, target, allow_input=True)
    if noise_lambda == 0:
        return top1_accuracy(model.forward_suffix(activation, target), dataset.labels)
    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(trials):
        noise = rng.uniform(-noise_lambda, noise_lambda, size=activation.shape)
        scores.append(top1_accuracy(model.forward_suffix(activation + noise, target), dataset.labels))
    return float(np.mean(scores))
