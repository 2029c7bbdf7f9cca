# app/services/boundary_service.py
# crypto/clear 경계 탐색 (2단계) 과 노이즈 크기 보정

import logging
import threading
from typing import Callable, Sequence

from app.core.config import settings
from app.core.exceptions import CalibrationError, ConfigError, EmptyInputError, NoBoundaryError
from app.core.provenance import config_hash
from app.models.dataset import Dataset
from app.models.network import TrainedModel
from app.schemas.boundary import AccuracyTraceEntry, BoundaryResult, SsimTraceEntry
from app.schemas.eval_point import EvalPoint
from app.schemas.experiment import ExperimentConfig
from app.services.attack_service import AttackService
from app.services.metrics_service import noised_accuracy, top1_accuracy

logger = logging.getLogger(__name__)

IdpaFn = Callable[[EvalPoint], float]
AccuracyFn = Callable[[EvalPoint, float], float]


def _check_threshold(name: str, value: float) -> None:
    if not 0 < value <= 1:
        raise ConfigError(f"{name} must be in (0, 1], got {value}")


def search_boundary(
    points: Sequence[EvalPoint],
    idpa: IdpaFn,
    accuracy: AccuracyFn,
    sigma: float,
    delta: float,
    noise_lambda: float,
) -> BoundaryResult:
    """
    1단계: 끝에서 두 번째 지점부터 거꾸로, 평균 SSIM 이 σ 미만인 동안 한 지점씩 물러납니다.
           멈춘 지점의 다음 지점이 경계 후보입니다.
    2단계: 후보에서 노이즈 정확도가 δ 이상이 될 때까지 한 지점씩 나아갑니다.
    한 단계는 EvalPoint 하나 (반 레이어) 입니다.
    """
    if not points:
        raise EmptyInputError("boundary search needs at least one EvalPoint")
    _check_threshold("sigma", sigma)
    _check_threshold("delta", delta)
    points = list(points)
    last = len(points) - 1

    phase1: list[SsimTraceEntry] = []
    index = max(last - 1, 0)
    degenerate = False
    while True:
        avg_ssim = idpa(points[index])
        phase1.append(SsimTraceEntry(point=points[index], avg_ssim=avg_ssim))
        if avg_ssim >= sigma:
            break
        if index == 0:
            degenerate = True
            break
        index -= 1
    candidate = min(index + 1, last)
    if degenerate:
        logger.warning(
            f"⚠️ Attack fails at every evaluated point down to {points[0]}; "
            f"boundary candidate falls back to {points[candidate]}"
        )
    logger.info(f"phase 1 done: candidate boundary {points[candidate]} after {len(phase1)} attacks")

    phase2: list[AccuracyTraceEntry] = []
    index = candidate
    while True:
        n_acc = accuracy(points[index], noise_lambda)
        phase2.append(AccuracyTraceEntry(point=points[index], accuracy=n_acc))
        if n_acc >= delta:
            break
        if index == last:
            raise NoBoundaryError(
                f"no boundary satisfies accuracy threshold {delta:.4f} at λ={noise_lambda} "
                f"(last point {points[last]} reached {n_acc:.4f})"
            )
        index += 1

    boundary = points[index]
    logger.info(f"✅ Boundary found: {boundary} (σ={sigma}, δ={delta:.4f}, λ={noise_lambda})")
    return BoundaryResult(
        boundary=boundary,
        noise_lambda=noise_lambda,
        sigma=sigma,
        delta=delta,
        phase1_trace=phase1,
        phase2_trace=phase2,
        degenerate=degenerate,
    )


def select_noise(accuracy: Callable[[float], float], grid: Sequence[float], delta: float) -> float:
    """grid 에서 accuracy(λ) ≥ δ 인 가장 큰 λ."""
    if not grid:
        raise EmptyInputError("noise grid is empty")
    if list(grid) != sorted(grid) or grid[0] < 0:
        raise ConfigError(f"noise grid must be non-negative and ascending, got {list(grid)}")
    passing = []
    for noise_lambda in grid:
        value = accuracy(noise_lambda)
        logger.debug(f"λ={noise_lambda}: accuracy={value:.4f}")
        if value >= delta:
            passing.append(noise_lambda)
        elif noise_lambda == 0:
            raise CalibrationError(f"accuracy without noise ({value:.4f}) is already below δ={delta:.4f}")
    if not passing:
        raise CalibrationError(f"no noise magnitude in the grid keeps accuracy ≥ {delta:.4f}")
    return max(passing)


def calibrate_noise(
    model: TrainedModel,
    boundary: EvalPoint,
    grid: Sequence[float],
    delta: float,
    dataset: Dataset,
    trials: int = 1,
    seed: int = 0,
    noise_at: str = "output",
) -> float:
    """경계 지점에서 정확도 δ 를 유지하는 최대 노이즈 크기 λ*."""
    best = select_noise(
        lambda noise_lambda: noised_accuracy(model, boundary, noise_lambda, dataset, trials, seed, noise_at),
        grid,
        delta,
    )
    logger.info(f"✅ Calibrated noise at {boundary}: λ*={best}")
    return best


class BoundaryService:
    """
    실제 공격(IDPA)과 노이즈 정확도를 주입해 경계를 탐색합니다.
    δ 는 평문 기준 정확도 − delta_drop 입니다. 지점별 공격 결과는 한 번만 계산해 재사용합니다.
    """

    def __init__(
        self,
        model: TrainedModel,
        train: Dataset,
        test: Dataset,
        config: ExperimentConfig,
        model_hash: str = "",
        use_cache: bool = True,
    ):
        self.model = model
        self.train = train
        self.test = test
        self.config = config
        self.model_hash = model_hash
        self.use_cache = use_cache
        self._ssim: dict[tuple[EvalPoint, float], float] = {}
        self._lock = threading.Lock()
        self._baseline: float | None = None

    def baseline_accuracy(self) -> float:
        if self._baseline is None:
            self._baseline = top1_accuracy(self.model.forward_full(self.test.images), self.test.labels)
        return self._baseline

    def delta(self) -> float:
        delta = self.baseline_accuracy() - self.config.delta_drop
        if delta <= 0:
            raise ConfigError(f"baseline accuracy {self._baseline:.4f} leaves no room for δ-drop {self.config.delta_drop}")
        return delta

    def attack_service(self, noise_lambda: float) -> AttackService:
        return AttackService(
            self.model,
            self.train,
            self.test,
            self.config.attack_config(noise_lambda=noise_lambda),
            self.model_hash,
            self.use_cache,
        )

    def idpa(self, point: EvalPoint, noise_lambda: float, sigma: float) -> float:
        key = (point, noise_lambda)
        with self._lock:
            if key in self._ssim:
                return self._ssim[key]
        value = self.attack_service(noise_lambda).run(point, sigma=sigma).avg_ssim
        with self._lock:
            self._ssim[key] = value
        return value

    def accuracy(self, point: EvalPoint, noise_lambda: float) -> float:
        cfg = self.config
        return noised_accuracy(
            self.model, point, noise_lambda, self.test, cfg.accuracy_trials, cfg.seed_for("data"), cfg.noise_at
        )

    def precompute(self, points: Sequence[EvalPoint], noise_lambda: float, sigma: float) -> None:
        """1단계가 평가할 수 있는 모든 지점의 공격을 미리 병렬로 실행합니다."""
        candidates = list(points[:-1]) or list(points)
        outcomes = self.attack_service(noise_lambda).run_many(
            candidates, sigma=sigma, workers=settings.PARALLEL_WORKERS
        )
        with self._lock:
            for point, outcome in zip(candidates, outcomes):
                self._ssim[(point, noise_lambda)] = outcome.report.avg_ssim

    def search(self, sigma: float | None = None, noise_lambda: float | None = None) -> BoundaryResult:
        sigma = self.config.sigma if sigma is None else sigma
        noise_lambda = self.config.noise_lambda if noise_lambda is None else noise_lambda
        points = self.model.points
        if self.config.noise_at == "next":
            logger.warning("⚠️ Accuracy noise is applied at the EvalPoint after each candidate")
        if self.config.parallel_precompute:
            self.precompute(points, noise_lambda, sigma)
        result = search_boundary(
            points,
            lambda point: self.idpa(point, noise_lambda, sigma),
            self.accuracy,
            sigma,
            self.delta(),
            noise_lambda,
        )
        return result.model_copy(
            update={
                "baseline_accuracy": self.baseline_accuracy(),
                "provenance": {
                    "config_hash": config_hash(self.config),
                    "model_hash": self.model_hash,
                    "attack": self.config.attack_kind,
                },
            }
        )

    def calibrate(self, boundary: EvalPoint) -> float:
        cfg = self.config
        return calibrate_noise(
            self.model,
            boundary,
            cfg.lambda_grid,
            self.delta(),
            self.test,
            cfg.accuracy_trials,
            cfg.seed_for("data"),
            cfg.noise_at,
        )

    def with_calibration(self, result: BoundaryResult) -> BoundaryResult:
        return result.model_copy(update={"calibrated_lambda": self.calibrate(result.boundary)})
