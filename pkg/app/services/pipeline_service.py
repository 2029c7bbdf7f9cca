# app/services/pipeline_service.py
# 명령들이 공유하는 실험 흐름: 데이터/모델 준비, 노이즈 스윕, 표 형태 리포트

import logging
from dataclasses import dataclass
from typing import Sequence

from app.core.exceptions import ConfigError, ShapeMismatchError
from app.core.provenance import config_hash, sha256_hex
from app.crud import crud_model
from app.models.dataset import Dataset
from app.models.network import TrainedModel
from app.models.zoo import build_spec
from app.protocol.cost import LAN, WAN, estimate_latency
from app.protocol.session import run_crypto_layers
from app.schemas.boundary import BoundaryResult, CostSummary, ExperimentReport, NoiseSweepRow, ReportRow
from app.schemas.eval_point import EvalPoint
from app.schemas.experiment import ExperimentConfig
from app.services.attack_service import AttackService
from app.services.boundary_service import BoundaryService
from app.services.dataset_service import DatasetService
from app.services.metrics_service import noised_accuracy
from app.services.training_service import train_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PreparedExperiment:
    model: TrainedModel
    model_hash: str
    train: Dataset
    test: Dataset


def parse_lambda_range(text: str) -> list[float]:
    """"start:stop:step" (양 끝 포함) 또는 쉼표로 구분한 값 목록."""
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return [round(start + i * step, 10) for i in range(count)]
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse noise grid {text!r} (expected start:stop:step or a,b,c)") from None


class PipelineService:
    def __init__(self, config: ExperimentConfig):
        self.config = config

    def prepare(self, model_path: str | None = None) -> PreparedExperiment:
        """데이터셋을 만들고, 모델 파일이 있으면 읽고 없으면 학습합니다."""
        train, test = DatasetService(self.config).load()
        model_path = model_path or self.config.model_path
        if model_path is not None:
            model, model_hash = crud_model.load_model(model_path)
            if model.spec.input_shape != train.input_shape:
                raise ShapeMismatchError(f"model {model_path} vs dataset", model.spec.input_shape, train.input_shape)
        else:
            spec = build_spec(self.config.model, train.input_shape, train.num_classes)
            model = train_model(spec, train, self.config.training_config(), test)
            model_hash = sha256_hex(crud_model.encode_model(model))
        return PreparedExperiment(model, model_hash, train, test)

    def boundary_service(self, prepared: PreparedExperiment) -> BoundaryService:
        return BoundaryService(prepared.model, prepared.train, prepared.test, self.config, prepared.model_hash)

    def sweep_noise(
        self, prepared: PreparedExperiment, point: EvalPoint, lambdas: Sequence[float]
    ) -> list[NoiseSweepRow]:
        """λ 마다 공격 SSIM 과 노이즈 정확도를 함께 잽니다."""
        cfg = self.config
        rows = []
        for noise_lambda in lambdas:
            attacks = AttackService(
                prepared.model,
                prepared.train,
                prepared.test,
                cfg.attack_config(noise_lambda=noise_lambda),
                prepared.model_hash,
                use_cache=True,
            )
            report = attacks.run(point, sigma=cfg.sigma)
            accuracy = noised_accuracy(
                prepared.model, point, noise_lambda, prepared.test, cfg.accuracy_trials, cfg.seed_for("data"), cfg.noise_at
            )
            rows.append(NoiseSweepRow(point=point, noise_lambda=noise_lambda, avg_ssim=report.avg_ssim, accuracy=accuracy))
            logger.info(f"λ={noise_lambda}: avg SSIM={report.avg_ssim:.4f}, accuracy={accuracy:.4f}")
        return rows

    def costs(self, prepared: PreparedExperiment, boundary: EvalPoint) -> CostSummary:
        """한 장의 입력으로 crypto 페이즈만 실행해 통신량을 비교합니다."""
        sample = prepared.test.images[:1]
        full_point = prepared.model.points[-1]
        _, _, full = run_crypto_layers(prepared.model, sample, self.config.session_config(full_point, 0.0))
        _, _, partial = run_crypto_layers(prepared.model, sample, self.config.session_config(boundary, 0.0))
        return CostSummary(
            full_pi_bytes=full.totals["crypto"].bytes,
            full_pi_rounds=full.rounds,
            boundary_bytes=partial.totals["crypto"].bytes,
            boundary_rounds=partial.rounds,
            lan_seconds=estimate_latency(partial, LAN).seconds,
            wan_seconds=estimate_latency(partial, WAN).seconds,
            full_pi_lan_seconds=estimate_latency(full, LAN).seconds,
            full_pi_wan_seconds=estimate_latency(full, WAN).seconds,
        )

    def report(
        self,
        prepared: PreparedExperiment,
        sigmas: Sequence[float],
        with_costs: bool = False,
        calibrate: bool = False,
    ) -> tuple[ExperimentReport, list[BoundaryResult]]:
        """σ 마다 경계를 찾고 (기준 정확도, 경계, 경계에서의 노이즈 정확도) 행을 만듭니다."""
        service = self.boundary_service(prepared)
        rows, results = [], []
        for sigma in sigmas:
            result = service.search(sigma=sigma)
            if calibrate:
                result = service.with_calibration(result)
            results.append(result)
            rows.append(
                ReportRow(
                    dataset=self.config.dataset,
                    model=prepared.model.spec.name,
                    baseline_acc=service.baseline_accuracy(),
                    sigma=sigma,
                    boundary=result.boundary,
                    noise_lambda=result.noise_lambda,
                    acc=result.phase2_trace[-1].accuracy,
                    calibrated_lambda=result.calibrated_lambda,
                    costs=self.costs(prepared, result.boundary) if with_costs else None,
                )
            )
        report = ExperimentReport(
            rows=rows,
            provenance={"config_hash": config_hash(self.config), "model_hash": prepared.model_hash},
        )
        return report, results
