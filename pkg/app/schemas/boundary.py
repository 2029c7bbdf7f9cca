# app/schemas/boundary.py

from pydantic import Field, model_validator

from app.schemas.base_schema import ArtifactModel, BaseModel
from app.schemas.eval_point import EvalPoint


class SsimTraceEntry(BaseModel):
    point: EvalPoint
    avg_ssim: float


class AccuracyTraceEntry(BaseModel):
    point: EvalPoint
    accuracy: float = Field(..., ge=0, le=1)


class BoundaryResult(ArtifactModel):
    """
    경계 탐색 결과.
    - phase1_trace: 뒤에서부터 평가한 (지점, 평균 SSIM). σ 이상인 항목은 있다면 마지막 하나뿐입니다.
    - phase2_trace: 앞으로 나아가며 평가한 (지점, 노이즈 정확도). 마지막 항목은 δ 이상입니다.
    """

    boundary: EvalPoint
    noise_lambda: float = Field(..., ge=0)
    sigma: float
    delta: float
    phase1_trace: list[SsimTraceEntry] = Field(default_factory=list)
    phase2_trace: list[AccuracyTraceEntry] = Field(default_factory=list)
    degenerate: bool = False
    baseline_accuracy: float | None = None
    calibrated_lambda: float | None = Field(None, ge=0, description="경계에서 δ 를 유지하는 최대 λ")

    @model_validator(mode="after")
    def _consistent(self) -> "BoundaryResult":
        succeeded = [i for i, e in enumerate(self.phase1_trace) if e.avg_ssim >= self.sigma]
        if succeeded and succeeded != [len(self.phase1_trace) - 1]:
            raise ValueError("phase-1 trace continues after the attack succeeded")
        if self.phase2_trace and self.phase2_trace[-1].accuracy < self.delta:
            raise ValueError("phase-2 trace ends below the accuracy threshold")
        return self


class CostSummary(BaseModel):
    """crypto 페이즈 통신량: 전체 PI (마지막 지점까지 crypto) 대 경계까지의 세션."""

    full_pi_bytes: int = Field(..., ge=0)
    full_pi_rounds: int = Field(..., ge=0)
    boundary_bytes: int = Field(..., ge=0)
    boundary_rounds: int = Field(..., ge=0)
    lan_seconds: float
    wan_seconds: float
    full_pi_lan_seconds: float
    full_pi_wan_seconds: float


class ReportRow(BaseModel):
    dataset: str
    model: str
    baseline_acc: float
    sigma: float
    boundary: EvalPoint
    noise_lambda: float
    acc: float
    calibrated_lambda: float | None = None
    costs: CostSummary | None = None


class ExperimentReport(ArtifactModel):
    rows: list[ReportRow] = Field(..., min_length=1)


class NoiseSweepRow(BaseModel):
    point: EvalPoint
    noise_lambda: float = Field(..., ge=0)
    avg_ssim: float
    accuracy: float = Field(..., ge=0, le=1)
