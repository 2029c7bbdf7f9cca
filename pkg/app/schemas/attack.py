# app/schemas/attack.py
# 입력 복원 공격(MLA / EINA / DINA) 설정, 역변환 모델 구조, 결과 리포트

from typing import Literal

from pydantic import Field, computed_field, model_validator

from app.schemas.base_schema import ArtifactModel, BaseModel
from app.schemas.eval_point import EvalPoint
from app.schemas.metrics import SsimConfig
from app.schemas.training import SgdConfig

AttackKind = Literal["mla", "eina", "dina"]
InversionMode = Literal["eina", "dina"]


class AttackConfig(BaseModel):
    kind: AttackKind = "dina"
    # MLA: 임의 초기화 후 경사 하강 반복 횟수와 스텝 크기
    iterations: int = Field(10000, gt=0)
    lr: float = Field(0.001, gt=0)
    # 역변환 모델 학습
    epochs: int = Field(30, ge=0)
    batch_size: int = Field(32, ge=1)
    inversion_sgd: SgdConfig = Field(
        default_factory=lambda: SgdConfig(learning_rate=0.01, momentum=0.9, clip_norm=10.0)
    )
    schedule: Literal["doubling", "uniform"] = "doubling"
    seed: int = Field(0, ge=0)
    noise_lambda: float = Field(0.0, ge=0, description="공격자가 알고 있는 노이즈 크기 λ")
    train_samples: int | None = Field(None, ge=1)
    eval_samples: int = Field(64, ge=1)
    ssim: SsimConfig = Field(default_factory=SsimConfig)


class SubBlock(BaseModel):
    """crypto prefix 레이어 [start, stop) 구간. ReLU 가 정확히 하나 (끝의 부분 블록은 0 개)."""

    start: int = Field(..., ge=0)
    stop: int = Field(..., ge=1)
    ends_at: EvalPoint
    relu_count: int = Field(..., ge=0, le=1)
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]

    @property
    def partial(self) -> bool:
        return self.relu_count == 0


class InverseBlockSpec(BaseModel):
    """
    서브 블록 하나의 역변환.
    - conv: 잔차 블록 → (해상도가 줄었으면) 최근접 업샘플 → 팽창 합성곱(k3, d2, p2)
    - dense: 잔차 블록 → dense 사영 → reshape
    """

    kind: Literal["conv", "dense"]
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    upsample: int = Field(1, ge=1)


class InversionModelSpec(BaseModel):
    """blocks[j] 는 서브 블록 j 를 역변환합니다. 실행은 마지막 블록부터 첫 블록 순서입니다."""

    mode: InversionMode
    target: EvalPoint
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    blocks: list[InverseBlockSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _chained(self) -> "InversionModelSpec":
        expected = self.input_shape
        for index in reversed(range(len(self.blocks))):
            block = self.blocks[index]
            if block.input_shape != expected:
                raise ValueError(f"inverse block {index} consumes {block.input_shape}, receives {expected}")
            expected = block.output_shape
        if expected != self.output_shape:
            raise ValueError(f"inversion output {expected} differs from model input {self.output_shape}")
        return self


class AttackReport(ArtifactModel):
    target: EvalPoint
    kind: AttackKind
    per_image_ssim: list[float] = Field(..., min_length=1)
    sigma: float = Field(0.3, gt=0, le=1)
    config: AttackConfig

    @model_validator(mode="after")
    def _in_range(self) -> "AttackReport":
        for value in self.per_image_ssim:
            if not -1.0 <= value <= 1.0:
                raise ValueError(f"SSIM {value} outside [-1, 1]")
        return self

    @computed_field
    @property
    def avg_ssim(self) -> float:
        return float(sum(self.per_image_ssim) / len(self.per_image_ssim))

    @computed_field
    @property
    def succeeded(self) -> bool:
        """avg_ssim 이 σ 이상이면 복원 성공 (프라이버시 실패)."""
        return self.avg_ssim >= self.sigma
