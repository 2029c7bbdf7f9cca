# app/schemas/training.py

from pydantic import Field

from app.schemas.base_schema import BaseModel


class SgdConfig(BaseModel):
    learning_rate: float = Field(0.001, gt=0, description="학습률")
    momentum: float = Field(0.0, ge=0, lt=1, description="모멘텀 계수 (0 이면 순수 SGD)")
    seed: int = Field(0, ge=0, description="셔플/초기화 시드")
    clip_norm: float | None = Field(None, gt=0, description="전역 기울기 노름 상한 (없으면 미적용)")


class TrainingConfig(BaseModel):
    sgd: SgdConfig = Field(
        default_factory=lambda: SgdConfig(learning_rate=0.05, momentum=0.9, seed=1)
    )
    epochs: int = Field(20, ge=0)
    batch_size: int = Field(32, ge=1)


class TrainingMeta(BaseModel):
    seed: int
    epochs: int
    batch_size: int
    learning_rate: float
    momentum: float
    epoch_losses: list[float] = Field(default_factory=list)
    final_accuracy: float | None = Field(None, ge=0, le=1)
