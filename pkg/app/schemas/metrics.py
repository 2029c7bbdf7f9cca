# app/schemas/metrics.py

from pydantic import Field

from app.schemas.base_schema import BaseModel


class SsimConfig(BaseModel):
    """가우시안 창 SSIM 설정. 창 크기보다 작은 이미지는 min(H, W) 크기의 균등 창을 씁니다."""

    window: int = Field(11, ge=1)
    gaussian_sigma: float = Field(1.5, gt=0)
    k1: float = Field(0.01, gt=0)
    k2: float = Field(0.03, gt=0)
    data_range: float = Field(1.0, gt=0)

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2
