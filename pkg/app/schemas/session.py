# app/schemas/session.py

from typing import Annotated, Literal, Union

from pydantic import ConfigDict, Field

from app.schemas.base_schema import BaseModel
from app.schemas.eval_point import EvalPoint


class FixedCfg(BaseModel):
    """고정소수점 설정. 표현 가능한 평문 범위는 |v| < 2^(63−f)."""

    frac_bits: int = Field(16, ge=8, le=32)

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def bound(self) -> float:
        return float(2 ** (63 - self.frac_bits))


class InProcTransport(BaseModel):
    kind: Literal["in_proc"] = "in_proc"


class TcpTransport(BaseModel):
    """서버는 port, 딜러는 dealer_port 에서 대기합니다. 0 이면 임의 포트."""

    kind: Literal["tcp"] = "tcp"
    host: str = "127.0.0.1"
    port: int = Field(0, ge=0, le=65535)
    dealer_port: int = Field(0, ge=0, le=65535)


Transport = Annotated[Union[InProcTransport, TcpTransport], Field(discriminator="kind")]


class SessionSeeds(BaseModel):
    """
    세션 난수 스트림. 지정하지 않은 시드는 session 시드에서 파생됩니다.
    mask/pair/dealer 를 고정하면 클라이언트↔서버 crypto 페이로드가 입력과 무관하게 같아집니다.
    """

    session: int = Field(0, ge=0)
    mask: int | None = Field(None, ge=0)
    pair: int | None = Field(None, ge=0)
    dealer: int | None = Field(None, ge=0)
    noise: int | None = Field(None, ge=0)


class SessionConfig(BaseModel):
    boundary: EvalPoint
    noise_lambda: float = Field(0.0, ge=0, alias="lambda", description="노이즈 크기 λ")
    fixed: FixedCfg = Field(default_factory=FixedCfg)
    transport: Transport = Field(default_factory=InProcTransport)
    reveal_result: Literal["logits", "argmax"] = "logits"
    seeds: SessionSeeds = Field(default_factory=SessionSeeds)
    dealer_slot_limit: int | None = Field(None, ge=0, description="진단용: 딜러가 발급할 수 있는 상관값 수")

    model_config = ConfigDict(populate_by_name=True)
