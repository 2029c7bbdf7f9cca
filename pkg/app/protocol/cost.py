# app/protocol/cost.py
# 원장으로부터 네트워크 지연 시간을 추정합니다: 시간 = 바이트/대역폭 + 라운드 · RTT

from pydantic import Field

from app.core.exceptions import ConfigError
from app.schemas.base_schema import BaseModel
from app.schemas.transcript import Transcript


class NetworkProfile(BaseModel):
    name: str
    bandwidth_mbps: float = Field(..., gt=0, description="MB/s")
    rtt_ms: float = Field(..., ge=0)


LAN = NetworkProfile(name="lan", bandwidth_mbps=384.0, rtt_ms=0.3)
WAN = NetworkProfile(name="wan", bandwidth_mbps=44.0, rtt_ms=40.0)
PROFILES = {profile.name: profile for profile in (LAN, WAN)}


class LatencyEstimate(BaseModel):
    profile: str
    bytes: int
    rounds: int
    seconds: float


def get_profile(name: str) -> NetworkProfile:
    try:
        return PROFILES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown network profile {name!r}, choose from {sorted(PROFILES)}") from None


def estimate_latency(transcript: Transcript, profile: NetworkProfile, phase: str | None = "crypto") -> LatencyEstimate:
    """phase 가 None 이면 전체 원장, 아니면 해당 페이즈 바이트만 셉니다. 라운드는 crypto 라운드 수."""
    total = transcript.bytes_total if phase is None else transcript.totals[phase].bytes
    seconds = total / (profile.bandwidth_mbps * 1e6) + transcript.rounds * profile.rtt_ms / 1e3
    return LatencyEstimate(profile=profile.name, bytes=total, rounds=transcript.rounds, seconds=seconds)
