# app/core/provenance.py
# 재현성 관련 유틸리티 (정규화된 JSON, 설정/모델 해시, 파생 시드)

import hashlib
import json
from typing import Any

from app.core.config import settings
from app.core.exceptions import ConfigError


def canonical_json(payload: Any) -> str:
    """키 정렬, 공백 없는 JSON. 같은 입력이면 항상 같은 바이트를 돌려줍니다."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def config_hash(config: Any) -> str:
    """pydantic 모델 또는 dict 의 설정 해시 (16 hex)."""
    if hasattr(config, "model_dump"):
        config = config.model_dump(mode="json")
    return sha256_hex(canonical_json(config).encode("utf-8"))[:16]


def derive_seed(base: int, *tags: Any) -> int:
    """기본 시드와 태그로부터 작업별 시드를 결정적으로 파생합니다."""
    material = canonical_json([int(base), [str(t) for t in tags]]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "little") >> 1


def resolve_seed(explicit: int | None, default: int = 0) -> int:
    """명시적 시드 > C2PI_SEED 환경 변수 > default 순으로 시드를 결정합니다."""
    if explicit is not None:
        if explicit < 0:
            raise ConfigError(f"seed must be non-negative, got {explicit}")
        return explicit
    if settings.C2PI_SEED is not None:
        return settings.C2PI_SEED
    return default
