# app/crypto/fixed_point.py
# Z_{2^64} 위의 고정소수점 인코딩. 링 원소는 numpy uint64 이며 덧셈/곱셈은 자연스럽게 wrap 됩니다.

import numpy as np

from app.core.exceptions import FixedPointRangeError, NonFiniteError
from app.schemas.session import FixedCfg

RING_DTYPE = np.uint64
DEFAULT_FIXED = FixedCfg()


def to_ring(values: np.ndarray) -> np.ndarray:
    """부호 있는 int64 → 2의 보수 링 원소."""
    return np.asarray(values, dtype=np.int64).view(RING_DTYPE)


def to_signed(ring: np.ndarray) -> np.ndarray:
    return np.asarray(ring, dtype=RING_DTYPE).view(np.int64)


def encode(value, cfg: FixedCfg = DEFAULT_FIXED, frac_bits: int | None = None) -> np.ndarray:
    """
    encode(v) = round(v · 2^f) mod 2^64.
    frac_bits 를 주면 그 스케일로 인코딩합니다 (예: 2f 스케일의 bias).
    """
    bits = cfg.frac_bits if frac_bits is None else frac_bits
    v = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("fixed-point encode")
    bound = float(2 ** (63 - bits))
    if v.size and float(np.max(np.abs(v))) >= bound:
        raise FixedPointRangeError(
            f"value {float(np.max(np.abs(v)))} outside representable range |v| < 2^{63 - bits} (f={bits})"
        )
    return to_ring(np.round(v * float(1 << bits)).astype(np.int64))


def decode(ring, cfg: FixedCfg = DEFAULT_FIXED) -> np.ndarray:
    return to_signed(ring).astype(np.float64) / float(cfg.scale)


def truncate(ring: np.ndarray, frac_bits: int) -> np.ndarray:
    """부호 있는 산술 시프트(내림)로 f 비트를 잘라냅니다."""
    return to_ring(to_signed(ring) >> frac_bits)


def positive_bit(ring: np.ndarray) -> np.ndarray:
    """[v > 0] 을 링 원소 0/1 로."""
    return (to_signed(ring) > 0).astype(RING_DTYPE)
