# app/crypto/sharing.py
# 2-파티 가법 비밀 분산 (mod 2^64)

import enum
from dataclasses import dataclass

import numpy as np

from app.core.exceptions import ShapeMismatchError
from app.crypto.fixed_point import RING_DTYPE

_RING_MAX = np.iinfo(np.uint64).max


class PartyRole(str, enum.Enum):
    CLIENT = "client"
    SERVER = "server"
    DEALER = "dealer"


def random_ring(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """링 전체에서 균등한 원소."""
    return rng.integers(0, _RING_MAX, size=shape, dtype=RING_DTYPE, endpoint=True)


@dataclass(frozen=True, eq=False)
class ShareTensor:
    """한 파티가 가진 가법 share. 값은 읽기 전용 uint64 배열입니다."""

    values: np.ndarray
    party: PartyRole

    def __post_init__(self):
        values = np.array(self.values, dtype=RING_DTYPE, copy=True)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "party", PartyRole(self.party))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


def share(x: np.ndarray, rng: np.random.Generator) -> tuple[ShareTensor, ShareTensor]:
    """서버 share 는 균등 난수, 클라이언트 share 는 x − 서버 share."""
    x = np.asarray(x, dtype=RING_DTYPE)
    server = random_ring(rng, x.shape)
    client = x - server
    return ShareTensor(client, PartyRole.CLIENT), ShareTensor(server, PartyRole.SERVER)


def reconstruct(client: ShareTensor, server: ShareTensor) -> np.ndarray:
    if client.shape != server.shape:
        raise ShapeMismatchError("reconstruct", client.shape, server.shape)
    return client.values + server.values
