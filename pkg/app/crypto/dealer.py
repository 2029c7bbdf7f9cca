# app/crypto/dealer.py
# 신뢰 딜러: Beaver triple, 절단(truncation), 부호 비트 상관값을 엄격한 순서로 발급합니다.

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core.exceptions import DealerExhaustedError, TripleReuseError
from app.crypto.fixed_point import DEFAULT_FIXED, positive_bit, truncate
from app.crypto.ring_ops import BilinearOp
from app.crypto.sharing import random_ring
from app.schemas.session import FixedCfg

logger = logging.getLogger(__name__)

Shape = tuple[int, ...]


@dataclass(eq=False)
class BeaverTriple:
    """
    (a, b, c) 의 share. 불변식: reconstruct(c) == op(reconstruct(a), reconstruct(b)) (절단 전 링 곱).
    한 번 사용하면 consumed 로 표시되고 재사용은 오류입니다.
    """

    op: BilinearOp
    a_client: np.ndarray
    a_server: np.ndarray
    b_client: np.ndarray
    b_server: np.ndarray
    c_client: np.ndarray
    c_server: np.ndarray
    slot: int = 0
    consumed: bool = False

    def consume(self) -> None:
        if self.consumed:
            raise TripleReuseError(f"beaver triple in slot {self.slot} was already consumed")
        self.consumed = True

    def holds(self) -> bool:
        a = self.a_client + self.a_server
        b = self.b_client + self.b_server
        return bool(np.array_equal(self.c_client + self.c_server, self.op(a, b)))


@dataclass(frozen=True)
class PendingTriple:
    """서버 몫만 먼저 발급된 triple. 클라이언트가 a/b share 를 보내면 complete 로 c share 를 만듭니다."""

    slot: int
    op: BilinearOp
    a_server: np.ndarray
    b_server: np.ndarray
    c_server: np.ndarray


@dataclass(frozen=True)
class TripleShape:
    op: BilinearOp
    x_shape: Shape
    y_shape: Shape


class TrustedDealer:
    """
    시드 고정 생성기 하나에서 모든 상관값을 순서대로 뽑습니다. slot_limit 을 넘으면 레이어 이름과 함께 중단합니다.
    """

    def __init__(self, seed: int, cfg: FixedCfg = DEFAULT_FIXED, slot_limit: int | None = None):
        self.cfg = cfg
        self.slot_limit = slot_limit
        self.slots_used = 0
        self._rng = np.random.default_rng(seed)

    def _claim(self, layer: str) -> int:
        slot = self.slots_used
        if self.slot_limit is not None and slot >= self.slot_limit:
            logger.error(f"❌ Dealer exhausted: slot={slot}, limit={self.slot_limit}, layer={layer}")
            raise DealerExhaustedError(layer, slot)
        self.slots_used += 1
        return slot

    def triple(self, op: BilinearOp, x_shape: Shape, y_shape: Shape, layer: str = "-") -> BeaverTriple:
        slot = self._claim(layer)
        a = random_ring(self._rng, x_shape)
        b = random_ring(self._rng, y_shape)
        c = op(a, b)
        a_server = random_ring(self._rng, x_shape)
        b_server = random_ring(self._rng, y_shape)
        c_server = random_ring(self._rng, c.shape)
        return BeaverTriple(
            op, a - a_server, a_server, b - b_server, b_server, c - c_server, c_server, slot=slot
        )

    def issue_server(self, op: BilinearOp, x_shape: Shape, y_shape: Shape, layer: str = "-") -> PendingTriple:
        slot = self._claim(layer)
        out_shape = op.output_shape(x_shape, y_shape)
        return PendingTriple(
            slot,
            op,
            random_ring(self._rng, x_shape),
            random_ring(self._rng, y_shape),
            random_ring(self._rng, out_shape),
        )

    @staticmethod
    def complete(pending: PendingTriple, a_client: np.ndarray, b_client: np.ndarray) -> np.ndarray:
        """클라이언트가 고른 a/b share 로 triple 을 완성하고 클라이언트의 c share 를 돌려줍니다."""
        c = pending.op(a_client + pending.a_server, b_client + pending.b_server)
        return c - pending.c_server

    def _reshare(self, value: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        server = random_ring(self._rng, value.shape)
        return value - server, server

    def truncate(
        self, masked_client: np.ndarray, masked_server: np.ndarray, layer: str = "-"
    ) -> tuple[np.ndarray, np.ndarray]:
        """마스크된 두 share 를 합쳐 f 비트 산술 시프트한 값의 새 share (client, server)."""
        self._claim(layer)
        return self._reshare(truncate(masked_client + masked_server, self.cfg.frac_bits))

    def sign(
        self, masked_client: np.ndarray, masked_server: np.ndarray, layer: str = "-"
    ) -> tuple[np.ndarray, np.ndarray]:
        """[v > 0] 의 share (client, server). 비트는 스케일 없는 링 원소 0/1 입니다."""
        self._claim(layer)
        return self._reshare(positive_bit(masked_client + masked_server))


class TripleStore:
    """미리 생성된 triple 의 순서 큐."""

    def __init__(self, triples: Sequence[BeaverTriple]):
        self.triples = list(triples)
        self.cursor = 0

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def remaining(self) -> int:
        return len(self.triples) - self.cursor

    def next(self, layer: str = "-") -> BeaverTriple:
        if self.cursor >= len(self.triples):
            raise DealerExhaustedError(layer, self.cursor)
        triple = self.triples[self.cursor]
        self.cursor += 1
        return triple


def dealer_gen(count: int, shapes: TripleShape | Sequence[TripleShape], seed: int) -> TripleStore:
    """
    count 개의 triple 을 만듭니다. shapes 가 하나면 모두 같은 모양, 목록이면 순환하며 사용합니다.
    """
    shape_list = [shapes] if isinstance(shapes, TripleShape) else list(shapes)
    dealer = TrustedDealer(seed)
    triples = [
        dealer.triple(s.op, s.x_shape, s.y_shape)
        for s in (shape_list[i % len(shape_list)] for i in range(count))
    ]
    return TripleStore(triples)
