# app/schemas/transcript.py
# 프로토콜 메시지 원장과 페이즈별 합계

from itertools import groupby
from typing import Literal

from pydantic import Field, model_validator

from app.schemas.base_schema import ArtifactModel, BaseModel

Phase = Literal["setup", "crypto", "reveal", "clear"]
PHASES: tuple[str, ...] = ("setup", "crypto", "reveal", "clear")
HEADER_BYTES = 14


class LedgerEntry(BaseModel):
    """보낸 메시지 하나. wire_bytes = 14바이트 헤더 + payload."""

    round: int = Field(..., ge=0)
    phase: Phase
    sender: str
    receiver: str
    msg_type: str
    payload_bytes: int = Field(..., ge=0)
    ring_elements: int = Field(0, ge=0)
    descriptor_bytes: int = Field(0, ge=0)
    digest: str = Field(..., description="payload 의 sha256")

    @property
    def wire_bytes(self) -> int:
        return HEADER_BYTES + self.payload_bytes


class PhaseTotals(BaseModel):
    messages: int = 0
    bytes: int = 0


class Transcript(ArtifactModel):
    """
    세션 전체의 메시지 원장.
    - bytes_total == Σ 페이즈 합계 == Σ 원장 wire_bytes
    - rounds = crypto 페이즈의 방향 전환 횟수 (count_rounds)
    """

    ledger: list[LedgerEntry] = Field(default_factory=list)
    rounds: int = 0
    totals: dict[str, PhaseTotals] = Field(default_factory=dict)
    bytes_total: int = 0

    @model_validator(mode="after")
    def _conserved(self) -> "Transcript":
        ledger_bytes = sum(entry.wire_bytes for entry in self.ledger)
        phase_bytes = sum(t.bytes for t in self.totals.values())
        if not (ledger_bytes == phase_bytes == self.bytes_total):
            raise ValueError(
                f"transcript totals disagree: ledger={ledger_bytes}, phases={phase_bytes}, total={self.bytes_total}"
            )
        return self

    @classmethod
    def from_ledger(cls, ledger: list[LedgerEntry], provenance: dict | None = None) -> "Transcript":
        totals = {phase: PhaseTotals() for phase in PHASES}
        for entry in ledger:
            current = totals[entry.phase]
            totals[entry.phase] = PhaseTotals(
                messages=current.messages + 1, bytes=current.bytes + entry.wire_bytes
            )
        rounds = count_rounds([entry for entry in ledger if entry.phase == "crypto"])
        return cls(
            ledger=ledger,
            rounds=rounds,
            totals=totals,
            bytes_total=sum(t.bytes for t in totals.values()),
            provenance=provenance or {},
        )

    def phase_bytes(self, phase: str, sender: str | None = None, receiver: str | None = None) -> int:
        return sum(
            e.wire_bytes
            for e in self.ledger
            if e.phase == phase
            and (sender is None or e.sender == sender)
            and (receiver is None or e.receiver == receiver)
        )

    def entries(self, phase: str | None = None) -> list[LedgerEntry]:
        return [e for e in self.ledger if phase is None or e.phase == phase]


def count_rounds(entries: list[LedgerEntry]) -> int:
    """
    통신 라운드 수 = 방향 전환 횟수.
    같은 라운드 번호가 찍힌 메시지 묶음을 순서대로 보며, 현재 라운드에서 이미 메시지를 받은
    당사자가 다시 보내면 (받기 → 보내기 전환) 새 라운드를 엽니다. 동시 교환은 한 라운드입니다.
    """
    rounds = 0
    received: set[str] = set()
    for _, group in groupby(entries, key=lambda entry: entry.round):
        group = list(group)
        if rounds == 0 or any(entry.sender in received for entry in group):
            rounds += 1
            received = set()
        received |= {entry.receiver for entry in group}
    return rounds
