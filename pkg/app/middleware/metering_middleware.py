# app/middleware/metering_middleware.py

import logging
from collections import defaultdict

from app.core.provenance import sha256_hex
from app.protocol.channel import Channel
from app.protocol.wire import Message
from app.schemas.transcript import PHASES, LedgerEntry, Transcript

logger = logging.getLogger(__name__)


class TranscriptRecorder:
    """
    세션의 모든 송신 메시지를 모읍니다. 원장은 (phase, round, sender, receiver, 링크 순번) 으로 정렬되므로
    엔드포인트 실행 순서나 전송 방식과 무관하게 같은 세션은 같은 원장을 만듭니다.
    """

    def __init__(self):
        self._entries: list[tuple[tuple, LedgerEntry]] = []
        self._link_seq: dict[tuple[str, str], int] = defaultdict(int)

    def record(self, sender: str, receiver: str, message: Message, phase: str, round_index: int) -> None:
        link = (sender, receiver)
        seq = self._link_seq[link]
        self._link_seq[link] += 1
        entry = LedgerEntry(
            round=round_index,
            phase=phase,
            sender=sender,
            receiver=receiver,
            msg_type=message.msg_type.name,
            payload_bytes=len(message.payload),
            ring_elements=message.elements,
            descriptor_bytes=message.descriptor_bytes,
            digest=sha256_hex(message.payload),
        )
        key = (PHASES.index(phase), round_index, sender, receiver, seq)
        self._entries.append((key, entry))
        logger.debug(
            f"{sender}->{receiver} {message.msg_type.name} phase={phase} round={round_index} "
            f"bytes={message.size}"
        )

    def finalize(self, provenance: dict | None = None) -> Transcript:
        ledger = [entry for _, entry in sorted(self._entries, key=lambda item: item[0])]
        transcript = Transcript.from_ledger(ledger, provenance)
        summary = ", ".join(
            f"{phase}={totals.bytes}B/{totals.messages}msg" for phase, totals in transcript.totals.items()
        )
        logger.info(f"✅ Session transcript: {summary}, crypto rounds={transcript.rounds}")
        return transcript


class MeteredChannel(Channel):
    """채널 래퍼. 보내는 메시지마다 원장 항목을 남깁니다 (수신 측은 기록하지 않음)."""

    def __init__(self, inner: Channel, recorder: TranscriptRecorder):
        super().__init__(inner.local, inner.remote)
        self._inner = inner
        self._recorder = recorder

    async def send(self, message: Message, phase: str = "crypto", round_index: int = 0) -> None:
        self._recorder.record(self.local, self.remote, message, phase, round_index)
        await self._inner.send(message, phase, round_index)

    async def recv(self) -> Message:
        return await self._inner.recv()

    async def close(self) -> None:
        await self._inner.close()
