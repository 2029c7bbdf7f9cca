# app/protocol/channel.py
# 두 엔드포인트 사이의 양방향 메시지 채널 (프로세스 내부 큐 / TCP 스트림)

import abc
import asyncio
import logging

from app.core.exceptions import ProtocolError
from app.protocol.wire import HEADER_SIZE, Message, decode_header, decode_message

logger = logging.getLogger(__name__)

# StreamReader 가 큰 텐서 메시지에서 읽기를 멈추지 않도록 넉넉한 버퍼 한도
STREAM_LIMIT = 2**30


class Channel(abc.ABC):
    """local 엔드포인트에서 본 remote 와의 링크. 메시지는 보낸 순서대로 도착합니다."""

    def __init__(self, local: str, remote: str):
        self.local = local
        self.remote = remote

    @abc.abstractmethod
    async def send(self, message: Message, phase: str = "crypto", round_index: int = 0) -> None:
        """phase/round_index 는 계량 래퍼가 원장에 기록하는 스탬프입니다."""

    @abc.abstractmethod
    async def recv(self) -> Message: ...

    @abc.abstractmethod
    async def close(self) -> None: ...


class QueueChannel(Channel):
    """프로세스 내부 채널. TCP 와 같은 코덱 경로를 타도록 인코딩된 바이트를 주고받습니다."""

    def __init__(self, local: str, remote: str, outbox: asyncio.Queue, inbox: asyncio.Queue):
        super().__init__(local, remote)
        self._outbox = outbox
        self._inbox = inbox

    async def send(self, message: Message, phase: str = "crypto", round_index: int = 0) -> None:
        await self._outbox.put(message.encode())

    async def recv(self) -> Message:
        data = await self._inbox.get()
        if data is None:
            raise ProtocolError(f"channel {self.local}<-{self.remote} closed by peer")
        return decode_message(data)

    async def close(self) -> None:
        await self._outbox.put(None)


def queue_pair(a: str, b: str) -> tuple[QueueChannel, QueueChannel]:
    a_to_b: asyncio.Queue = asyncio.Queue()
    b_to_a: asyncio.Queue = asyncio.Queue()
    return QueueChannel(a, b, a_to_b, b_to_a), QueueChannel(b, a, b_to_a, a_to_b)


class StreamChannel(Channel):
    """asyncio 스트림 위의 프레이밍 채널."""

    def __init__(self, local: str, remote: str, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        super().__init__(local, remote)
        self._reader = reader
        self._writer = writer

    async def send(self, message: Message, phase: str = "crypto", round_index: int = 0) -> None:
        try:
            self._writer.write(message.encode())
            await self._writer.drain()
        except (ConnectionError, OSError) as e:
            raise ProtocolError(f"send {self.local}->{self.remote} failed: {e}") from None

    async def recv(self) -> Message:
        try:
            header = await self._reader.readexactly(HEADER_SIZE)
            msg_type, length = decode_header(header)
            payload = await self._reader.readexactly(length) if length else b""
        except asyncio.IncompleteReadError:
            raise ProtocolError(f"connection {self.local}<-{self.remote} closed mid-message") from None
        except (ConnectionError, OSError) as e:
            raise ProtocolError(f"recv {self.local}<-{self.remote} failed: {e}") from None
        return Message(msg_type, payload)

    async def close(self) -> None:
        if self._writer.is_closing():
            return
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            logger.debug(f"connection {self.local}->{self.remote} was already reset")


async def open_stream_channel(local: str, remote: str, host: str, port: int) -> StreamChannel:
    try:
        reader, writer = await asyncio.open_connection(host, port, limit=STREAM_LIMIT)
    except OSError as e:
        raise ProtocolError(f"{local} cannot reach {remote} at {host}:{port}: {e}") from None
    return StreamChannel(local, remote, reader, writer)
