# app/protocol/session.py
# 한 번의 추론 세션을 구성하고 실행합니다 (프로세스 내부 큐 또는 TCP).

import asyncio
import logging
from dataclasses import dataclass
from typing import Awaitable

import numpy as np

from app.core.config import settings
from app.core.exceptions import C2PIError, EvalPointError, ProtocolAbort, ProtocolError
from app.core.provenance import config_hash, derive_seed
from app.crypto.sharing import PartyRole, ShareTensor
from app.middleware.metering_middleware import MeteredChannel, TranscriptRecorder
from app.models.network import TrainedModel, eval_points
from app.protocol.channel import STREAM_LIMIT, Channel, StreamChannel, open_stream_channel, queue_pair
from app.protocol.endpoints import (
    ClientOutcome,
    DealerOutcome,
    ServerOutcome,
    SessionSeedSet,
    run_client,
    run_dealer,
    run_server,
)
from app.schemas.session import SessionConfig, SessionSeeds
from app.schemas.transcript import Transcript

logger = logging.getLogger(__name__)

ABORT_GRACE_S = 1.0


@dataclass(frozen=True, eq=False)
class SessionResult:
    """
    output: 클라이언트가 받은 결과 (logits 또는 argmax).
    server_activation: 서버가 복원한 노이즈 섞인 boundary 활성값.
    """

    output: np.ndarray
    transcript: Transcript
    server_activation: np.ndarray
    client_share: ShareTensor
    server_share: ShareTensor
    dealer_slots: int


def resolve_session_seeds(seeds: SessionSeeds) -> SessionSeedSet:
    """지정하지 않은 스트림 시드는 session 시드에서 파생합니다."""

    def pick(value: int | None, tag: str) -> int:
        return value if value is not None else derive_seed(seeds.session, tag)

    return SessionSeedSet(
        mask=pick(seeds.mask, "mask"),
        pair=pick(seeds.pair, "pair"),
        dealer=pick(seeds.dealer, "dealer"),
        noise=pick(seeds.noise, "noise"),
    )


def _root_cause(errors: list[BaseException]) -> BaseException:
    """원격 중단보다 실제로 실패한 엔드포인트의 오류를 우선합니다."""
    for error in errors:
        if not (isinstance(error, ProtocolAbort) and error.remote):
            return error
    return errors[0]


async def _drive(coroutines: list[Awaitable], timeout: float) -> list:
    tasks = [asyncio.ensure_future(coroutine) for coroutine in coroutines]
    try:
        done, pending = await asyncio.wait(tasks, timeout=timeout, return_when=asyncio.FIRST_EXCEPTION)
        failed = any(task.exception() is not None for task in done)
        if failed and pending:
            # 중단 메시지를 받은 상대가 스스로 끝날 시간을 잠깐 줍니다
            await asyncio.wait(pending, timeout=ABORT_GRACE_S)
        for task in tasks:
            if not task.done():
                task.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)
        errors = [
            task.exception() for task in tasks if not task.cancelled() and task.exception() is not None
        ]
        if errors:
            raise _root_cause(errors)
        if pending:
            raise ProtocolAbort("session", f"timed out after {timeout}s")
        return [task.result() for task in tasks]
    finally:
        for task in tasks:
            if not task.done():
                task.cancel()


def _check_config(model: TrainedModel, x: np.ndarray, config: SessionConfig) -> None:
    if config.boundary not in eval_points(model.spec):
        raise EvalPointError(f"{config.boundary} is not an evaluation point of {model.spec.name}")
    if x.ndim != 4:
        raise ProtocolError(f"session input must be a batch (N, C, H, W), got shape {x.shape}")


async def _in_proc(
    model: TrainedModel, x: np.ndarray, config: SessionConfig, seeds: SessionSeedSet, recorder, crypto_only: bool
) -> tuple[ClientOutcome, ServerOutcome, DealerOutcome]:
    client_server, server_client = queue_pair("client", "server")
    client_dealer, dealer_client = queue_pair("client", "dealer")
    server_dealer, dealer_server = queue_pair("server", "dealer")

    def meter(channel: Channel) -> Channel:
        return MeteredChannel(channel, recorder)

    return await _drive(
        [
            run_client(x, meter(client_server), meter(client_dealer), config, seeds, crypto_only),
            run_server(model, meter(server_client), meter(server_dealer), config, crypto_only),
            run_dealer([dealer_client, dealer_server], seeds.dealer, config.dealer_slot_limit, wrap=meter),
        ],
        settings.PROTOCOL_TIMEOUT_S,
    )


async def _tcp(
    model: TrainedModel, x: np.ndarray, config: SessionConfig, seeds: SessionSeedSet, recorder, crypto_only: bool
) -> tuple[ClientOutcome, ServerOutcome, DealerOutcome]:
    transport = config.transport
    server_inbox: asyncio.Queue = asyncio.Queue()
    dealer_inbox: asyncio.Queue = asyncio.Queue()
    opened: list[Channel] = []

    async def accept_server(reader, writer):
        await server_inbox.put((reader, writer))

    async def accept_dealer(reader, writer):
        await dealer_inbox.put((reader, writer))

    try:
        server_listener = await asyncio.start_server(
            accept_server, transport.host, transport.port, limit=STREAM_LIMIT
        )
        dealer_listener = await asyncio.start_server(
            accept_dealer, transport.host, transport.dealer_port, limit=STREAM_LIMIT
        )
    except OSError as e:
        raise ProtocolError(f"cannot listen on {transport.host}: {e}") from None
    server_port = server_listener.sockets[0].getsockname()[1]
    dealer_port = dealer_listener.sockets[0].getsockname()[1]
    logger.debug(f"server listening on {server_port}, dealer on {dealer_port}")

    def meter(channel: Channel) -> Channel:
        opened.append(channel)
        return MeteredChannel(channel, recorder)

    async def client_task() -> ClientOutcome:
        to_server = await open_stream_channel("client", "server", transport.host, server_port)
        to_dealer = await open_stream_channel("client", "dealer", transport.host, dealer_port)
        return await run_client(x, meter(to_server), meter(to_dealer), config, seeds, crypto_only)

    async def server_task() -> ServerOutcome:
        to_dealer = await open_stream_channel("server", "dealer", transport.host, dealer_port)
        reader, writer = await server_inbox.get()
        to_client = StreamChannel("server", "client", reader, writer)
        return await run_server(model, meter(to_client), meter(to_dealer), config, crypto_only)

    async def dealer_task() -> DealerOutcome:
        links = []
        for _ in range(2):
            reader, writer = await dealer_inbox.get()
            link = StreamChannel("dealer", "peer", reader, writer)
            opened.append(link)
            links.append(link)
        return await run_dealer(links, seeds.dealer, config.dealer_slot_limit, wrap=meter)

    try:
        return await _drive([client_task(), server_task(), dealer_task()], settings.PROTOCOL_TIMEOUT_S)
    finally:
        for channel in opened:
            await channel.close()
        for listener in (server_listener, dealer_listener):
            listener.close()
            await listener.wait_closed()


async def _run(model: TrainedModel, x: np.ndarray, config: SessionConfig, crypto_only: bool):
    _check_config(model, x, config)
    seeds = resolve_session_seeds(config.seeds)
    recorder = TranscriptRecorder()
    runner = _tcp if config.transport.kind == "tcp" else _in_proc
    logger.info(
        f"🚀 PI session: model={model.spec.name}, boundary={config.boundary}, "
        f"lambda={config.noise_lambda}, transport={config.transport.kind}, batch={x.shape[0]}"
    )
    try:
        client, server, dealer = await runner(model, x, config, seeds, recorder, crypto_only)
    except C2PIError as exc:
        logger.error(f"❌ PI session aborted: {exc.detail}")
        raise
    provenance = {"config_hash": config_hash(config), "boundary": config.boundary.render()}
    return client, server, dealer, recorder.finalize(provenance)


def run_session(model: TrainedModel, x: np.ndarray, config: SessionConfig) -> SessionResult:
    """
    클라이언트 입력 x 로 전체 세션(setup → crypto → reveal → clear)을 실행합니다.
    어떤 단계의 중단이든 phase 태그를 가진 ProtocolAbort 로 전달됩니다.
    """
    client, server, dealer, transcript = asyncio.run(_run(model, np.asarray(x, dtype=np.float64), config, False))
    return SessionResult(
        output=client.result,
        transcript=transcript,
        server_activation=server.activation,
        client_share=ShareTensor(client.boundary_share, PartyRole.CLIENT),
        server_share=ShareTensor(server.boundary_share, PartyRole.SERVER),
        dealer_slots=dealer.slots_used,
    )


def run_crypto_layers(
    model: TrainedModel, x: np.ndarray, config: SessionConfig
) -> tuple[ShareTensor, ShareTensor, Transcript]:
    """crypto prefix 만 실행하고 boundary 의 두 share 를 돌려줍니다 (reveal/clear 없음)."""
    client, server, _, transcript = asyncio.run(_run(model, np.asarray(x, dtype=np.float64), config, True))
    return (
        ShareTensor(client.boundary_share, PartyRole.CLIENT),
        ShareTensor(server.boundary_share, PartyRole.SERVER),
        transcript,
    )
