# app/protocol/endpoints.py
# 세션의 세 엔드포인트 (client, server, dealer). 각자 메시지를 엄격히 순서대로 처리합니다.

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from app.core.exceptions import C2PIError, ProtocolAbort, ProtocolError, ShapeMismatchError
from app.crypto.circuit import encode_constants, evaluate_layers
from app.crypto.dealer import TrustedDealer
from app.crypto.fixed_point import RING_DTYPE, decode, encode
from app.crypto.sharing import random_ring
from app.models.network import TrainedModel, prefix_cut
from app.protocol.channel import Channel
from app.protocol.party import ClientRuntime, DealerRuntime, ServerRuntime, as_abort, expect, expect_tensors
from app.protocol.wire import VERSION, MsgType, decode_json, decode_tensors, json_message, tensor_message
from app.schemas.eval_point import EvalPoint
from app.schemas.model_spec import CryptoArch
from app.schemas.session import FixedCfg, SessionConfig
from app.schemas.transcript import PHASES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SessionSeedSet:
    mask: int
    pair: int
    dealer: int
    noise: int


@dataclass(frozen=True, eq=False)
class ClientOutcome:
    result: np.ndarray | None
    boundary_share: np.ndarray


@dataclass(frozen=True, eq=False)
class ServerOutcome:
    boundary_share: np.ndarray
    activation: np.ndarray | None = None
    logits: np.ndarray | None = None


@dataclass(frozen=True)
class DealerOutcome:
    slots_used: int


def reveal_with_noise(
    client_share: np.ndarray, noise_lambda: float, rng: np.random.Generator, cfg: FixedCfg
) -> np.ndarray:
    """클라이언트 share 에 균등 [−λ, +λ] 노이즈(고정소수점 양자화)를 더한 공개용 share."""
    if noise_lambda > 0:
        noise = rng.uniform(-noise_lambda, noise_lambda, size=client_share.shape)
    else:
        noise = np.zeros(client_share.shape)
    return client_share + encode(noise, cfg)


def combine_reveal(server_share: np.ndarray, noised_client_share: np.ndarray, cfg: FixedCfg) -> np.ndarray:
    if server_share.shape != noised_client_share.shape:
        raise ShapeMismatchError("noised reveal", server_share.shape, noised_client_share.shape)
    return decode(server_share + noised_client_share, cfg)


def run_clear_layers(model: TrainedModel, activation: np.ndarray, boundary: EvalPoint) -> np.ndarray:
    """서버가 단독으로 boundary 이후 레이어를 평문 실행합니다."""
    return model.forward_suffix(activation, boundary)


def _abort_body(abort: ProtocolAbort) -> dict:
    return {"phase": abort.phase, "reason": abort.reason, "round": abort.round_index}


async def send_abort(channels: Sequence[Channel], abort: ProtocolAbort) -> None:
    phase = abort.phase if abort.phase in PHASES else "crypto"
    for channel in channels:
        try:
            await channel.send(json_message(MsgType.ABORT, _abort_body(abort)), phase, abort.round_index or 0)
        except C2PIError:
            logger.debug(f"abort to {channel.remote} could not be delivered")


async def run_client(
    x: np.ndarray,
    server: Channel,
    dealer: Channel,
    config: SessionConfig,
    seeds: SessionSeedSet,
    crypto_only: bool = False,
) -> ClientOutcome:
    phase, runtime = "setup", None
    try:
        await server.send(
            json_message(
                MsgType.HELLO,
                {"role": "client", "version": VERSION, "batch": int(x.shape[0]), "pair_seed": seeds.pair},
            ),
            phase,
        )
        await dealer.send(json_message(MsgType.HELLO, {"role": "client", "version": VERSION}), phase)
        arch = CryptoArch.model_validate(decode_json(await expect(server, MsgType.CRYPTO_ARCH_META, phase)))
        await expect(dealer, MsgType.HELLO, phase)
        if x.shape[1:] != tuple(arch.input_shape):
            raise ShapeMismatchError("client input", ("N", *arch.input_shape), x.shape)
        cfg = FixedCfg(frac_bits=arch.frac_bits)

        phase = "crypto"
        runtime = ClientRuntime(arch.parameter_shapes(), cfg, server, dealer, seeds.mask, seeds.pair)
        pad = random_ring(runtime.mask_rng, x.shape)
        await server.send(tensor_message(MsgType.INPUT_SHARE, pad), phase, runtime._advance(1))
        share = await evaluate_layers(arch.layers, encode(x, cfg) - pad, runtime)
        if crypto_only:
            return ClientOutcome(None, share)

        phase = "reveal"
        noised = reveal_with_noise(share, config.noise_lambda, np.random.default_rng(seeds.noise), cfg)
        await server.send(tensor_message(MsgType.NOISED_REVEAL, noised), phase, runtime.round)

        phase = "clear"
        message = await expect(server, MsgType.RESULT, phase)
        dtype = np.float64 if config.reveal_result == "logits" else np.int64
        (result,) = decode_tensors(message.payload, dtype)
        return ClientOutcome(result, share)
    except C2PIError as exc:
        abort = as_abort(exc, phase, runtime)
        if not abort.remote:
            await send_abort([server, dealer], abort)
        raise abort from exc


async def run_server(
    model: TrainedModel,
    client: Channel,
    dealer: Channel,
    config: SessionConfig,
    crypto_only: bool = False,
) -> ServerOutcome:
    phase, runtime = "setup", None
    try:
        hello = decode_json(await expect(client, MsgType.HELLO, phase))
        if hello.get("version") != VERSION:
            raise ProtocolError(f"client speaks version {hello.get('version')}, expected {VERSION}")
        cut = prefix_cut(model.spec, config.boundary)
        cfg = config.fixed
        arch = CryptoArch(
            layers=model.spec.layers[:cut],
            input_shape=model.spec.input_shape,
            boundary=config.boundary.render(),
            frac_bits=cfg.frac_bits,
            batch=int(hello["batch"]),
        )
        meta = arch.model_dump(mode="json")
        await dealer.send(json_message(MsgType.HELLO, {"role": "server", "version": VERSION}), phase)
        await dealer.send(json_message(MsgType.CRYPTO_ARCH_META, meta), phase)
        await client.send(json_message(MsgType.CRYPTO_ARCH_META, meta), phase)
        await expect(dealer, MsgType.HELLO, phase)

        phase = "crypto"
        shapes = arch.parameter_shapes()
        constants = encode_constants({name: model.weights[name] for name in shapes}, cfg)
        runtime = ServerRuntime(shapes, cfg, constants, client, dealer, int(hello["pair_seed"]))
        (share,) = await expect_tensors(client, MsgType.INPUT_SHARE, phase, runtime._advance(1), count=1)
        if share.shape != (arch.batch, *arch.input_shape):
            raise ShapeMismatchError("input share", (arch.batch, *arch.input_shape), share.shape)
        share = await evaluate_layers(arch.layers, share, runtime)
        if crypto_only:
            return ServerOutcome(share)

        phase = "reveal"
        (noised,) = await expect_tensors(client, MsgType.NOISED_REVEAL, phase, runtime.round, count=1)
        activation = combine_reveal(share, noised, cfg)

        phase = "clear"
        logits = run_clear_layers(model, activation, config.boundary)
        result = logits if config.reveal_result == "logits" else np.argmax(logits, axis=1).astype(np.int64)
        await client.send(tensor_message(MsgType.RESULT, result), phase, runtime.round + 1)
        return ServerOutcome(share, activation, logits)
    except C2PIError as exc:
        abort = as_abort(exc, phase, runtime)
        if not abort.remote:
            await send_abort([client, dealer], abort)
        raise abort from exc


async def run_dealer(
    links: Sequence[Channel],
    seed: int,
    slot_limit: int | None = None,
    wrap: Callable[[Channel], Channel] = lambda channel: channel,
) -> DealerOutcome:
    """
    links 는 역할을 모르는 두 연결입니다. 각 링크의 첫 Hello 로 client/server 를 구분합니다.
    """
    phase, runtime = "setup", None
    roles: dict[str, Channel] = {}
    try:
        for link in links:
            body = decode_json(await expect(link, MsgType.HELLO, phase))
            role = body.get("role")
            if role not in ("client", "server") or role in roles or body.get("version") != VERSION:
                raise ProtocolError(f"unexpected dealer peer hello: {body}")
            link.remote = role
            roles[role] = wrap(link)
        client, server = roles["client"], roles["server"]
        arch = CryptoArch.model_validate(decode_json(await expect(server, MsgType.CRYPTO_ARCH_META, phase)))
        for peer in (client, server):
            await peer.send(json_message(MsgType.HELLO, {"role": "dealer", "version": VERSION}), phase)

        phase = "crypto"
        cfg = FixedCfg(frac_bits=arch.frac_bits)
        store = TrustedDealer(seed, cfg, slot_limit)
        runtime = DealerRuntime(arch.parameter_shapes(), cfg, client, server, store)
        runtime._advance(1)
        placeholder = np.zeros((arch.batch, *arch.input_shape), dtype=RING_DTYPE)
        await evaluate_layers(arch.layers, placeholder, runtime)
        logger.debug(f"dealer issued {store.slots_used} correlations")
        return DealerOutcome(store.slots_used)
    except C2PIError as exc:
        abort = as_abort(exc, phase, runtime)
        if not abort.remote:
            await send_abort(list(roles.values()) or list(links), abort)
        raise abort from exc
