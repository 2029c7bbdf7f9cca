# app/protocol/party.py
# 메시지를 주고받으며 원시 연산(곱, 절단, 부호 비트)을 수행하는 세 엔드포인트의 런타임.
# 세 런타임은 같은 레이어 순회를 같은 순서로 실행하므로 라운드 번호가 항상 일치합니다.

import logging

import numpy as np

from app.core.exceptions import C2PIError, ProtocolAbort, ProtocolError
from app.crypto.circuit import CircuitRuntime, RingConstants, Shape
from app.crypto.dealer import TrustedDealer
from app.crypto.ring_ops import BilinearOp
from app.crypto.sharing import random_ring
from app.protocol.channel import Channel
from app.protocol.wire import Message, MsgType, decode_json, decode_tensors, tensor_message
from app.schemas.session import FixedCfg

logger = logging.getLogger(__name__)

PRODUCT_ROUNDS = 2
HELPER_ROUNDS = 2


async def expect(channel: Channel, msg_type: MsgType, phase: str, round_index: int | None = None) -> Message:
    """다음 메시지를 받아 종류를 확인합니다. Abort 를 받으면 원격 중단으로 올립니다."""
    message = await channel.recv()
    if message.msg_type == MsgType.ABORT:
        body = decode_json(message)
        raise ProtocolAbort(
            body.get("phase", phase),
            f"{channel.remote} aborted: {body.get('reason', 'unknown')}",
            body.get("round"),
            remote=True,
        )
    if message.msg_type != msg_type:
        raise ProtocolError(
            f"{channel.local} expected {msg_type.name} from {channel.remote} in {phase} round {round_index}, "
            f"got {message.msg_type.name}"
        )
    return message


async def expect_tensors(
    channel: Channel, msg_type: MsgType, phase: str, round_index: int | None = None, count: int | None = None
) -> list[np.ndarray]:
    arrays = decode_tensors((await expect(channel, msg_type, phase, round_index)).payload)
    if count is not None and len(arrays) != count:
        raise ProtocolError(f"{msg_type.name} from {channel.remote} carried {len(arrays)} tensors, expected {count}")
    return arrays


class ProtocolRuntime(CircuitRuntime):
    """라운드 카운터를 가진 런타임. crypto 페이즈 메시지에 라운드 번호를 찍습니다."""

    phase = "crypto"

    def __init__(self, param_shapes: dict[str, Shape], cfg: FixedCfg, constants: RingConstants | None = None):
        super().__init__(param_shapes, cfg, constants)
        self.round = 0
        self.current_layer = "-"

    def _advance(self, rounds: int) -> int:
        start = self.round
        self.round += rounds
        return start


class ClientRuntime(ProtocolRuntime):
    """
    클라이언트. 모든 공개값을 마스크 스트림의 새 패드로 보내고,
    자신의 triple share (a_c = x_c − p_x, b_c = y_c − p_y) 를 딜러에게 보내 완성을 요청합니다.
    """

    def __init__(self, param_shapes, cfg, server: Channel, dealer: Channel, mask_seed: int, pair_seed: int):
        super().__init__(param_shapes, cfg)
        self.server = server
        self.dealer = dealer
        self.mask_rng = np.random.default_rng(mask_seed)
        self.pair_rng = np.random.default_rng(pair_seed)

    async def product(self, x: np.ndarray, y: np.ndarray, op: BilinearOp, label: str) -> np.ndarray:
        self.current_layer = label
        r0 = self._advance(PRODUCT_ROUNDS)
        pad_x = random_ring(self.mask_rng, x.shape)
        pad_y = random_ring(self.mask_rng, y.shape)
        a_client, b_client = x - pad_x, y - pad_y
        # 패드는 c 와 무관하므로 요청과 공개값 교환이 같은 라운드에 나갑니다.
        await self.dealer.send(tensor_message(MsgType.TRIPLE_REQUEST, a_client, b_client), self.phase, r0)
        await self.server.send(tensor_message(MsgType.MUL_EXCHANGE, pad_x, pad_y), self.phase, r0)
        e_server, f_server = await expect_tensors(self.server, MsgType.MUL_EXCHANGE, self.phase, r0, count=2)
        (c_client,) = await expect_tensors(self.dealer, MsgType.TRIPLE_ISSUE, self.phase, r0 + 1, count=1)
        e, f = pad_x + e_server, pad_y + f_server
        return op(e, b_client) + op(a_client, f) + c_client

    async def _helper(self, msg_type: MsgType, value: np.ndarray, label: str) -> np.ndarray:
        self.current_layer = label
        h0 = self._advance(HELPER_ROUNDS)
        mask = random_ring(self.pair_rng, value.shape)
        await self.dealer.send(tensor_message(msg_type, value + mask), self.phase, h0)
        (fresh,) = await expect_tensors(self.dealer, msg_type, self.phase, h0 + 1, count=1)
        return fresh

    async def truncate(self, z: np.ndarray, label: str) -> np.ndarray:
        return await self._helper(MsgType.TRUNC_EXCHANGE, z, label)

    async def sign(self, x: np.ndarray, label: str) -> np.ndarray:
        return await self._helper(MsgType.RELU_EXCHANGE, x, label)


class ServerRuntime(ProtocolRuntime):
    """서버. 인코딩된 가중치와 bias 를 가지며, 딜러가 미리 보낸 triple share 로 공개값을 만듭니다."""

    def __init__(self, param_shapes, cfg, constants: RingConstants, client: Channel, dealer: Channel, pair_seed: int):
        super().__init__(param_shapes, cfg, constants)
        self.client = client
        self.dealer = dealer
        self.pair_rng = np.random.default_rng(pair_seed)

    async def product(self, x: np.ndarray, y: np.ndarray, op: BilinearOp, label: str) -> np.ndarray:
        self.current_layer = label
        r0 = self._advance(PRODUCT_ROUNDS)
        a_server, b_server, c_server = await expect_tensors(
            self.dealer, MsgType.TRIPLE_ISSUE, self.phase, r0, count=3
        )
        await self.client.send(
            tensor_message(MsgType.MUL_EXCHANGE, x - a_server, y - b_server), self.phase, r0
        )
        pad_x, pad_y = await expect_tensors(self.client, MsgType.MUL_EXCHANGE, self.phase, r0, count=2)
        e, f = pad_x + (x - a_server), pad_y + (y - b_server)
        return op(e, f) + op(e, b_server) + op(a_server, f) + c_server

    async def _helper(self, msg_type: MsgType, value: np.ndarray, label: str) -> np.ndarray:
        self.current_layer = label
        h0 = self._advance(HELPER_ROUNDS)
        mask = random_ring(self.pair_rng, value.shape)
        await self.dealer.send(tensor_message(msg_type, value - mask), self.phase, h0)
        (fresh,) = await expect_tensors(self.dealer, msg_type, self.phase, h0 + 1, count=1)
        return fresh

    async def truncate(self, z: np.ndarray, label: str) -> np.ndarray:
        return await self._helper(MsgType.TRUNC_EXCHANGE, z, label)

    async def sign(self, x: np.ndarray, label: str) -> np.ndarray:
        return await self._helper(MsgType.RELU_EXCHANGE, x, label)


class DealerRuntime(ProtocolRuntime):
    """
    딜러. 값 대신 모양만 따라가며 (0 배열) 상관값을 발급합니다.
    곱셈마다 서버 몫을 먼저 보내고, 클라이언트 요청으로 triple 을 완성합니다.
    """

    def __init__(self, param_shapes, cfg, client: Channel, server: Channel, dealer: TrustedDealer):
        super().__init__(param_shapes, cfg)
        self.client = client
        self.server = server
        self.store = dealer

    async def product(self, x: np.ndarray, y: np.ndarray, op: BilinearOp, label: str) -> np.ndarray:
        self.current_layer = label
        r0 = self._advance(PRODUCT_ROUNDS)
        pending = self.store.issue_server(op, x.shape, y.shape, layer=label)
        await self.server.send(
            tensor_message(MsgType.TRIPLE_ISSUE, pending.a_server, pending.b_server, pending.c_server),
            self.phase,
            r0,
        )
        a_client, b_client = await expect_tensors(self.client, MsgType.TRIPLE_REQUEST, self.phase, r0, count=2)
        if a_client.shape != x.shape or b_client.shape != y.shape:
            raise ProtocolError(f"triple request shapes {a_client.shape}, {b_client.shape} do not match the plan")
        c_client = self.store.complete(pending, a_client, b_client)
        await self.client.send(tensor_message(MsgType.TRIPLE_ISSUE, c_client), self.phase, r0 + 1)
        return np.zeros(pending.c_server.shape, dtype=x.dtype)

    async def _helper(self, msg_type: MsgType, value: np.ndarray, label: str) -> tuple[int, np.ndarray, np.ndarray]:
        self.current_layer = label
        h0 = self._advance(HELPER_ROUNDS)
        (masked_client,) = await expect_tensors(self.client, msg_type, self.phase, h0, count=1)
        (masked_server,) = await expect_tensors(self.server, msg_type, self.phase, h0, count=1)
        if masked_client.shape != value.shape or masked_server.shape != value.shape:
            raise ProtocolError(f"{msg_type.name} shapes do not match the plan at {label}")
        return h0, masked_client, masked_server

    async def _reply(self, msg_type: MsgType, h0: int, client: np.ndarray, server: np.ndarray) -> None:
        await self.client.send(tensor_message(msg_type, client), self.phase, h0 + 1)
        await self.server.send(tensor_message(msg_type, server), self.phase, h0 + 1)

    async def truncate(self, z: np.ndarray, label: str) -> np.ndarray:
        h0, masked_client, masked_server = await self._helper(MsgType.TRUNC_EXCHANGE, z, label)
        await self._reply(MsgType.TRUNC_EXCHANGE, h0, *self.store.truncate(masked_client, masked_server, label))
        return z

    async def sign(self, x: np.ndarray, label: str) -> np.ndarray:
        h0, masked_client, masked_server = await self._helper(MsgType.RELU_EXCHANGE, x, label)
        await self._reply(MsgType.RELU_EXCHANGE, h0, *self.store.sign(masked_client, masked_server, label))
        return x


def as_abort(exc: C2PIError, phase: str, runtime: ProtocolRuntime | None) -> ProtocolAbort:
    """엔드포인트 안의 오류를 phase 태그와 라운드를 가진 ProtocolAbort 로 바꿉니다."""
    if isinstance(exc, ProtocolAbort):
        return exc
    round_index = runtime.round if runtime is not None else None
    layer = f" at layer {runtime.current_layer}" if runtime is not None and phase == "crypto" else ""
    return ProtocolAbort(phase, f"{exc.detail}{layer}", round_index)
