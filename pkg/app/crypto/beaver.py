# app/crypto/beaver.py
# 메모리 안에서 두 파티를 함께 시뮬레이션하는 Beaver 곱과 ReLU.
# 실제 메시지 교환 버전은 app/protocol/party.py 에 있습니다.

import numpy as np

from app.core.exceptions import ProtocolAbort, ShapeMismatchError
from app.crypto.dealer import BeaverTriple, TrustedDealer
from app.crypto.fixed_point import DEFAULT_FIXED
from app.crypto.ring_ops import MUL
from app.crypto.sharing import PartyRole, ShareTensor, random_ring
from app.schemas.session import FixedCfg

SharePair = tuple[ShareTensor, ShareTensor]


def _pair(client: np.ndarray, server: np.ndarray) -> SharePair:
    return ShareTensor(client, PartyRole.CLIENT), ShareTensor(server, PartyRole.SERVER)


def combine_masked_products(
    e: np.ndarray, f: np.ndarray, triple: BeaverTriple
) -> tuple[np.ndarray, np.ndarray]:
    """
    공개된 e = x − a, f = y − b 로부터 op(x, y) 의 share 를 만듭니다.
    서버가 op(e, f) 항을 더합니다.
    """
    op = triple.op
    client = op(e, triple.b_client) + op(triple.a_client, f) + triple.c_client
    server = op(e, f) + op(e, triple.b_server) + op(triple.a_server, f) + triple.c_server
    return client, server


def beaver_mul(
    xs: SharePair,
    ys: SharePair,
    triple: BeaverTriple,
    cfg: FixedCfg = DEFAULT_FIXED,
    dealer: TrustedDealer | None = None,
    truncate_result: bool = True,
    pair_seed: int = 0,
) -> SharePair:
    """
    한 라운드 Beaver 곱. 두 파티가 (x − a), (y − b) 를 서로 공개한 뒤 지역적으로 결합합니다.
    truncate_result 이면 딜러의 결정적 절단으로 스케일을 f 비트로 되돌립니다.
    """
    x_client, x_server = xs
    y_client, y_server = ys
    if x_client.shape != x_server.shape:
        raise ShapeMismatchError("beaver_mul x shares", x_client.shape, x_server.shape)
    if y_client.shape != y_server.shape:
        raise ShapeMismatchError("beaver_mul y shares", y_client.shape, y_server.shape)
    triple.op.output_shape(x_client.shape, y_client.shape)
    if truncate_result and dealer is None:
        raise ProtocolAbort("crypto", "dealer unavailable for truncation", round_index=0)
    triple.consume()

    e = (x_client.values - triple.a_client) + (x_server.values - triple.a_server)
    f = (y_client.values - triple.b_client) + (y_server.values - triple.b_server)
    z_client, z_server = combine_masked_products(e, f, triple)

    if truncate_result:
        mask = random_ring(np.random.default_rng(pair_seed), z_client.shape)
        z_client, z_server = dealer.truncate(z_client + mask, z_server - mask, layer="beaver_mul")
    return _pair(z_client, z_server)


def relu_shares(
    xs: SharePair,
    dealer: TrustedDealer | None,
    cfg: FixedCfg = DEFAULT_FIXED,
    pair_seed: int = 0,
) -> SharePair:
    """
    딜러 보조 ReLU. 두 파티가 일회용 마스크를 씌운 share 를 딜러에게 보내 [x > 0] 의 share 를 받고,
    triple 하나로 bit · x 를 계산합니다 (절단 없음, 고정소수점 격자에서 정확).
    """
    if dealer is None:
        raise ProtocolAbort("crypto", "dealer unavailable for relu", round_index=0)
    x_client, x_server = xs
    mask = random_ring(np.random.default_rng(pair_seed), x_client.shape)
    bit_client, bit_server = dealer.sign(x_client.values + mask, x_server.values - mask, layer="relu")
    triple = dealer.triple(MUL, x_client.shape, x_client.shape, layer="relu")
    return beaver_mul(_pair(bit_client, bit_server), xs, triple, cfg, truncate_result=False)
