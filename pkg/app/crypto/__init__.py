# app/crypto/__init__.py
# 고정소수점 비밀 분산 (신뢰 딜러 시뮬레이션)

from .beaver import beaver_mul, relu_shares
from .circuit import evaluate_layers, fixed_forward
from .dealer import BeaverTriple, TripleShape, TripleStore, TrustedDealer, dealer_gen
from .fixed_point import decode, encode
from .sharing import PartyRole, ShareTensor, reconstruct, share

__all__ = [
    "encode",
    "decode",
    "share",
    "reconstruct",
    "ShareTensor",
    "PartyRole",
    "BeaverTriple",
    "TripleShape",
    "TripleStore",
    "TrustedDealer",
    "dealer_gen",
    "beaver_mul",
    "relu_shares",
    "evaluate_layers",
    "fixed_forward",
]
