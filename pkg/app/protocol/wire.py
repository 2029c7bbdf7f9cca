# app/protocol/wire.py
# 길이 접두 바이너리 프레이밍: magic "C2PI" | version u8 | type u8 | length u64-LE | payload

import enum
import json
import struct
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from app.core.config import settings
from app.core.exceptions import ProtocolError
from app.core.provenance import canonical_json

MAGIC = b"C2PI"
VERSION = 1
HEADER = struct.Struct("<4sBBQ")
HEADER_SIZE = HEADER.size  # 14

_RANK = struct.Struct("<I")
_WIRE_DTYPES = {
    np.dtype(np.uint64): "<u8",
    np.dtype(np.int64): "<i8",
    np.dtype(np.float64): "<f8",
}


class MsgType(enum.IntEnum):
    HELLO = 0x01
    CRYPTO_ARCH_META = 0x02
    INPUT_SHARE = 0x03
    MUL_EXCHANGE = 0x04
    RELU_EXCHANGE = 0x05
    TRIPLE_ISSUE = 0x06
    NOISED_REVEAL = 0x07
    RESULT = 0x08
    TRIPLE_REQUEST = 0x09
    TRUNC_EXCHANGE = 0x0A
    ABORT = 0x0F


@dataclass(frozen=True)
class Message:
    msg_type: MsgType
    payload: bytes = b""
    # 송신 측 계량용 (텐서 원소 수, shape 기술자 바이트)
    elements: int = field(default=0, compare=False)
    descriptor_bytes: int = field(default=0, compare=False)

    def encode(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, int(self.msg_type), len(self.payload)) + self.payload

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.payload)


def decode_header(data: bytes, max_payload: int | None = None) -> tuple[MsgType, int]:
    if len(data) != HEADER_SIZE:
        raise ProtocolError(f"header must be {HEADER_SIZE} bytes, got {len(data)}")
    magic, version, raw_type, length = HEADER.unpack(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"version mismatch: peer speaks {version}, expected {VERSION}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise ProtocolError(f"unknown msg_type 0x{raw_type:02X}") from None
    limit = settings.MAX_PAYLOAD_BYTES if max_payload is None else max_payload
    if length > limit:
        raise ProtocolError(f"payload of {length} bytes exceeds the {limit}-byte limit")
    return msg_type, length


def decode_message(data: bytes) -> Message:
    msg_type, length = decode_header(data[:HEADER_SIZE])
    payload = data[HEADER_SIZE:]
    if len(payload) != length:
        raise ProtocolError(f"length field says {length} bytes, payload has {len(payload)}")
    return Message(msg_type, payload)


# --- 텐서 코덱: (u32 rank, u32 dims…) + 원소 8바이트 LE, 텐서들을 이어붙임 ---

def encode_tensors(arrays: Sequence[np.ndarray]) -> bytes:
    parts: list[bytes] = []
    for array in arrays:
        array = np.asarray(array)
        wire_dtype = _WIRE_DTYPES.get(array.dtype)
        if wire_dtype is None:
            raise ProtocolError(f"cannot serialize dtype {array.dtype}")
        parts.append(_RANK.pack(array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=wire_dtype).tobytes())
    return b"".join(parts)


def decode_tensors(payload: bytes, dtype=np.uint64) -> list[np.ndarray]:
    wire_dtype = _WIRE_DTYPES[np.dtype(dtype)]
    arrays: list[np.ndarray] = []
    offset = 0
    while offset < len(payload):
        if offset + 4 > len(payload):
            raise ProtocolError(f"truncated tensor descriptor at offset {offset}")
        (rank,) = _RANK.unpack_from(payload, offset)
        offset += 4
        if offset + 4 * rank > len(payload):
            raise ProtocolError(f"truncated tensor shape at offset {offset}")
        shape = struct.unpack_from(f"<{rank}I", payload, offset)
        offset += 4 * rank
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(payload):
            raise ProtocolError(f"tensor needs {8 * count} bytes at offset {offset}, payload ends at {len(payload)}")
        arrays.append(np.frombuffer(payload, dtype=wire_dtype, count=count, offset=offset).astype(dtype).reshape(shape))
        offset = end
    return arrays


def tensor_stats(arrays: Sequence[np.ndarray]) -> tuple[int, int]:
    """(원소 수, shape 기술자 바이트 수)."""
    elements = sum(int(np.asarray(a).size) for a in arrays)
    descriptors = sum(4 + 4 * np.asarray(a).ndim for a in arrays)
    return elements, descriptors


def tensor_message(msg_type: MsgType, *arrays: np.ndarray) -> Message:
    elements, descriptors = tensor_stats(arrays)
    return Message(msg_type, encode_tensors(arrays), elements, descriptors)


def json_message(msg_type: MsgType, body: dict[str, Any]) -> Message:
    return Message(msg_type, canonical_json(body).encode("utf-8"))


def decode_json(message: Message) -> dict[str, Any]:
    try:
        return json.loads(message.payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed JSON payload in {message.msg_type.name}: {e}") from None
