import asyncio
import struct

import numpy as np
import pytest

from app.core.exceptions import ProtocolError
from app.protocol.channel import queue_pair
from app.protocol.wire import (
    HEADER,
    HEADER_SIZE,
    MAGIC,
    Message,
    MsgType,
    decode_header,
    decode_json,
    decode_message,
    decode_tensors,
    json_message,
    tensor_message,
)


class TestHeader:
    def test_layout(self):
        data = Message(MsgType.MUL_EXCHANGE, b"abc").encode()
        assert HEADER_SIZE == 14
        assert data[:4] == b"C2PI"
        assert data[4] == 1 and data[5] == 0x04
        assert struct.unpack("<Q", data[6:14])[0] == 3

    def test_bad_magic(self):
        with pytest.raises(ProtocolError, match="magic"):
            decode_header(HEADER.pack(b"XXXX", 1, 0x01, 0))

    def test_version_mismatch(self):
        with pytest.raises(ProtocolError, match="version"):
            decode_header(HEADER.pack(MAGIC, 2, 0x01, 0))

    def test_unknown_type(self):
        with pytest.raises(ProtocolError, match="0x0E"):
            decode_header(HEADER.pack(MAGIC, 1, 0x0E, 0))

    def test_oversized_payload(self):
        with pytest.raises(ProtocolError, match="limit"):
            decode_header(HEADER.pack(MAGIC, 1, 0x01, 1024), max_payload=512)

    def test_length_disagrees_with_payload(self):
        data = HEADER.pack(MAGIC, 1, 0x08, 10) + b"short"
        with pytest.raises(ProtocolError):
            decode_message(data)


class TestTensorCodec:
    def test_payload_size_formula(self):
        a = np.arange(6, dtype=np.uint64).reshape(2, 3)
        b = np.arange(4, dtype=np.uint64)
        message = tensor_message(MsgType.TRIPLE_ISSUE, a, b)
        # 텐서마다 rank(4) + dims(4·rank) + 원소 8바이트
        assert len(message.payload) == (4 + 8 + 48) + (4 + 4 + 32)
        assert message.elements == 10
        assert message.descriptor_bytes == 12 + 8
        assert message.size == HEADER_SIZE + len(message.payload)

    def test_decode(self):
        a = np.array([[1, 2**64 - 1]], dtype=np.uint64)
        decoded = decode_tensors(tensor_message(MsgType.INPUT_SHARE, a).payload)
        np.testing.assert_array_equal(decoded[0], a)

    def test_truncated_payload(self):
        payload = tensor_message(MsgType.INPUT_SHARE, np.zeros(4, dtype=np.uint64)).payload
        with pytest.raises(ProtocolError):
            decode_tensors(payload[:-3])

    def test_unsupported_dtype(self):
        with pytest.raises(ProtocolError):
            tensor_message(MsgType.INPUT_SHARE, np.zeros(2, dtype=np.float32))

    def test_json_body(self):
        message = json_message(MsgType.HELLO, {"role": "client", "version": 1})
        assert decode_json(message) == {"role": "client", "version": 1}


def test_queue_channel_delivers_in_order():
    async def run():
        a, b = queue_pair("client", "server")
        await a.send(Message(MsgType.HELLO, b"1"))
        await a.send(Message(MsgType.RESULT, b"2"))
        first, second = await b.recv(), await b.recv()
        return first, second

    first, second = asyncio.run(run())
    assert (first.msg_type, first.payload) == (MsgType.HELLO, b"1")
    assert (second.msg_type, second.payload) == (MsgType.RESULT, b"2")
