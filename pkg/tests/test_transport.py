import asyncio
import unittest

import numpy as np

from splitbench.errors import ChannelError, CodecError, ProtocolError
from splitbench.lib.transport import (
    HEADER_SIZE,
    Frame,
    FrameType,
    accept_clients,
    counter_snapshot,
    decode_tensor,
    decode_tensors,
    encode_tensor,
    encode_tensors,
    encoded_size,
    expect,
    make_loopback,
    parse_addr,
    read_hello,
    recv_frame,
    send_frame,
    send_hello,
    tcp_connect,
    tcp_listen,
)
from splitbench.lib.transport.frames import HEADER, encode_frame, parse_header

from .helpers import run


async def tcp_pair():
    listener = await tcp_listen("127.0.0.1:0")
    try:
        client = await tcp_connect(f"127.0.0.1:{listener.port}")
        server = await listener.accept(timeout=5)
    finally:
        await listener.close()
    return server, client


async def exchange(a, b):
    """A fixed conversation; returns both endpoints' counter snapshots."""
    await send_frame(a, Frame(FrameType.MODEL_DOWN, encode_tensor(np.arange(6, dtype=np.float32))))
    await recv_frame(b)
    await send_frame(b, Frame(FrameType.ROUND_DONE))
    await recv_frame(a)
    await send_frame(b, Frame(FrameType.ACTIVATIONS, encode_tensors(np.ones((2, 3)), np.zeros(2))))
    frame = await recv_frame(a)
    return counter_snapshot(a), counter_snapshot(b), frame


class TestCodec(unittest.TestCase):

    def test_layout(self):
        data = encode_tensor(np.array([[1.5, -2.0, 3.0]], dtype=np.float32))
        self.assertEqual(len(data), encoded_size((1, 3)))
        self.assertEqual(encoded_size((1, 3)), 4 + 8 + 12)
        self.assertEqual(data[:4], b"\x02\x00\x00\x00")
        self.assertEqual(data[4:12], b"\x01\x00\x00\x00\x03\x00\x00\x00")
        np.testing.assert_array_equal(decode_tensor(data), [[1.5, -2.0, 3.0]])

    def test_float64_is_sent_as_float32(self):
        decoded = decode_tensor(encode_tensor(np.array([0.1, 0.2])))
        self.assertEqual(decoded.dtype, np.float32)
        np.testing.assert_array_equal(decoded, np.array([0.1, 0.2], dtype=np.float32))

    def test_several_tensors(self):
        acts, labels = decode_tensors(encode_tensors(np.ones((2, 4, 5)), np.array([1, 0])), 2)
        self.assertEqual(acts.shape, (2, 4, 5))
        np.testing.assert_array_equal(labels, [1, 0])

    def test_rejects_bad_buffers(self):
        data = encode_tensor(np.ones(4))
        with self.assertRaises(CodecError):
            decode_tensor(data[:-1])
        with self.assertRaises(CodecError):
            decode_tensor(data + b"\x00")
        with self.assertRaises(CodecError):
            decode_tensor(b"\x00\x00")
        with self.assertRaises(CodecError):
            decode_tensor(b"\x01\x00\x00\x00\x00\x00\x00\x00")
        with self.assertRaises(CodecError):
            encode_tensor(np.float32(1.0))
        with self.assertRaises(CodecError):
            decode_tensors(data, 2)


class TestFrames(unittest.TestCase):

    def test_unknown_tag(self):
        with self.assertRaises(ProtocolError):
            parse_header(HEADER.pack(0, 0xFF))

    def test_payload_limit(self):
        with self.assertRaises(ProtocolError):
            parse_header(HEADER.pack(100, int(FrameType.ACTIVATIONS)), max_payload=10)
        with self.assertRaises(ProtocolError):
            encode_frame(Frame(FrameType.ACTIVATIONS, b"x" * 11), max_payload=10)

    def test_expect(self):
        frame = Frame(FrameType.GRADIENTS)
        self.assertIs(expect(frame, FrameType.GRADIENTS, FrameType.BYE), frame)
        with self.assertRaises(ProtocolError):
            expect(frame, FrameType.ACTIVATIONS)


class TestLoopback(unittest.TestCase):

    def test_counters(self):
        async def go():
            a, b = make_loopback()
            self.assertEqual(counter_snapshot(a), (0, 0))
            await send_frame(a, Frame(FrameType.METRICS, b"m" * 36))
            frame = await recv_frame(b)
            self.assertEqual(frame, Frame(FrameType.METRICS, b"m" * 36))
            self.assertEqual(counter_snapshot(a), (41, 0))
            self.assertEqual(counter_snapshot(b), (0, 41))
            await send_frame(b, Frame(FrameType.TOKEN_PASS))
            await recv_frame(a)
            self.assertEqual(counter_snapshot(b), (HEADER_SIZE, 41))
            self.assertEqual(a.counter.tx_bytes, b.counter.rx_bytes)
        run(go())

    def test_fifo(self):
        async def go():
            a, b = make_loopback()
            for i in range(100):
                await a.send(Frame(FrameType.METRICS, i.to_bytes(2, "little")))
            received = [int.from_bytes((await b.recv()).payload, "little") for _ in range(100)]
            self.assertEqual(received, list(range(100)))
        run(go())

    def test_closed(self):
        async def go():
            a, b = make_loopback()
            await a.send(Frame(FrameType.BYE))
            await a.close()
            self.assertEqual((await b.recv()).type, FrameType.BYE)
            with self.assertRaises(ChannelError):
                await b.recv()
            with self.assertRaises(ChannelError):
                await a.send(Frame(FrameType.BYE))
        run(go())


class TestTcp(unittest.TestCase):

    def test_counters_match_loopback(self):
        async def go():
            server, client = await tcp_pair()
            try:
                tcp_result = await exchange(server, client)
            finally:
                await client.close()
                await server.close()
            a, b = make_loopback()
            loop_result = await exchange(a, b)
            self.assertEqual(tcp_result, loop_result)
            self.assertEqual(tcp_result[0][0], tcp_result[1][1])
        run(go())

    def test_peer_close(self):
        async def go():
            server, client = await tcp_pair()
            await client.close()
            with self.assertRaises(ChannelError):
                await server.recv()
            await server.close()
        run(go())

    def test_connect_refused(self):
        async def go():
            listener = await tcp_listen("127.0.0.1:0")
            port = listener.port
            await listener.close()
            with self.assertRaises(ChannelError):
                await tcp_connect(f"127.0.0.1:{port}", retries=1, delay=0.01)
        run(go())

    def test_parse_addr(self):
        self.assertEqual(parse_addr("10.0.0.2:7000"), ("10.0.0.2", 7000))
        self.assertEqual(parse_addr(":7000"), ("127.0.0.1", 7000))
        with self.assertRaises(ChannelError):
            parse_addr("localhost")
        with self.assertRaises(ChannelError):
            parse_addr("localhost:http")


class TestHandshake(unittest.TestCase):

    def test_endpoints_ordered_by_client_id(self):
        async def go():
            pairs = [make_loopback(f"c{i}") for i in range(3)]
            for announced, (_, client_side) in zip([2, 0, 1], pairs):
                await send_hello(client_side, announced)
            ordered = await accept_clients([server for server, _ in pairs], 3)
            self.assertEqual(ordered, [pairs[1][0], pairs[2][0], pairs[0][0]])
            self.assertEqual(pairs[0][1].counter.tx_bytes, HEADER_SIZE + 4)
        run(go())

    def test_duplicate_and_out_of_range(self):
        async def go():
            pairs = [make_loopback() for _ in range(2)]
            for _, client_side in pairs:
                await send_hello(client_side, 0)
            with self.assertRaises(ProtocolError):
                await accept_clients([server for server, _ in pairs], 2)

            a, b = make_loopback()
            await send_hello(b, 5)
            with self.assertRaises(ProtocolError):
                await accept_clients([a], 2)
        run(go())

    def test_hello_payload(self):
        async def go():
            a, b = make_loopback()
            await b.send(Frame(FrameType.HELLO, b"\x01"))
            with self.assertRaises(ProtocolError):
                await read_hello(a)
            await b.send(Frame(FrameType.MODEL_UP))
            with self.assertRaises(ProtocolError):
                await read_hello(a)
        run(go())


if __name__ == '__main__':
    unittest.main()
