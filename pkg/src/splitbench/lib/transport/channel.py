import asyncio
from loguru import logger

from ...errors import ChannelError
from .frames import HEADER_SIZE, MAX_PAYLOAD, Frame, encode_frame, parse_header


class ByteCounter:
    """Framed application bytes (header + payload) sent and received on one endpoint."""

    def __init__(self):
        self.tx_bytes = 0
        self.rx_bytes = 0

    def snapshot(self):
        return (self.tx_bytes, self.rx_bytes)


class Endpoint:
    """One side of a framed channel. Single owner; at most one outstanding request."""

    def __init__(self, name="endpoint", max_payload=MAX_PAYLOAD):
        self.name = name
        self.max_payload = max_payload
        self.counter = ByteCounter()
        self.closed = False

    async def send(self, frame: Frame):
        if self.closed:
            raise ChannelError(f"{self.name}: send on closed channel")
        data = encode_frame(frame, self.max_payload)
        await self._send_bytes(data)
        self.counter.tx_bytes += len(data)

    async def recv(self) -> Frame:
        header = await self._recv_exact(HEADER_SIZE)
        self.counter.rx_bytes += HEADER_SIZE
        length, kind = parse_header(header, self.max_payload)
        payload = await self._recv_exact(length) if length else b''
        self.counter.rx_bytes += length
        return Frame(kind, payload)

    async def close(self):
        self.closed = True

    async def _send_bytes(self, data: bytes):
        raise NotImplementedError

    async def _recv_exact(self, n: int) -> bytes:
        raise NotImplementedError


class LoopbackEndpoint(Endpoint):

    def __init__(self, name, inbox: asyncio.Queue, outbox: asyncio.Queue):
        super().__init__(name)
        self._inbox = inbox
        self._outbox = outbox
        self._buffer = bytearray()
        self._eof = False

    async def _send_bytes(self, data):
        await self._outbox.put(bytes(data))

    async def _recv_exact(self, n):
        while len(self._buffer) < n:
            if self._eof:
                raise ChannelError(f"{self.name}: channel closed")
            chunk = await self._inbox.get()
            if chunk is None:
                self._eof = True
                continue
            self._buffer += chunk
        data = bytes(self._buffer[:n])
        del self._buffer[:n]
        return data

    async def close(self):
        if not self.closed:
            self.closed = True
            await self._outbox.put(None)
            await self._inbox.put(None)


def make_loopback(name="loopback"):
    """In-process ordered, reliable channel pair with byte counters."""
    a_to_b = asyncio.Queue()
    b_to_a = asyncio.Queue()
    a = LoopbackEndpoint(f"{name}/a", inbox=b_to_a, outbox=a_to_b)
    b = LoopbackEndpoint(f"{name}/b", inbox=a_to_b, outbox=b_to_a)
    logger.debug("Created loopback pair {name}", name=name)
    return a, b


async def send_frame(channel: Endpoint, frame: Frame):
    await channel.send(frame)


async def recv_frame(channel: Endpoint) -> Frame:
    return await channel.recv()


def counter_snapshot(channel: Endpoint):
    return channel.counter.snapshot()
