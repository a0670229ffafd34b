import asyncio
import struct
from typing import List, Sequence

from loguru import logger

from ...errors import ProtocolError
from .channel import Endpoint
from .frames import Frame, FrameType, expect

CLIENT_ID = struct.Struct('<I')


async def send_hello(endpoint: Endpoint, client_id):
    await endpoint.send(Frame(FrameType.HELLO, CLIENT_ID.pack(client_id)))


async def read_hello(endpoint: Endpoint) -> int:
    frame = expect(await endpoint.recv(), FrameType.HELLO)
    if len(frame.payload) != CLIENT_ID.size:
        raise ProtocolError(f"HELLO payload must be {CLIENT_ID.size} bytes, got {len(frame.payload)}")
    return CLIENT_ID.unpack(frame.payload)[0]


async def accept_clients(endpoints: Sequence[Endpoint], k) -> List[Endpoint]:
    """Read every HELLO and return the endpoints ordered by the client id they announced."""
    ids = await asyncio.gather(*[read_hello(ep) for ep in endpoints])
    ordered = [None] * k
    for client_id, endpoint in zip(ids, endpoints):
        if client_id >= k:
            raise ProtocolError(f"client id {client_id} out of range for {k} clients")
        if ordered[client_id] is not None:
            raise ProtocolError(f"client id {client_id} announced twice")
        ordered[client_id] = endpoint
    missing = [c for c, ep in enumerate(ordered) if ep is None]
    if missing:
        raise ProtocolError(f"no HELLO from clients {missing}")
    logger.debug("Handshake complete with {k} clients", k=k)
    return ordered


async def say_bye(endpoints: Sequence[Endpoint]):
    for endpoint in endpoints:
        await endpoint.send(Frame(FrameType.BYE))


async def wait_bye(endpoint: Endpoint):
    expect(await endpoint.recv(), FrameType.BYE)
