import asyncio
from loguru import logger

from ...errors import ChannelError
from .channel import Endpoint

# Counters see framed application bytes only, never TCP/IP headers.


def parse_addr(addr):
    host, sep, port = str(addr).rpartition(':')
    if not sep:
        raise ChannelError(f"address '{addr}' is not host:port")
    try:
        return (host or '127.0.0.1'), int(port)
    except ValueError:
        raise ChannelError(f"address '{addr}' has a non-numeric port") from None


class TcpEndpoint(Endpoint):

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, name="tcp"):
        super().__init__(name)
        self._reader = reader
        self._writer = writer

    async def _send_bytes(self, data):
        try:
            self._writer.write(data)
            await self._writer.drain()
        except (ConnectionError, OSError) as e:
            raise ChannelError(f"{self.name}: send failed: {e}") from e

    async def _recv_exact(self, n):
        try:
            return await self._reader.readexactly(n)
        except asyncio.IncompleteReadError as e:
            raise ChannelError(f"{self.name}: channel closed by peer") from e
        except (ConnectionError, OSError) as e:
            raise ChannelError(f"{self.name}: receive failed: {e}") from e

    async def close(self):
        if self.closed:
            return
        self.closed = True
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class TcpListener:
    """Accepts incoming connections and hands them out as endpoints in arrival order."""

    def __init__(self):
        self._server = None
        self._pending = asyncio.Queue()

    async def start(self, addr):
        host, port = parse_addr(addr)
        try:
            self._server = await asyncio.start_server(self._on_connect, host, port)
        except OSError as e:
            raise ChannelError(f"cannot listen on {addr}: {e}") from e
        logger.info("Listening on {host}:{port}", host=host, port=self.port)
        return self

    @property
    def port(self):
        return self._server.sockets[0].getsockname()[1]

    async def _on_connect(self, reader, writer):
        peer = writer.get_extra_info('peername')
        await self._pending.put(TcpEndpoint(reader, writer, name=f"tcp/{peer}"))

    async def accept(self, timeout=None) -> TcpEndpoint:
        try:
            return await asyncio.wait_for(self._pending.get(), timeout)
        except asyncio.TimeoutError:
            raise ChannelError("timed out waiting for a client connection") from None

    async def close(self):
        # stop accepting only; wait_closed() would also wait for the accepted endpoints
        if self._server is not None:
            self._server.close()
            self._server = None


async def tcp_listen(addr) -> TcpListener:
    return await TcpListener().start(addr)


async def tcp_connect(addr, retries=0, delay=0.2) -> TcpEndpoint:
    host, port = parse_addr(addr)
    attempt = 0
    while True:
        try:
            reader, writer = await asyncio.open_connection(host, port)
            return TcpEndpoint(reader, writer, name=f"tcp/{host}:{port}")
        except OSError as e:
            if attempt >= retries:
                raise ChannelError(f"cannot connect to {addr}: {e}") from e
            attempt += 1
            await asyncio.sleep(delay)
