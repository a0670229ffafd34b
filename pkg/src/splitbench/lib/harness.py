"""Wires a coordinator and its clients together over loopback or TCP inside one process."""
import asyncio
from typing import Awaitable, Callable, List, NamedTuple, Sequence

from loguru import logger

from ..errors import ChannelError, HarnessError
from .data import Dataset, PartitionPlan
from .transport import (
    Endpoint,
    accept_clients,
    make_loopback,
    send_hello,
    say_bye,
    tcp_connect,
    tcp_listen,
)
from .zoo import ModelSpec

TRANSPORTS = ("loopback", "tcp")


class Workload(NamedTuple):
    """Everything both sides derive from the shared config: architectures, data and the partition."""
    specs: List[ModelSpec]
    cuts: List[int]
    train: Dataset
    test: Dataset
    plan: PartitionPlan

    @property
    def spec(self):
        return self.specs[0]

    @property
    def cut(self):
        return self.cuts[0]

    def member(self, model_index):
        """(spec, cut) of one model; a single-architecture workload serves every model index."""
        if len(self.specs) == 1:
            return self.specs[0], self.cuts[0]
        return self.specs[model_index], self.cuts[model_index]

    def shard(self, client_id):
        return self.plan.indices(client_id)


CoordinatorFn = Callable[[List[Endpoint]], Awaitable]
ClientFn = Callable[[int, Endpoint], Awaitable]


async def open_endpoints(k, transport="loopback", listen="127.0.0.1:0"):
    """Returns (coordinator side, client side) endpoints, index i on both sides belonging to client i."""
    if transport == "loopback":
        pairs = [make_loopback(f"client{c}") for c in range(k)]
        return [a for a, _ in pairs], [b for _, b in pairs]
    if transport != "tcp":
        raise HarnessError(f"unknown transport '{transport}'")
    listener = await tcp_listen(listen)
    try:
        client_side = []
        for _ in range(k):
            client_side.append(await tcp_connect(f"127.0.0.1:{listener.port}", retries=5))
        coordinator_side = [await listener.accept(timeout=10) for _ in range(k)]
    finally:
        await listener.close()
    return coordinator_side, client_side


async def close_all(endpoints: Sequence[Endpoint]):
    for endpoint in endpoints:
        try:
            await endpoint.close()
        except (ChannelError, OSError):
            pass


def _root_cause(results):
    """Prefer the error that started a failure over the channel errors it caused elsewhere."""
    errors = [r for r in results if isinstance(r, BaseException)]
    for error in errors:
        if not isinstance(error, ChannelError):
            return error
    return errors[0] if errors else None


async def run_local(k, coordinator_fn: CoordinatorFn, client_fn: ClientFn, transport="loopback",
                    listen="127.0.0.1:0"):
    """Run coordinator and k clients concurrently; returns the coordinator's result.

    Clients announce themselves with HELLO, the coordinator sees its endpoints ordered by client
    id, and every client receives BYE once the coordinator is done. A failure on any side closes
    all channels so nobody waits forever.
    """
    coordinator_side, client_side = await open_endpoints(k, transport, listen)

    async def coordinator():
        try:
            ordered = await accept_clients(coordinator_side, k)
            result = await coordinator_fn(ordered)
            await say_bye(ordered)
            return result
        except BaseException:
            await close_all(coordinator_side + client_side)
            raise

    async def client(client_id, endpoint):
        try:
            await send_hello(endpoint, client_id)
            await client_fn(client_id, endpoint)
        except BaseException:
            await close_all(coordinator_side + client_side)
            raise

    try:
        results = await asyncio.gather(coordinator(), *[client(c, ep) for c, ep in enumerate(client_side)],
                                       return_exceptions=True)
    finally:
        await close_all(coordinator_side + client_side)
    error = _root_cause(results)
    if error is not None:
        logger.error("Run failed: {error}", error=error)
        raise error
    return results[0]


def byte_totals(endpoints: Sequence[Endpoint]):
    """(tx, rx) summed over endpoints, control frames included."""
    tx = sum(ep.counter.tx_bytes for ep in endpoints)
    rx = sum(ep.counter.rx_bytes for ep in endpoints)
    return tx, rx
