"""Small models and workloads shared by the test modules."""
import asyncio
import os
import unittest

import numpy as np

from splitbench.lib.data import make_plan, synth_sequences, train_test_split
from splitbench.lib.harness import Workload, run_local
from splitbench.lib.zoo import build_conv1d_classifier, cut_after_block

SLOW = os.environ.get("SPLITBENCH_SLOW") == "1"
slow_test = unittest.skipUnless(SLOW, "set SPLITBENCH_SLOW=1 to run learning-behaviour tests")


def tiny_spec(classes=3, hidden=8, channels=2, length=16, pool=2):
    return build_conv1d_classifier(4, channels, 3, (1, length), classes, pool=pool, pool_every=2, hidden=hidden)


def tiny_workload(clients=2, n=60, classes=3, scheme="iid", seed=0, specs=None, blocks=2, noise_std=0.3,
                  **plan_args):
    specs = specs or [tiny_spec(classes)]
    length = specs[0].input_shape[1]
    train, test = train_test_split(synth_sequences(n, classes, length, noise_std, seed), 0.5, seed)
    plan = make_plan(train, clients, scheme, seed, **plan_args)
    return Workload(specs, [cut_after_block(spec, blocks) for spec in specs], train, test, plan)


def run(coro):
    return asyncio.run(coro)


async def run_pair(coordinator_factory, client_fn, clients, transport="loopback", taps=None):
    """run_local around a coordinator object; returns (coordinator, series, coordinator endpoints)."""
    box = {}

    async def coordinator_fn(endpoints):
        box["endpoints"] = endpoints
        if taps is not None:
            for client_id, endpoint in enumerate(endpoints):
                tap(endpoint, client_id, taps)
        coordinator = coordinator_factory(endpoints)
        box["coordinator"] = coordinator
        return await coordinator.run()

    series = await run_local(clients, coordinator_fn, client_fn, transport=transport)
    return box["coordinator"], series, box["endpoints"]


def tap(endpoint, client_id, log):
    """Record every frame the coordinator exchanges as (client, 'out'|'in', frame)."""
    send, recv = endpoint.send, endpoint.recv

    async def tapped_send(frame):
        log.append((client_id, "out", frame))
        await send(frame)

    async def tapped_recv():
        frame = await recv()
        log.append((client_id, "in", frame))
        return frame

    endpoint.send = tapped_send
    endpoint.recv = tapped_recv


def random_inputs(shape, batch, seed=0):
    return np.random.default_rng(seed).normal(size=(batch,) + tuple(shape)).astype(np.float32)
