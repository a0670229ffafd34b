"""FedAvg: broadcast, parallel local training, size-weighted aggregation."""
import asyncio
import time
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, NonNegativeInt, PositiveInt, confloat

from ...errors import EngineError, HarnessError, ShapeError
from ...lib.harness import Workload
from ...lib.metrics import MetricsCollector, RoundMetrics, evaluate_accuracy, make_round
from ...lib.nn import Model, Optimizer, batch_rng, train_epoch
from ...lib.transport import Endpoint, Frame, FrameType, decode_tensor, encode_tensor, expect
from ...lib.zoo import initial_model


class FlConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    clients: PositiveInt
    rounds: PositiveInt = 100
    local_epochs: PositiveInt = 1
    batch_size: PositiveInt = 32
    lr: confloat(ge=0.0) = 0.001
    seed: NonNegativeInt = 0
    optimizer: Literal["adam", "sgd"] = "adam"
    eval_batch_size: PositiveInt = 256
    wall_clock: bool = True


def local_train(model: Model, samples, labels, indices, epochs, batch_size, optimizer, rng):
    """E shuffled passes over one client's shard. Returns (model, mean loss of the last epoch)."""
    if len(indices) < 1:
        raise EngineError("cannot train on an empty shard")
    loss = 0.0
    for _ in range(epochs):
        loss = train_epoch(model, optimizer, samples, labels, indices, batch_size, rng)
    return model, loss


def fedavg_aggregate(updates: Sequence[Tuple[np.ndarray, int]]) -> np.ndarray:
    """sum_k s_k * w_k / sum_k s_k, accumulated in float64 in the given (client id) order."""
    if not updates:
        raise EngineError("nothing to aggregate")
    length = np.asarray(updates[0][0]).shape
    total = 0
    acc = np.zeros(length, dtype=np.float64)
    for client_id, (weights, size) in enumerate(updates):
        weights = np.asarray(weights)
        if weights.shape != length:
            raise ShapeError(f"update from client {client_id} has the wrong length", None, length, weights.shape)
        if size < 1:
            raise EngineError(f"sample count must be >= 1, got {size}", client_id=client_id)
        acc += float(size) * weights.astype(np.float64)
        total += int(size)
    return (acc / total).astype(np.float32)


async def fl_client(config: FlConfig, workload: Workload, endpoint: Endpoint, client_id):
    """Answer every MODEL_DOWN with a locally trained MODEL_UP until the coordinator says BYE."""
    model = initial_model(workload.spec, config.seed)
    indices = workload.shard(client_id)
    round_index = 0
    while True:
        frame = expect(await endpoint.recv(), FrameType.MODEL_DOWN, FrameType.BYE)
        if frame.type == FrameType.BYE:
            logger.debug("client {client} done after {rounds} rounds", client=client_id, rounds=round_index)
            return
        model.load_flat(decode_tensor(frame.payload))
        optimizer = Optimizer(config.optimizer, config.lr)
        rng = batch_rng(config.seed, 0, client_id, round_index)
        _, loss = await asyncio.to_thread(local_train, model, workload.train.samples, workload.train.labels,
                                          indices, config.local_epochs, config.batch_size, optimizer, rng)
        logger.debug("client {client} round {round} train loss {loss:.4f}",
                     client=client_id, round=round_index, loss=loss)
        await endpoint.send(Frame(FrameType.MODEL_UP, encode_tensor(model.flatten())))
        round_index += 1


class FlCoordinator:
    """Owns the global model and the per-client endpoints for one FedAvg run."""

    def __init__(self, config: FlConfig, workload: Workload, endpoints: Sequence[Endpoint],
                 collector: Optional[MetricsCollector] = None, keep_trajectory=False):
        if len(endpoints) != config.clients:
            raise EngineError(f"{len(endpoints)} transports for {config.clients} clients")
        if workload.plan.k != config.clients:
            raise EngineError(f"partition plan has {workload.plan.k} clients, config has {config.clients}")
        self.config = config
        self.workload = workload
        self.endpoints = list(endpoints)
        self.collector = collector or MetricsCollector()
        self.global_model = initial_model(workload.spec, config.seed)
        self.trajectory: Optional[List[np.ndarray]] = [] if keep_trajectory else None

    async def _exchange(self, round_index, client_id, payload):
        endpoint = self.endpoints[client_id]
        try:
            await endpoint.send(Frame(FrameType.MODEL_DOWN, payload))
            frame = expect(await endpoint.recv(), FrameType.MODEL_UP)
            weights = decode_tensor(frame.payload)
        except HarnessError as e:
            raise EngineError(str(e), round_index=round_index, client_id=client_id) from e
        expected = (self.global_model.param_count(),)
        if weights.shape != expected:
            raise EngineError(f"MODEL_UP carries {weights.shape}, expected {expected}",
                              round_index=round_index, client_id=client_id)
        return weights

    async def run_round(self, round_index) -> RoundMetrics:
        started = time.monotonic()
        before = [ep.counter.snapshot() for ep in self.endpoints]
        payload = encode_tensor(self.global_model.flatten())
        updates = await asyncio.gather(*[self._exchange(round_index, c, payload)
                                         for c in range(self.config.clients)])
        sizes = self.workload.plan.sizes
        self.global_model.load_flat(fedavg_aggregate([(updates[c], sizes[c]) for c in range(self.config.clients)]))
        if self.trajectory is not None:
            self.trajectory.append(self.global_model.flatten().copy())
        accuracy, loss = await asyncio.to_thread(evaluate_accuracy, self.global_model, self.workload.test,
                                                 self.config.eval_batch_size)
        after = [ep.counter.snapshot() for ep in self.endpoints]
        wall_ms = (time.monotonic() - started) * 1000.0 if self.config.wall_clock else 0.0
        record = make_round(round_index, accuracy, loss, wall_ms,
                            [a[0] - b[0] for a, b in zip(after, before)],
                            [a[1] - b[1] for a, b in zip(after, before)],
                            self.collector.last())
        await self.collector.put(record)
        return record

    async def run(self) -> List[RoundMetrics]:
        logger.info("FedAvg: {k} clients, {rounds} rounds, E={epochs}, {params} parameters",
                    k=self.config.clients, rounds=self.config.rounds, epochs=self.config.local_epochs,
                    params=self.global_model.param_count())
        for round_index in range(self.config.rounds):
            await self.run_round(round_index)
        return self.collector.series()


async def run_fl(config: FlConfig, workload: Workload, transports: Sequence[Endpoint],
                 collector: Optional[MetricsCollector] = None) -> List[RoundMetrics]:
    return await FlCoordinator(config, workload, transports, collector).run()
