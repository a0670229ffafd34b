"""SplitNN: the client keeps the layers up to the cut, the coordinator runs the rest.

Clients are visited one at a time in a fixed order; between visits the client sub-network is
either relayed through the coordinator (sync_mode=relay) or left where it is (sync_mode=none).
"""
import asyncio
import time
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, NonNegativeFloat, NonNegativeInt, PositiveInt, confloat

from ...errors import EngineError, HarnessError, ProtocolError, ShapeError
from ...lib.harness import Workload
from ...lib.metrics import MetricsCollector, RoundMetrics, evaluate_accuracy, make_round
from ...lib.nn import Model, Optimizer, batch_order, batch_rng, softmax_cross_entropy
from ...lib.schedule import Visit, client_visits, handoff_count, round_order, visit_plan
from ...lib.transport import (
    Endpoint,
    Frame,
    FrameType,
    decode_tensor,
    decode_tensors,
    encode_tensor,
    encode_tensors,
    expect,
    wait_bye,
)
from ...lib.zoo import ModelSpec, initial_model, join_models, split_model


class SplitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    clients: PositiveInt
    rounds: PositiveInt = 100
    batch_size: PositiveInt = 32
    lr: confloat(ge=0.0) = 0.001
    seed: NonNegativeInt = 0
    optimizer: Literal["adam", "sgd"] = "adam"
    sync_mode: Literal["relay", "none"] = "relay"
    client_order: Optional[List[int]] = None
    model_index: NonNegativeInt = 0
    eval_batch_size: PositiveInt = 256
    server_delay_ms: NonNegativeFloat = 0.0
    wall_clock: bool = True

    def order(self):
        if self.client_order is None:
            return round_order(self.clients)
        if sorted(self.client_order) != list(range(self.clients)):
            raise EngineError(f"client order {self.client_order} is not a permutation of {self.clients} clients")
        return list(self.client_order)


def _client_step(client: Model, x):
    return client.forward(x)


def _client_update(client: Model, optimizer: Optimizer, grad):
    client.backward(grad)
    optimizer.step(client)


async def split_client_epoch(client: Model, optimizer: Optimizer, samples, labels, indices, batch_size, rng,
                             channel: Endpoint) -> Tuple[Model, int]:
    """One pass over the shard: ACTIVATIONS out, GRADIENTS back, client step. Returns (client, batches)."""
    if len(indices) < 1:
        raise EngineError("cannot train on an empty shard")
    batches = 0
    for batch in batch_order(indices, batch_size, rng):
        acts = await asyncio.to_thread(_client_step, client, samples[batch])
        payload = encode_tensors(acts, labels[batch].astype(np.float32))
        await channel.send(Frame(FrameType.ACTIVATIONS, payload))
        frame = expect(await channel.recv(), FrameType.GRADIENTS)
        grad = decode_tensor(frame.payload)
        if grad.shape != acts.shape:
            raise ShapeError("GRADIENTS shape does not match ACTIVATIONS", client.layer_count - 1,
                             acts.shape, grad.shape)
        await asyncio.to_thread(_client_update, client, optimizer, grad)
        batches += 1
    return client, batches


def _server_forward_backward(server: Model, acts, labels):
    loss, grad = softmax_cross_entropy(server.forward(acts), labels)
    return server.backward(grad), loss


async def split_server_session(server: Model, optimizer: Optimizer, channel: Endpoint, smashed_shape,
                               delay_ms=0.0) -> Tuple[Frame, List[float]]:
    """Serve ACTIVATIONS until the client closes its visit; returns (closing frame, batch losses)."""
    smashed_shape = tuple(smashed_shape)
    losses = []
    while True:
        frame = await channel.recv()
        if frame.type in (FrameType.CLIENT_WEIGHTS, FrameType.ROUND_DONE):
            return frame, losses
        expect(frame, FrameType.ACTIVATIONS)
        acts, labels = decode_tensors(frame.payload, 2)
        if acts.shape[1:] != smashed_shape:
            raise ShapeError("smashed data does not fit the server sub-network", server.first_index,
                             smashed_shape, acts.shape[1:])
        if labels.shape != (acts.shape[0],):
            raise ProtocolError(f"{labels.shape} labels for a batch of {acts.shape[0]}")
        classes = server.output_shape[-1]
        if not np.all(np.isfinite(labels)) or np.any(labels != np.round(labels)):
            raise ProtocolError("ACTIVATIONS carries non-integral labels")
        if labels.size and (labels.min() < 0 or labels.max() >= classes):
            raise ProtocolError(f"ACTIVATIONS carries labels outside [0, {classes})")
        grad_cut, loss = await asyncio.to_thread(_server_forward_backward, server, acts, labels.astype(np.int64))
        await channel.send(Frame(FrameType.GRADIENTS, encode_tensor(grad_cut)))
        await asyncio.to_thread(optimizer.step, server)
        if delay_ms:
            await asyncio.sleep(delay_ms / 1000.0)
        losses.append(loss)


class SplitSession:
    """Coordinator state of one model: w_t, the latest h_t, and which client currently holds the token."""

    def __init__(self, config: SplitConfig, spec: ModelSpec, cut_index, endpoints: Sequence[Endpoint],
                 model_index=None):
        self.config = config
        self.model_index = config.model_index if model_index is None else model_index
        self.endpoints = list(endpoints)
        parts = split_model(spec, initial_model(spec, config.seed, self.model_index), cut_index)
        self.client_template = parts.client
        self.server = parts.server
        self.smashed_shape = parts.smashed_shape
        self.client_weights = parts.client.flatten()
        self.optimizer = Optimizer(config.optimizer, config.lr)
        self.active: Optional[int] = None
        self.closing: Optional[Frame] = None
        self.tx = [0] * len(self.endpoints)
        self.rx = [0] * len(self.endpoints)
        self.losses: List[float] = []

    async def _on(self, client_id, action):
        endpoint = self.endpoints[client_id]
        tx, rx = endpoint.counter.snapshot()
        try:
            return await action(endpoint)
        finally:
            self.tx[client_id] += endpoint.counter.tx_bytes - tx
            self.rx[client_id] += endpoint.counter.rx_bytes - rx

    async def open_visit(self, visit: Visit):
        if self.active is not None:
            raise EngineError(f"client {self.active} still holds the token", visit.round, visit.client)
        if self.endpoints[visit.client].closed:
            raise EngineError("handoff to inactive client", visit.round, visit.client)

        async def leg(endpoint):
            if visit.start == FrameType.CLIENT_WEIGHTS:
                await endpoint.send(Frame(FrameType.CLIENT_WEIGHTS, encode_tensor(self.client_weights)))
            else:
                await endpoint.send(Frame(FrameType.TOKEN_PASS))
        await self._on(visit.client, leg)
        self.active = visit.client

    async def train_visit(self, visit: Visit):
        if self.active != visit.client:
            raise EngineError("visit on a client without the token", visit.round, visit.client)

        async def serve(endpoint):
            return await split_server_session(self.server, self.optimizer, endpoint, self.smashed_shape,
                                              self.config.server_delay_ms)
        try:
            self.closing, losses = await self._on(visit.client, serve)
        except HarnessError as e:
            raise EngineError(str(e), visit.round, visit.client) from e
        self.losses.extend(losses)

    async def close_visit(self, visit: Visit):
        if self.active != visit.client or self.closing is None:
            raise EngineError("closing a visit that is not in progress", visit.round, visit.client)
        frame, self.closing = self.closing, None
        try:
            expect(frame, visit.end)
        except ProtocolError as e:
            raise EngineError(str(e), visit.round, visit.client) from e
        if frame.type == FrameType.CLIENT_WEIGHTS:
            weights = decode_tensor(frame.payload)
            if weights.shape != self.client_weights.shape:
                raise EngineError(f"CLIENT_WEIGHTS carries {weights.shape}, expected {self.client_weights.shape}",
                                  visit.round, visit.client)
            self.client_weights = weights
        self.active = None

    async def run_visit(self, visit: Visit):
        await self.open_visit(visit)
        await self.train_visit(visit)
        await self.close_visit(visit)

    def client_model(self) -> Model:
        return self.client_template.clone().load_flat(self.client_weights)

    def full_model(self) -> Model:
        return join_models(self.client_model(), self.server)

    async def evaluate(self, test_set, batch_size):
        return await asyncio.to_thread(evaluate_accuracy, self.full_model(), test_set, batch_size)

    def take_bytes(self):
        tx, rx = self.tx, self.rx
        self.tx = [0] * len(self.endpoints)
        self.rx = [0] * len(self.endpoints)
        return tx, rx

    def take_loss(self):
        losses, self.losses = self.losses, []
        return float(np.mean(losses)) if losses else 0.0


async def client_handoff(session: SplitSession, from_visit: Visit, to_visit: Visit):
    """Close from_visit and hand the token to the next client: relayed h_t or a bare TOKEN_PASS."""
    if from_visit.client == to_visit.client:
        raise EngineError("handoff needs two different clients", to_visit.round, to_visit.client)
    if session.active != from_visit.client:
        raise EngineError("handoff from a client that does not hold the token", from_visit.round, from_visit.client)
    await session.close_visit(from_visit)
    await session.open_visit(to_visit)
    logger.debug("model {model}: token {src} -> {dst} via {leg}", model=session.model_index,
                 src=from_visit.client, dst=to_visit.client, leg=to_visit.start.name)


async def split_client(config: SplitConfig, workload: Workload, endpoint: Endpoint, client_id,
                       orders: Optional[Dict[int, Sequence[int]]] = None):
    """Client worker for one or more models; walks its own visits, then waits for BYE.

    `orders` maps model index to that model's client order; by default a single model
    (config.model_index) over config.order().
    """
    if orders is None:
        orders = {config.model_index: config.order()}
    members = {}
    for model_index in orders:
        spec, cut = workload.member(model_index)
        client = split_model(spec, initial_model(spec, config.seed, model_index), cut).client
        members[model_index] = (client, Optimizer(config.optimizer, config.lr))

    indices = workload.shard(client_id)
    for model_index, visit in client_visits(client_id, orders, config.rounds, config.sync_mode):
        client, optimizer = members[model_index]
        frame = expect(await endpoint.recv(), visit.start)
        if frame.type == FrameType.CLIENT_WEIGHTS:
            client.load_flat(decode_tensor(frame.payload))
        rng = batch_rng(config.seed, model_index, client_id, visit.round)
        await split_client_epoch(client, optimizer, workload.train.samples, workload.train.labels, indices,
                                 config.batch_size, rng, endpoint)
        if visit.end == FrameType.CLIENT_WEIGHTS:
            await endpoint.send(Frame(FrameType.CLIENT_WEIGHTS, encode_tensor(client.flatten())))
        else:
            await endpoint.send(Frame(FrameType.ROUND_DONE))
    await wait_bye(endpoint)


class SplitCoordinator:

    def __init__(self, config: SplitConfig, workload: Workload, endpoints: Sequence[Endpoint],
                 collector: Optional[MetricsCollector] = None):
        if len(endpoints) != config.clients:
            raise EngineError(f"{len(endpoints)} transports for {config.clients} clients")
        if workload.plan.k != config.clients:
            raise EngineError(f"partition plan has {workload.plan.k} clients, config has {config.clients}")
        self.config = config
        self.workload = workload
        self.collector = collector or MetricsCollector()
        self.session = SplitSession(config, *workload.member(config.model_index), endpoints)
        self.visits = visit_plan(config.order(), config.rounds, config.sync_mode)

    async def run(self) -> List[RoundMetrics]:
        config = self.config
        logger.info("SplitNN: {k} clients, {rounds} rounds, sync {mode}, smashed {shape}, {handoffs} handoffs",
                    k=config.clients, rounds=config.rounds, mode=config.sync_mode,
                    shape=self.session.smashed_shape, handoffs=handoff_count(self.visits))
        previous = None
        started = time.monotonic()
        for visit in self.visits:
            if previous is not None and previous.round == visit.round:
                await client_handoff(self.session, previous, visit)
            else:
                started = time.monotonic()
                await self.session.open_visit(visit)
            await self.session.train_visit(visit)
            if visit.position == config.clients - 1:
                await self.session.close_visit(visit)
                await self.finish_round(visit.round, started)
            previous = visit
        return self.collector.series(self.session.model_index)

    async def finish_round(self, round_index, started) -> RoundMetrics:
        train_loss = self.session.take_loss()
        accuracy, loss = await self.session.evaluate(self.workload.test, self.config.eval_batch_size)
        tx, rx = self.session.take_bytes()
        wall_ms = (time.monotonic() - started) * 1000.0 if self.config.wall_clock else 0.0
        logger.debug("round {round}: train loss {train:.4f}", round=round_index, train=train_loss)
        record = make_round(round_index, accuracy, loss, wall_ms, tx, rx,
                            self.collector.last(self.session.model_index), model=self.session.model_index)
        await self.collector.put(record)
        return record

    def full_model(self):
        return self.session.full_model()


async def run_split(config: SplitConfig, workload: Workload, transports: Sequence[Endpoint],
                    collector: Optional[MetricsCollector] = None) -> List[RoundMetrics]:
    return await SplitCoordinator(config, workload, transports, collector).run()
