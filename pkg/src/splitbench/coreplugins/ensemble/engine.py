"""Several SplitNN models trained side by side over the same clients.

In phase p model m works with client (m + p) mod K; a phase ends when every model's visit in it
has finished, and K phases make one round.
"""
import asyncio
import time
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ...errors import EngineError
from ...lib.harness import Workload
from ...lib.metrics import MetricsCollector, RoundMetrics, make_round, predict_logits
from ...lib.nn import Model, softmax
from ...lib.schedule import ensemble_schedule, model_orders, visit_plan
from ...lib.transport import Endpoint
from ..split.engine import SplitConfig, SplitSession, split_client


class EnsembleCoordinator:

    def __init__(self, config: SplitConfig, workload: Workload, endpoints: Sequence[Endpoint],
                 collector: Optional[MetricsCollector] = None):
        if len(endpoints) != config.clients:
            raise EngineError(f"{len(endpoints)} transports for {config.clients} clients")
        if workload.plan.k != config.clients:
            raise EngineError(f"partition plan has {workload.plan.k} clients, config has {config.clients}")
        self.config = config
        self.workload = workload
        self.models = len(workload.specs)
        self.schedule = ensemble_schedule(self.models, config.clients)
        self.orders = model_orders(self.models, config.clients)
        self.collector = collector or MetricsCollector()
        self.sessions = [SplitSession(config, *workload.member(m), endpoints, model_index=m)
                         for m in range(self.models)]
        self.visits = {m: visit_plan(self.orders[m], config.rounds, config.sync_mode) for m in range(self.models)}
        self.session_ms: Dict[int, float] = {m: 0.0 for m in range(self.models)}
        self.round_session_ms: Dict[int, float] = {m: 0.0 for m in range(self.models)}

    async def _timed_visit(self, model_index, visit):
        started = time.monotonic()
        await self.sessions[model_index].run_visit(visit)
        elapsed = (time.monotonic() - started) * 1000.0
        self.session_ms[model_index] += elapsed
        self.round_session_ms[model_index] += elapsed
        logger.debug("model {model} client {client} round {round}: {ms:.1f} ms", model=model_index,
                     client=visit.client, round=visit.round, ms=elapsed)

    async def run_phase(self, round_index, phase):
        k = self.config.clients
        jobs = [self._timed_visit(m, self.visits[m][round_index * k + phase]) for m, _ in self.schedule[phase]]
        try:
            await asyncio.gather(*jobs)
        except EngineError:
            raise
        except Exception as e:
            raise EngineError(f"phase {phase} aborted: {e}", round_index=round_index) from e

    async def run(self) -> Dict[int, List[RoundMetrics]]:
        config = self.config
        logger.info("Ensemble: {m} models over {k} clients, {rounds} rounds, sync {mode}",
                    m=self.models, k=config.clients, rounds=config.rounds, mode=config.sync_mode)
        for round_index in range(config.rounds):
            started = time.monotonic()
            self.round_session_ms = {m: 0.0 for m in range(self.models)}
            for phase in range(config.clients):
                await self.run_phase(round_index, phase)
            scores = await asyncio.gather(*[s.evaluate(self.workload.test, config.eval_batch_size)
                                            for s in self.sessions])
            wall_ms = (time.monotonic() - started) * 1000.0 if config.wall_clock else 0.0
            for m, session in enumerate(self.sessions):
                accuracy, loss = scores[m]
                session.take_loss()
                tx, rx = session.take_bytes()
                session_ms = self.round_session_ms[m] if config.wall_clock else 0.0
                record = make_round(round_index, accuracy, loss, wall_ms, tx, rx, self.collector.last(m), model=m,
                                    session_ms=session_ms)
                await self.collector.put(record)
        return {m: self.collector.series(m) for m in range(self.models)}

    def full_models(self) -> List[Model]:
        return [session.full_model() for session in self.sessions]


async def ensemble_client(config: SplitConfig, workload: Workload, endpoint: Endpoint, client_id):
    orders = model_orders(len(workload.specs), config.clients)
    await split_client(config, workload, endpoint, client_id, orders=orders)


async def run_ensemble(config: SplitConfig, workload: Workload, transports: Sequence[Endpoint],
                       collector: Optional[MetricsCollector] = None) -> Dict[int, List[RoundMetrics]]:
    return await EnsembleCoordinator(config, workload, transports, collector).run()


def ensemble_predict(models: Sequence[Model], samples, batch_size=256):
    """Average of the members' softmax outputs; returns (probabilities, argmax labels)."""
    if not models:
        raise EngineError("ensemble has no members")
    probs = None
    for model in models:
        p = softmax(predict_logits(model, samples, batch_size).astype(np.float64))
        probs = p if probs is None else probs + p
    probs /= len(models)
    return probs, probs.argmax(axis=1)


def time_saving(ensemble_ms, solo_ms: Sequence[float]):
    """Fraction of time saved against training the members one after another."""
    total = float(sum(solo_ms))
    if total <= 0:
        raise EngineError("solo timings must be positive")
    return 1.0 - float(ensemble_ms) / total
