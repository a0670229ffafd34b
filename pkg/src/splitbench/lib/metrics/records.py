import asyncio
from typing import Dict, List, Optional
from pydantic import BaseModel, Field, confloat

from ..providers.hooks import hook_manager


class RoundMetrics(BaseModel):
    round: int
    accuracy: confloat(ge=0.0, le=1.0)
    loss: float
    wall_ms: float
    tx_bytes: int
    rx_bytes: int
    cum_tx: int
    cum_rx: int
    client_tx: List[int] = Field(default_factory=list)
    client_rx: List[int] = Field(default_factory=list)
    model: int = 0
    # time this model spent in its own visits during the round; ensemble runs only
    session_ms: float = 0.0


CSV_COLUMNS = ["round", "accuracy", "loss", "wall_ms", "tx_bytes", "rx_bytes", "cum_tx", "cum_rx"]


def make_round(round_index, accuracy, loss, wall_ms, client_tx, client_rx, previous: Optional[RoundMetrics], model=0,
               session_ms=0.0):
    tx = int(sum(client_tx))
    rx = int(sum(client_rx))
    cum_tx = (previous.cum_tx if previous else 0) + tx
    cum_rx = (previous.cum_rx if previous else 0) + rx
    return RoundMetrics(round=round_index, accuracy=accuracy, loss=loss, wall_ms=wall_ms,
                        tx_bytes=tx, rx_bytes=rx, cum_tx=cum_tx, cum_rx=cum_rx,
                        client_tx=[int(v) for v in client_tx], client_rx=[int(v) for v in client_rx],
                        model=model, session_ms=session_ms)


class MetricsCollector:
    """Single sink for round records; producers hand records over one at a time."""

    def __init__(self, hooks=hook_manager):
        self._records: Dict[int, List[RoundMetrics]] = {}
        self._lock = asyncio.Lock()
        self._hooks = hooks

    async def put(self, record: RoundMetrics):
        async with self._lock:
            self._records.setdefault(record.model, []).append(record)
        await self._hooks.round_done(record)

    def last(self, model=0) -> Optional[RoundMetrics]:
        series = self._records.get(model)
        return series[-1] if series else None

    def series(self, model=0) -> List[RoundMetrics]:
        return list(self._records.get(model, []))

    def models(self):
        return sorted(self._records)


def rounds_to_accuracy(series: List[RoundMetrics], target) -> Optional[int]:
    """First round whose test accuracy reaches target, or None."""
    for record in series:
        if record.accuracy >= target:
            return record.round
    return None


def best_round(series: List[RoundMetrics]):
    """(round, accuracy) of the best test accuracy; earliest round wins ties."""
    if not series:
        return None
    best = max(series, key=lambda r: (r.accuracy, -r.round))
    return best.round, best.accuracy
