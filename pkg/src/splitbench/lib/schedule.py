"""Who trains what, when: split-learning visit legs and the ensemble rotation table.

Both the engines and the byte estimator walk these plans, which is what keeps live
counters and estimates equal.
"""
from typing import Dict, List, NamedTuple, Sequence, Tuple

from ..errors import ConfigError
from .transport.frames import FrameType

SYNC_MODES = ("relay", "none")


class Visit(NamedTuple):
    round: int
    position: int
    client: int
    start: FrameType
    end: FrameType

    @property
    def relayed_in(self):
        return self.start == FrameType.CLIENT_WEIGHTS

    @property
    def uploads(self):
        return self.end == FrameType.CLIENT_WEIGHTS


def round_order(k, rotation=0) -> List[int]:
    return [(rotation + p) % k for p in range(k)]


def visit_plan(order: Sequence[int], rounds, sync_mode) -> List[Visit]:
    """Visits of one model in time order.

    Start leg: CLIENT_WEIGHTS when relaying h_t from a different client, TOKEN_PASS otherwise.
    End leg: CLIENT_WEIGHTS in relay mode or on the last visit of a round (evaluation needs h_t),
    ROUND_DONE otherwise.
    """
    if sync_mode not in SYNC_MODES:
        raise ConfigError(f"unknown sync mode '{sync_mode}'", key="sync_mode")
    visits = []
    previous = None
    for r in range(rounds):
        for position, client in enumerate(order):
            relay = sync_mode == "relay"
            if relay and previous is not None and previous != client:
                start = FrameType.CLIENT_WEIGHTS
            else:
                start = FrameType.TOKEN_PASS
            last = position == len(order) - 1
            end = FrameType.CLIENT_WEIGHTS if relay or last else FrameType.ROUND_DONE
            visits.append(Visit(r, position, client, start, end))
            previous = client
    return visits


def handoff_count(visits: Sequence[Visit]) -> int:
    """Transitions of the token between two different clients."""
    return sum(1 for a, b in zip(visits, visits[1:]) if a.client != b.client)


def ensemble_schedule(models, clients) -> List[List[Tuple[int, int]]]:
    """Rotation table: in phase p model m trains with client (m + p) mod K."""
    if models < 1 or clients < 1:
        raise ConfigError("ensemble needs at least one model and one client", key="model.ensemble")
    if models > clients:
        raise ConfigError(f"{models} models cannot share {clients} clients within a phase", key="model.ensemble")
    return [[(m, (m + p) % clients) for m in range(models)] for p in range(clients)]


def model_orders(models, clients) -> Dict[int, List[int]]:
    return {m: round_order(clients, rotation=m) for m in range(models)}


def client_visits(client, orders: Dict[int, Sequence[int]], rounds, sync_mode) -> List[Tuple[int, Visit]]:
    """Every (model, visit) a client takes part in, in the order it will happen."""
    mine = []
    for model, order in orders.items():
        for visit in visit_plan(order, rounds, sync_mode):
            if visit.client == client:
                mine.append((model, visit))
    mine.sort(key=lambda item: (item[1].round, item[1].position, item[0]))
    return mine
