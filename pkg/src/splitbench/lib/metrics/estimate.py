"""Analytical byte counts for FL and SplitNN over the normative framing.

Items hold payload bytes only; every 5-byte frame header lands in `framing`. With sync_mode none the
end-of-round h_t upload only feeds evaluation, so it is its own `eval_upload` item rather than a handoff.
"""
from typing import List, Optional, Sequence, Tuple
from pydantic import BaseModel, model_validator

from ..schedule import round_order, visit_plan
from ..transport.codec import encoded_size
from ..transport.frames import HEADER_SIZE, FrameType, frame_size

HELLO_PAYLOAD = 4
ITEMS = ("model_down", "model_up", "activations", "labels", "gradients", "handoff", "eval_upload", "framing",
         "control")


class ClientBytes(BaseModel):
    client: int
    to_server: int = 0
    from_server: int = 0

    @property
    def total(self):
        return self.to_server + self.from_server


class CommEstimate(BaseModel):
    protocol: str
    model_down: int = 0
    model_up: int = 0
    activations: int = 0
    labels: int = 0
    gradients: int = 0
    handoff: int = 0
    eval_upload: int = 0
    framing: int = 0
    control: int = 0
    grand_total: int = 0
    per_client: List[ClientBytes] = []

    @model_validator(mode="after")
    def check_total(self):
        items = sum(getattr(self, name) for name in ITEMS)
        if self.grand_total != items:
            raise ValueError(f"grand total {self.grand_total} != sum of items {items}")
        return self

    def items(self):
        return {name: getattr(self, name) for name in ITEMS}

    def totals(self):
        """(coordinator tx, coordinator rx) = (bytes to clients, bytes from clients)."""
        return (sum(c.from_server for c in self.per_client), sum(c.to_server for c in self.per_client))


def control_bytes():
    """HELLO (u32 client id) up plus an empty BYE down, per client."""
    return frame_size(HELLO_PAYLOAD), frame_size(0)


def _finish(protocol, items, per_client):
    items["grand_total"] = sum(items.get(name, 0) for name in ITEMS)
    return CommEstimate(protocol=protocol, per_client=per_client, **items)


def estimate_fl_bytes(param_count, rounds, clients, direction="both", include_control=False) -> CommEstimate:
    """Per client per round: MODEL_UP (and MODEL_DOWN when direction='both'), each 5 + 8 + 4*param_count."""
    if direction not in ("one", "both"):
        raise ValueError(f"direction must be 'one' or 'both', got {direction}")
    payload = encoded_size((param_count,))
    frames_per_round = 2 if direction == "both" else 1
    items = dict.fromkeys(ITEMS, 0)
    items["model_up"] = payload * rounds * clients
    items["model_down"] = payload * rounds * clients if direction == "both" else 0
    items["framing"] = HEADER_SIZE * frames_per_round * rounds * clients
    per_client = []
    up_ctl, down_ctl = control_bytes()
    for c in range(clients):
        row = ClientBytes(client=c, to_server=(HEADER_SIZE + payload) * rounds)
        if direction == "both":
            row.from_server = (HEADER_SIZE + payload) * rounds
        if include_control:
            row.to_server += up_ctl
            row.from_server += down_ctl
        per_client.append(row)
    if include_control:
        items["control"] = (up_ctl + down_ctl) * clients
    return _finish("fl", items, per_client)


def batch_sizes(shard_size, batch_size):
    full, rest = divmod(shard_size, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def estimate_split_bytes(smashed_shape: Sequence[int], shard_sizes: Sequence[int], batch_size, rounds,
                         client_param_count, sync_mode="relay", order: Optional[Sequence[int]] = None,
                         include_control=False) -> CommEstimate:
    """Walks the same visit plan the split engine executes; the ragged last batch counts at its true size."""
    smashed_shape = tuple(smashed_shape)
    k = len(shard_sizes)
    if order is None:
        order = round_order(k)
    weights = encoded_size((client_param_count,))
    items = dict.fromkeys(ITEMS, 0)
    rows = {c: ClientBytes(client=c) for c in range(k)}

    per_shard = {}
    for c in set(order):
        acts = labels = grads = frames = 0
        for bs in batch_sizes(shard_sizes[c], batch_size):
            acts += encoded_size((bs,) + smashed_shape)
            labels += encoded_size((bs,))
            grads += encoded_size((bs,) + smashed_shape)
            frames += 2
        per_shard[c] = (acts, labels, grads, frames)

    for visit in visit_plan(order, rounds, sync_mode):
        row = rows[visit.client]
        acts, labels, grads, frames = per_shard[visit.client]
        items["activations"] += acts
        items["labels"] += labels
        items["gradients"] += grads
        items["framing"] += HEADER_SIZE * frames
        row.to_server += acts + labels + HEADER_SIZE * frames // 2
        row.from_server += grads + HEADER_SIZE * frames // 2

        start = weights if visit.start == FrameType.CLIENT_WEIGHTS else 0
        end = weights if visit.end == FrameType.CLIENT_WEIGHTS else 0
        items["handoff"] += start
        items["handoff" if sync_mode == "relay" else "eval_upload"] += end
        items["framing"] += 2 * HEADER_SIZE
        row.from_server += HEADER_SIZE + start
        row.to_server += HEADER_SIZE + end

    if include_control:
        up_ctl, down_ctl = control_bytes()
        for c in sorted(set(order)):
            rows[c].to_server += up_ctl
            rows[c].from_server += down_ctl
            items["control"] += up_ctl + down_ctl
    return _finish("split", items, [rows[c] for c in range(k)])


def combine_estimates(protocol, estimates: Sequence[CommEstimate]) -> CommEstimate:
    """Sum item-wise, e.g. the members of an ensemble."""
    items = dict.fromkeys(ITEMS, 0)
    rows = {}
    for est in estimates:
        for name in ITEMS:
            items[name] += getattr(est, name)
        for row in est.per_client:
            acc = rows.setdefault(row.client, ClientBytes(client=row.client))
            acc.to_server += row.to_server
            acc.from_server += row.from_server
    return _finish(protocol, items, [rows[c] for c in sorted(rows)])


def estimate_ensemble_bytes(members: Sequence[Tuple[Sequence[int], int]], shard_sizes: Sequence[int], batch_size,
                            rounds, sync_mode="relay", include_control=False) -> CommEstimate:
    """members: (smashed_shape, client_param_count) per model; model m follows the rotated client order."""
    k = len(shard_sizes)
    parts = [estimate_split_bytes(smashed, shard_sizes, batch_size, rounds, params, sync_mode,
                                  order=round_order(k, rotation=m))
             for m, (smashed, params) in enumerate(members)]
    if include_control:
        up_ctl, down_ctl = control_bytes()
        items = dict.fromkeys(ITEMS, 0)
        items["control"] = (up_ctl + down_ctl) * k
        parts.append(_finish("control", items, [ClientBytes(client=c, to_server=up_ctl, from_server=down_ctl)
                                                for c in range(k)]))
    return combine_estimates("ensemble", parts)
