import json
from typing import List, Optional
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator

from ...errors import PartitionError
from .datasets import Dataset


class PartitionPlan(BaseModel):
    """Per-client ordered sample indices into the training set."""
    model_config = ConfigDict(frozen=True)

    scheme: str
    seed: int
    n: int
    clients: List[List[int]]

    @model_validator(mode="after")
    def check_plan(self):
        seen = set()
        for client_id, indices in enumerate(self.clients):
            if len(indices) < 1:
                raise PartitionError(f"client {client_id} received no samples")
            for index in indices:
                if not 0 <= index < self.n:
                    raise PartitionError(f"client {client_id}: index {index} outside [0, {self.n})")
                if index in seen:
                    raise PartitionError(f"client {client_id}: index {index} assigned twice")
                seen.add(index)
        return self

    @property
    def k(self):
        return len(self.clients)

    @property
    def sizes(self):
        return [len(indices) for indices in self.clients]

    @property
    def total(self):
        return sum(self.sizes)

    def indices(self, client_id):
        return np.asarray(self.clients[client_id], dtype=np.int64)


class PartitionStats(BaseModel):
    scheme: str
    sizes: List[int]
    total: int
    min_size: int
    max_size: int
    global_histogram: List[int]
    histograms: List[List[int]]
    classes_per_client: List[int]
    chi2_from_global: List[float]


def _check_k(dataset, k):
    n = len(dataset)
    if k < 1:
        raise PartitionError(f"need at least one client, got {k}")
    if k > n:
        raise PartitionError(f"cannot split {n} samples across {k} clients")
    return n


def _plan(scheme, seed, n, parts):
    return PartitionPlan(scheme=scheme, seed=seed, n=n, clients=[[int(i) for i in p] for p in parts])


def partition_iid(dataset: Dataset, k, seed) -> PartitionPlan:
    n = _check_k(dataset, k)
    order = np.random.default_rng(seed).permutation(n)
    return _plan("iid", seed, n, np.array_split(order, k))


def imbalanced_sizes(n, k, sigma, rng):
    """Normal(n/k, sigma*n/k) draws, clipped at 1, rounded by largest remainder to sum to n, each >= 1."""
    if sigma < 0:
        raise PartitionError(f"sigma must be >= 0, got {sigma}")
    mean = n / k
    draws = rng.normal(mean, sigma * mean, size=k) if sigma > 0 else np.full(k, mean)
    draws = np.clip(draws, 1.0, None)
    spare = n - k
    quotas = draws / draws.sum() * spare
    sizes = np.floor(quotas).astype(np.int64)
    remainder = spare - int(sizes.sum())
    if remainder:
        order = np.argsort(-(quotas - sizes), kind="stable")
        sizes[order[:remainder]] += 1
    return sizes + 1


def partition_imbalanced(dataset: Dataset, k, sigma, seed) -> PartitionPlan:
    n = _check_k(dataset, k)
    rng = np.random.default_rng(seed)
    sizes = imbalanced_sizes(n, k, sigma, rng)
    order = rng.permutation(n)
    bounds = np.cumsum(sizes)[:-1]
    logger.debug("Imbalanced sizes (sigma={sigma}): {sizes}", sigma=sigma, sizes=sizes.tolist())
    return _plan("imbalanced", seed, n, np.split(order, bounds))


def partition_noniid(dataset: Dataset, k, classes_per_client, seed) -> PartitionPlan:
    """Sort by label, cut k*classes_per_client contiguous shards, deal them round-robin."""
    n = _check_k(dataset, k)
    if not 1 <= classes_per_client <= dataset.class_count:
        raise PartitionError(f"classes_per_client must lie in [1, {dataset.class_count}], got {classes_per_client}")
    shard_count = k * classes_per_client
    if shard_count > n:
        raise PartitionError(f"{shard_count} shards requested from {n} samples")
    shuffled = np.random.default_rng(seed).permutation(n)
    by_label = shuffled[np.argsort(dataset.labels[shuffled], kind="stable")]
    shards = np.array_split(by_label, shard_count)
    parts = []
    for client_id in range(k):
        mine = [shards[client_id + k * j] for j in range(classes_per_client)]
        parts.append(np.concatenate(mine))
    return _plan(f"noniid-{classes_per_client}", seed, n, parts)


def _chi2(observed, expected_share):
    total = observed.sum()
    expected = expected_share * total
    mask = expected > 0
    return float((((observed - expected) ** 2)[mask] / expected[mask]).sum() / max(total, 1))


def partition_stats(plan: PartitionPlan, dataset: Dataset) -> PartitionStats:
    """Sizes, label histograms and a normalised chi-squared distance of each client from the global mix."""
    labels = dataset.labels
    global_hist = np.bincount(labels[np.concatenate([plan.indices(i) for i in range(plan.k)])],
                              minlength=dataset.class_count)
    share = global_hist / global_hist.sum()
    histograms = [np.bincount(labels[plan.indices(i)], minlength=dataset.class_count) for i in range(plan.k)]
    sizes = plan.sizes
    return PartitionStats(
        scheme=plan.scheme,
        sizes=sizes,
        total=plan.total,
        min_size=min(sizes),
        max_size=max(sizes),
        global_histogram=global_hist.tolist(),
        histograms=[h.tolist() for h in histograms],
        classes_per_client=[int((h > 0).sum()) for h in histograms],
        chi2_from_global=[_chi2(h, share) for h in histograms],
    )


def make_plan(dataset: Dataset, k, scheme, seed, sigma=0.5, classes_per_client=1) -> PartitionPlan:
    if scheme == "iid":
        return partition_iid(dataset, k, seed)
    if scheme == "imbalanced":
        return partition_imbalanced(dataset, k, sigma, seed)
    if scheme == "noniid":
        return partition_noniid(dataset, k, classes_per_client, seed)
    raise PartitionError(f"unknown partition scheme '{scheme}'")


def save_plan(plan: PartitionPlan, path):
    with open(path, 'w') as f:
        f.write(plan.model_dump_json(indent=2))


def load_plan(path, expected_n: Optional[int] = None) -> PartitionPlan:
    try:
        with open(path, 'r') as f:
            plan = PartitionPlan.model_validate(json.load(f))
    except (OSError, json.JSONDecodeError) as e:
        raise PartitionError(f"cannot read partition plan {path}: {e}") from e
    if expected_n is not None and plan.n != expected_n:
        raise PartitionError(f"plan {path} was made for {plan.n} samples, dataset has {expected_n}")
    return plan
