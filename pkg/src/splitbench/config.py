"""Experiment configuration: YAML on disk, pydantic models in memory.

Every section rejects unknown keys, and every validation failure surfaces as a ConfigError
naming the offending key.
"""
import os
from typing import List, Literal, Optional, Tuple

import yaml
from loguru import logger
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveInt,
    ValidationError,
    confloat,
    model_validator,
)

from .errors import ConfigError
from .lib.data import load_csv, load_plan, make_plan, synth_sequences, train_test_split
from .lib.harness import Workload
from .lib.zoo import ModelSpec, build_conv1d_classifier, cut_after_block

MODES = ("fl", "split", "ensemble")


class ModelProfile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    conv_depth: int = Field(4, ge=4, le=8)
    channels: PositiveInt = 16
    kernel: PositiveInt = 7
    classes: PositiveInt = 5
    input_shape: Tuple[PositiveInt, PositiveInt] = (1, 124)
    cut_index: int = Field(2, ge=1, le=3)
    pool: NonNegativeInt = 2
    pool_every: NonNegativeInt = 2
    hidden: PositiveInt = 128

    def build(self) -> ModelSpec:
        return build_conv1d_classifier(self.conv_depth, self.channels, self.kernel, self.input_shape,
                                       self.classes, pool=self.pool, pool_every=self.pool_every,
                                       hidden=self.hidden)

    def raw_cut(self, spec: ModelSpec) -> int:
        """Layers kept on the client for `cut_index` conv blocks."""
        return cut_after_block(spec, self.cut_index)


class ModelSection(ModelProfile):
    ensemble: List[ModelProfile] = []

    def profiles(self, mode) -> List[ModelProfile]:
        base = ModelProfile(**self.model_dump(exclude={"ensemble"}))
        if mode != "ensemble":
            return [base]
        return [base] + list(self.ensemble)


class SynthSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: PositiveInt = 2000
    noise_std: NonNegativeFloat = 1.8


class DatasetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    csv: Optional[str] = None
    synth: Optional[SynthSection] = None
    test_fraction: confloat(gt=0.0, lt=1.0) = 0.5

    @model_validator(mode="after")
    def one_source(self):
        if self.csv is not None and self.synth is not None:
            raise ConfigError("give either csv or synth, not both", key="dataset")
        if self.csv is None and self.synth is None:
            self.synth = SynthSection()
        return self


class PartitionSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scheme: Literal["iid", "imbalanced", "noniid"] = "iid"
    sigma: NonNegativeFloat = 0.5
    classes_per_client: PositiveInt = 1
    plan_file: Optional[str] = None


class TransportSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["loopback", "tcp"] = "loopback"
    addresses: List[str] = []

    def address(self):
        return self.addresses[0] if self.addresses else "127.0.0.1:0"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["fl", "split", "ensemble"]
    clients: PositiveInt = 5
    rounds: PositiveInt = 100
    local_epochs: PositiveInt = 1
    batch_size: PositiveInt = 32
    lr: confloat(ge=0.0) = 0.001
    seed: NonNegativeInt = 0
    sync_mode: Literal["relay", "none"] = "relay"
    output: str = "results/metrics"
    optimizer: Literal["adam", "sgd"] = "adam"
    eval_batch_size: PositiveInt = 256
    server_delay_ms: NonNegativeFloat = 0.0
    # unset: timed over TCP, zeroed on loopback so repeated runs write identical files
    wall_clock: Optional[bool] = None
    log_level: Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"] = "INFO"
    plugin_manifest: Optional[str] = None
    model: ModelSection = ModelSection()
    dataset: DatasetSection = DatasetSection()
    partition: PartitionSection = PartitionSection()
    transport: TransportSection = TransportSection()

    @model_validator(mode="after")
    def check_mode(self):
        if self.mode in ("split", "ensemble") and self.local_epochs != 1:
            raise ConfigError(f"{self.mode} trains exactly one local epoch per visit, got {self.local_epochs}",
                              key="local_epochs")
        if self.mode == "ensemble":
            members = 1 + len(self.model.ensemble)
            if members > self.clients:
                raise ConfigError(f"{members} models cannot share {self.clients} clients", key="model.ensemble")
        elif self.model.ensemble:
            logger.warning("model.ensemble is ignored in {mode} mode", mode=self.mode)
        if self.transport.kind == "tcp" and len(self.transport.addresses) > 1:
            raise ConfigError("a single coordinator address is expected", key="transport.addresses")
        if self.wall_clock is None:
            self.wall_clock = self.transport.kind == "tcp"
        return self

    def fl_config(self):
        from .coreplugins.fl.engine import FlConfig
        return FlConfig(clients=self.clients, rounds=self.rounds, local_epochs=self.local_epochs,
                        batch_size=self.batch_size, lr=self.lr, seed=self.seed, optimizer=self.optimizer,
                        eval_batch_size=self.eval_batch_size, wall_clock=self.wall_clock)

    def split_config(self):
        from .coreplugins.split.engine import SplitConfig
        return SplitConfig(clients=self.clients, rounds=self.rounds, batch_size=self.batch_size, lr=self.lr,
                           seed=self.seed, optimizer=self.optimizer, sync_mode=self.sync_mode,
                           eval_batch_size=self.eval_batch_size, server_delay_ms=self.server_delay_ms,
                           wall_clock=self.wall_clock)

    def engine_config(self):
        return self.fl_config() if self.mode == "fl" else self.split_config()

    def model_specs(self):
        """(specs, raw cut indices), one per model trained in this mode."""
        specs, cuts = [], []
        for profile in self.model.profiles(self.mode):
            spec = profile.build()
            specs.append(spec)
            cuts.append(profile.raw_cut(spec))
        return specs, cuts


def _error_key(error):
    return ".".join(str(part) for part in error["loc"]) or None


def config_from_dict(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        key = _error_key(first)
        if first["type"] == "extra_forbidden":
            raise ConfigError("unknown key", key=key) from None
        if first["type"] == "missing":
            raise ConfigError("required key is missing", key=key) from None
        raise ConfigError(first["msg"], key=key) from None


def parse_config(path) -> ExperimentConfig:
    """Read a YAML experiment file; defaults fill every key it leaves out."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    return config_from_dict(data if data is not None else {})


def load_dataset(config: ExperimentConfig):
    profile = config.model
    if config.dataset.csv is not None:
        dataset = load_csv(config.dataset.csv, profile.classes)
        if dataset.input_shape != tuple(profile.input_shape):
            raise ConfigError(f"dataset samples have shape {dataset.input_shape}, model expects "
                              f"{tuple(profile.input_shape)}", key="model.input_shape")
        return dataset
    channels, length = profile.input_shape
    if channels != 1:
        raise ConfigError("synthetic sequences have a single channel", key="model.input_shape")
    synth = config.dataset.synth
    return synth_sequences(synth.n, profile.classes, length, synth.noise_std, config.seed)


def build_workload(config: ExperimentConfig) -> Workload:
    """Data, partition and architectures; deterministic in the config so every process agrees."""
    specs, cuts = config.model_specs()
    train, test = train_test_split(load_dataset(config), config.dataset.test_fraction, config.seed)
    section = config.partition
    if section.plan_file:
        plan = load_plan(section.plan_file, expected_n=len(train))
    else:
        plan = make_plan(train, config.clients, section.scheme, config.seed, sigma=section.sigma,
                         classes_per_client=section.classes_per_client)
    if plan.k != config.clients:
        raise ConfigError(f"partition plan has {plan.k} clients, config has {config.clients}", key="clients")
    return Workload(specs, cuts, train, test, plan)
