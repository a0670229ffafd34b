import argparse
import asyncio
import json
import os
import sys

import nanoid
import pandas as pd
from jinja2 import Environment, FileSystemLoader
from loguru import logger
from termcolor import colored

from .config import ExperimentConfig, build_workload, config_from_dict, parse_config
from .errors import ConfigError, DatasetError, HarnessError, PartitionError
from .lib import plugins
from .lib.data import partition_stats, save_plan
from .lib.harness import Workload, run_local
from .lib.logging import setup_logging
from .lib.metrics import (
    best_round,
    estimate_ensemble_bytes,
    estimate_fl_bytes,
    estimate_split_bytes,
    export_metrics,
    metrics_path,
)
from .lib.providers.services import service_manager
from .lib.transport import accept_clients, say_bye, send_hello, tcp_connect, tcp_listen
from .lib.zoo import count_params, split_point

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

SERVICES = {
    "fl": ("run_fl", "fl_client"),
    "split": ("run_split", "split_client"),
    "ensemble": ("run_ensemble", "ensemble_client"),
}
SWEEP_AXES = ("clients", "cut", "conv_depth")

templates = Environment(loader=FileSystemLoader(os.path.join(os.path.dirname(__file__), "templates")),
                        trim_blocks=True)


def render_summary(**context):
    return templates.get_template("summary.j2").render(**context)


def _services(config: ExperimentConfig):
    manifest = plugins.load_plugin_manifest(config.plugin_manifest)
    plugins.load(manifest)
    run_name, client_name = SERVICES[config.mode]
    if config.mode not in plugins.enabled_plugins(manifest) or not service_manager.has(run_name):
        raise ConfigError(f"mode '{config.mode}' is not available (plugin disabled)", key="mode")
    return run_name, client_name


async def _coordinate(config, workload, run_name, endpoints):
    return await service_manager.execute(run_name, config.engine_config(), workload, endpoints)


async def run_experiment(config: ExperimentConfig, workload: Workload = None, role=None, listen=None,
                         connect=None, client_id=None, connect_retries=50):
    """Run one experiment in the requested role. Returns the coordinator's series (None for a client)."""
    run_name, client_name = _services(config)
    workload = workload or build_workload(config)
    engine_config = config.engine_config()

    if role == "client":
        if client_id is None or not 0 <= client_id < config.clients:
            raise ConfigError(f"client role needs --client-id in [0, {config.clients})", key="client_id")
        endpoint = await tcp_connect(connect or config.transport.address(), retries=connect_retries)
        try:
            await send_hello(endpoint, client_id)
            await service_manager.execute(client_name, engine_config, workload, endpoint, client_id)
        finally:
            await endpoint.close()
        return None

    if role == "coordinator":
        listener = await tcp_listen(listen or config.transport.address())
        try:
            accepted = [await listener.accept(timeout=600) for _ in range(config.clients)]
        finally:
            await listener.close()
        try:
            endpoints = await accept_clients(accepted, config.clients)
            result = await _coordinate(config, workload, run_name, endpoints)
            await say_bye(endpoints)
            return result
        finally:
            for endpoint in accepted:
                await endpoint.close()

    async def client_fn(cid, endpoint):
        await service_manager.execute(client_name, engine_config, workload, endpoint, cid)

    async def coordinator_fn(endpoints):
        return await _coordinate(config, workload, run_name, endpoints)

    return await run_local(config.clients, coordinator_fn, client_fn, transport=config.transport.kind,
                           listen=listen or config.transport.address())


def write_series(config: ExperimentConfig, result):
    """Per-model CSV and JSON metrics files; returns {model or None: series}."""
    series_by_model = result if isinstance(result, dict) else {None: result}
    for model, series in series_by_model.items():
        for fmt in ("csv", "json"):
            export_metrics(series, metrics_path(config.output, model, fmt), fmt)
    return series_by_model


def cmd_run(config: ExperimentConfig, role=None, listen=None, connect=None, client_id=None, connect_retries=50):
    run_id = nanoid.generate(size=10)
    with logger.contextualize(run_id=run_id):
        logger.info("Run {run_id}: mode {mode}, {k} clients, transport {transport}, role {role}",
                    run_id=run_id, mode=config.mode, k=config.clients, transport=config.transport.kind,
                    role=role or "local")
        result = asyncio.run(run_experiment(config, role=role, listen=listen, connect=connect,
                                            client_id=client_id, connect_retries=connect_retries))
        if role == "client":
            print(colored(f"client {client_id} finished", "green"))
            return EXIT_OK
        runs = []
        for model, series in write_series(config, result).items():
            if not series:
                continue
            best = best_round(series)
            runs.append({
                "model": model,
                "accuracy": series[-1].accuracy,
                "best_round": best[0],
                "best_accuracy": best[1],
                "total_bytes": series[-1].cum_tx + series[-1].cum_rx,
                "wall_ms": sum(r.wall_ms for r in series),
                "session_ms": sum(r.session_ms for r in series),
            })
        print(colored(render_summary(run_id=run_id, mode=config.mode, runs=runs).rstrip(), "green"))
    return EXIT_OK


def cmd_partition(config: ExperimentConfig, output=None):
    workload = build_workload(config)
    stem = output or config.output
    os.makedirs(os.path.dirname(os.path.abspath(stem)), exist_ok=True)
    plan_path = f"{stem}_plan.json"
    stats_path = f"{stem}_stats.json"
    save_plan(workload.plan, plan_path)
    stats = partition_stats(workload.plan, workload.train)
    with open(stats_path, "w", encoding="utf-8") as f:
        f.write(stats.model_dump_json(indent=2))
    print(colored(f"{stats.scheme}: {workload.plan.k} clients, sizes {stats.sizes}", "green"))
    print(f"plan -> {plan_path}\nstats -> {stats_path}")
    return EXIT_OK


def estimates_for(config: ExperimentConfig, workload: Workload = None, include_control=False):
    """FL and SplitNN estimates under the config's model, partition and schedule."""
    workload = workload or build_workload(config)
    shard_sizes = workload.plan.sizes
    spec, cut = workload.member(0)
    point = split_point(spec, cut)
    fl = estimate_fl_bytes(count_params(spec), config.rounds, config.clients, "both", include_control)
    if config.mode == "ensemble":
        members = []
        for m in range(len(workload.specs)):
            m_point = split_point(*workload.member(m))
            members.append((m_point.smashed_shape, m_point.client_params))
        split = estimate_ensemble_bytes(members, shard_sizes, config.batch_size, config.rounds,
                                        config.sync_mode, include_control)
    else:
        split = estimate_split_bytes(point.smashed_shape, shard_sizes, config.batch_size, config.rounds,
                                     point.client_params, config.sync_mode, include_control=include_control)
    return fl, split


def cmd_estimate(config: ExperimentConfig, output=None):
    fl, split = estimates_for(config)
    print(render_summary(estimates=[("FL", fl), ("SplitNN", split)]).rstrip())
    if output:
        os.makedirs(os.path.dirname(os.path.abspath(output)), exist_ok=True)
        with open(output, "w", encoding="utf-8") as f:
            json.dump({"fl": fl.model_dump(), "split": split.model_dump()}, f, indent=2)
    return EXIT_OK


def sweep_config(config: ExperimentConfig, axis, value) -> ExperimentConfig:
    data = config.model_dump()
    if axis == "clients":
        data["clients"] = int(value)
    elif axis == "cut":
        data["model"]["cut_index"] = int(value)
    elif axis == "conv_depth":
        data["model"]["conv_depth"] = int(value)
    else:
        raise ConfigError(f"unknown sweep axis '{axis}'", key="axis")
    return config_from_dict(data)


SWEEP_COLUMNS = ["value", "params", "client_params", "smashed", "fl_total", "fl_per_client",
                 "split_total", "split_activations", "split_gradients", "split_handoff", "split_eval_upload",
                 "split_per_client"]


def sweep_rows(config: ExperimentConfig, axis, values):
    rows = []
    for value in values:
        swept = sweep_config(config, axis, value)
        workload = build_workload(swept)
        fl, split = estimates_for(swept, workload)
        spec, cut = workload.member(0)
        point = split_point(spec, cut)
        rows.append({
            "value": value,
            "params": count_params(spec),
            "client_params": point.client_params,
            "smashed": "x".join(str(d) for d in point.smashed_shape),
            "fl_total": fl.grand_total,
            "fl_per_client": fl.per_client[0].total,
            "split_total": split.grand_total,
            "split_activations": split.activations,
            "split_gradients": split.gradients,
            "split_handoff": split.handoff,
            "split_eval_upload": split.eval_upload,
            "split_per_client": split.grand_total // swept.clients,
        })
    return rows


def cmd_sweep(config: ExperimentConfig, axis, values, output=None):
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}", key="axis")
    rows = sweep_rows(config, axis, values)
    print("\t".join([axis] + SWEEP_COLUMNS[1:]))
    for row in rows:
        print("\t".join(str(row[c]) for c in SWEEP_COLUMNS))
    if output:
        os.makedirs(os.path.dirname(os.path.abspath(output)), exist_ok=True)
        pd.DataFrame(rows, columns=SWEEP_COLUMNS).to_csv(output, columns=SWEEP_COLUMNS, index=False,
                                                         lineterminator="\n")
    return EXIT_OK


def cmd_plugins(manifest_path=None, enable=(), disable=(), save=None):
    """List enabled plugins and the entry points they provide; optionally write a toggled manifest."""
    manifest = plugins.load_plugin_manifest(manifest_path)
    for names, state in ((enable, True), (disable, False)):
        for name in names:
            if not plugins.toggle_plugin_state(manifest, name, state):
                raise ConfigError(f"no plugin named '{name}'", key="plugins")
    plugins.load(manifest)
    docs = service_manager.describe()
    for name in plugins.enabled_plugins(manifest):
        print(colored(name, "green"))
        for service_name in plugins.plugin_services(manifest, name):
            providers = ", ".join(service_manager.plugins_for(service_name)) or "unregistered"
            doc = (docs.get(service_name) or "").strip().splitlines()
            print(f"  {service_name:<16} [{providers}] {doc[0] if doc else ''}".rstrip())
    if save:
        plugins.save_plugin_manifest(manifest, save)
        print(f"manifest -> {save}")
    return EXIT_OK


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="splitbench", description="FL vs SplitNN experiment harness")
    parser.add_argument("--log-level", default=None, help="Override the config's log level")
    parser.add_argument("--log-dir", default=None, help="Also write JSON-lines logs to this directory")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Train and write per-round metrics")
    run.add_argument("--config", required=True)
    run.add_argument("--role", choices=["coordinator", "client"], default=None)
    run.add_argument("--listen", default=None, help="host:port the coordinator listens on")
    run.add_argument("--connect", default=None, help="host:port of the coordinator")
    run.add_argument("--client-id", type=int, default=None)
    run.add_argument("--connect-retries", type=int, default=50, help="Connection attempts 0.2 s apart")

    partition = sub.add_parser("partition", help="Write the partition plan and its statistics")
    partition.add_argument("--config", required=True)
    partition.add_argument("--output", default=None, help="File stem for <stem>_plan.json and <stem>_stats.json")

    estimate = sub.add_parser("estimate", help="Analytical FL and SplitNN byte counts")
    estimate.add_argument("--config", required=True)
    estimate.add_argument("--output", default=None, help="Write both estimates as JSON")

    sweep = sub.add_parser("sweep", help="Estimator table along one axis")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sweep.add_argument("--values", type=int, nargs="+", required=True)
    sweep.add_argument("--output", default=None, help="Write the table as CSV")

    manifest = sub.add_parser("plugins", help="List plugins and their entry points")
    manifest.add_argument("--manifest", default=None, help="Plugin manifest to read (default: packaged)")
    manifest.add_argument("--enable", nargs="+", default=[], metavar="PLUGIN")
    manifest.add_argument("--disable", nargs="+", default=[], metavar="PLUGIN")
    manifest.add_argument("--save", default=None, help="Write the resulting manifest here")
    return parser.parse_args(argv)


def dispatch(args) -> int:
    if args.command == "plugins":
        setup_logging(args.log_level or "WARNING", args.log_dir)
        return cmd_plugins(args.manifest, args.enable, args.disable, args.save)
    config = parse_config(args.config)
    setup_logging(args.log_level or config.log_level, args.log_dir)
    if args.command == "run":
        if args.role is not None and config.transport.kind != "tcp":
            raise ConfigError("--role needs transport.kind tcp", key="transport.kind")
        return cmd_run(config, args.role, args.listen, args.connect, args.client_id, args.connect_retries)
    if args.command == "partition":
        return cmd_partition(config, args.output)
    if args.command == "estimate":
        return cmd_estimate(config, args.output)
    return cmd_sweep(config, args.axis, args.values, args.output)


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        code = dispatch(args)
    except (ConfigError, DatasetError, PartitionError) as e:
        logger.error("{kind}: {error}", kind=type(e).__name__, error=e)
        print(colored(f"error: {e}", "red"), file=sys.stderr)
        code = EXIT_CONFIG
    except (HarnessError, OSError) as e:
        logger.exception("Run failed")
        print(colored(f"error: {e}", "red"), file=sys.stderr)
        code = EXIT_RUNTIME
    return code


if __name__ == "__main__":
    sys.exit(main())
