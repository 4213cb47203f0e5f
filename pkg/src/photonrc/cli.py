"""Command-line experiment runner.

    photonrc <subcommand> --config cfg.json [--seed S] [--out DIR] [--set key=value ...]
    photonrc dump-states --config cfg.json --out states.csv
    photonrc replay manifest.json [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The output directory defaults to ``$PHOTONRC_OUT`` or ``./results``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import SCHEMA_VERSION, ConfigError, load_raw, parse_override, resolve
from .core import NumericalError, ParameterError, RandomSource, TimeSeries
from .deep import CascadeSpec, DelayLayer, build_cascade, cascade_runner, tolerance_experiment
from .delay import (
    DEFAULT_OVERSAMPLE,
    DelayParams,
    delay_runner,
    integrate_dde,
    make_mask,
    multiplex,
    run_delay_reservoir,
    settled_oversample,
)
from .esn import EsnParams, build_esn, esn_run, esn_runner
from .io import TOLERANCE_COLUMNS, atomic_write_text, metrics_csv, rows_to_csv, states_csv, trajectory_csv
from .readout import RidgeConfig
from .tasks import TaskSpec, evaluate

EXPERIMENTS = ("esn", "delay", "cascade", "memory-capacity", "narma", "mackey-glass", "tolerance")
FIXED_TASK = {"memory-capacity": "memory_capacity", "narma": "narma10", "mackey-glass": "mackey_glass"}
FIXED_FAMILY = {"esn": "esn", "delay": "delay"}
OUT_ENV = "PHOTONRC_OUT"

ESN_KEYS = ("n_nodes", "spectral_radius", "input_scaling", "bias_scale", "activation")
DELAY_KEYS = (
    "n_virtual",
    "node_separation",
    "response_ratio",
    "feedback_gain",
    "input_gain",
    "phase_offset",
    "desync_shift",
    "mask_kind",
    "regime",
    "oversample",
    "history",
)


def esn_params(cfg: dict) -> EsnParams:
    return EsnParams(
        n_nodes=cfg["n_nodes"],
        spectral_radius_target=cfg["spectral_radius"],
        input_scaling=cfg["input_scaling"],
        bias_scale=cfg["bias_scale"],
        activation=cfg["activation"],
    )


def delay_params(cfg: dict) -> DelayParams:
    return DelayParams(
        n_virtual=cfg["n_virtual"],
        node_separation=cfg["node_separation"],
        response_time=cfg["node_separation"] / cfg["response_ratio"],
        feedback_gain=cfg["feedback_gain"],
        input_gain=cfg["input_gain"],
        phase_offset=cfg["phase_offset"],
        desync_shift=cfg["desync_shift"],
    )


def task_spec(cfg: dict) -> TaskSpec:
    return TaskSpec(
        kind=cfg["task"],
        length=cfg["length"],
        washout=cfg["washout"],
        train_fraction=cfg["train_fraction"],
        test_fraction=cfg["test_fraction"],
        max_lag=cfg["max_lag"],
        horizon=cfg["horizon"],
        mg_dt=cfg["mg_dt"],
        mg_subsample=cfg["mg_subsample"],
    )


def cascade_spec(cfg: dict) -> CascadeSpec:
    if cfg["family"] == "esn":
        first = esn_params(cfg)
        # downstream ESN layers read the full state of the layer before
        rest = EsnParams(
            n_nodes=cfg["n_nodes"],
            spectral_radius_target=cfg["spectral_radius"],
            input_scaling=cfg["input_scaling"],
            bias_scale=cfg["bias_scale"],
            input_dim=cfg["n_nodes"],
            activation=cfg["activation"],
        )
        layers = [first] + [rest] * (cfg["n_layers"] - 1)
    else:
        lay = DelayLayer(delay_params(cfg), None, cfg["mask_kind"], cfg["regime"], cfg["oversample"], cfg["history"])
        layers = [lay] * cfg["n_layers"]
    return CascadeSpec(tuple(layers), cfg["coupling_scale"], readout_layers=cfg["readout_layers"])


def reservoir_meta(cfg: dict, sub: str) -> dict:
    keys = ESN_KEYS if cfg["family"] == "esn" else DELAY_KEYS
    params = {k: cfg[k] for k in keys}
    if sub == "cascade":
        params.update(n_layers=cfg["n_layers"], coupling_scale=cfg["coupling_scale"])
    width = cfg["n_nodes"] if cfg["family"] == "esn" else cfg["n_virtual"]
    if sub == "cascade" and cfg["readout_layers"] == "all":
        width *= cfg["n_layers"]
    kind = f"cascade-{cfg['family']}" if sub == "cascade" else cfg["family"]
    return {"kind": kind, "n_nodes": width, "params": json.dumps(params, sort_keys=True, separators=(",", ":"))}


def build_runner(cfg: dict, sub: str, rng: RandomSource):
    if sub == "cascade":
        return cascade_runner(build_cascade(cascade_spec(cfg), rng.child("cascade")))
    if cfg["family"] == "esn":
        return esn_runner(build_esn(esn_params(cfg), rng.child("reservoir")))
    p = delay_params(cfg)
    mask = make_mask(p.n_virtual, cfg["mask_kind"], rng.child("mask"), p.node_separation)
    return delay_runner(p, mask, cfg["regime"], cfg["oversample"], cfg["history"])


def prepare(sub: str, raw: dict) -> dict:
    """Pin subcommand-implied keys, then validate."""
    raw = dict(raw)
    for fixed, table in (("task", FIXED_TASK), ("family", FIXED_FAMILY)):
        if sub in table:
            if fixed in raw and raw[fixed] != table[sub]:
                raise ConfigError(f"subcommand {sub!r} requires {fixed}={table[sub]!r}, got {raw[fixed]!r}", fixed)
            raw[fixed] = table[sub]
    return resolve(raw)


def run_experiment(sub: str, cfg: dict) -> tuple[str, str]:
    """Returns (file name, CSV text) of the metrics table."""
    if sub == "tolerance":
        task = task_spec(cfg)
        res = tolerance_experiment(
            cascade_spec(cfg),
            task,
            cfg["sigmas"],
            cfg["n_seeds"],
            RandomSource(cfg["seeds"][0]),
            RidgeConfig(cfg["ridge_lambda"]),
            cfg["perturbation_mode"],
        )
        rows = [[r["sigma"], r["median_nmse"], r["n_seeds"]] for r in res.rows()]
        return "tolerance.csv", rows_to_csv(TOLERANCE_COLUMNS, rows)

    task = task_spec(cfg)
    meta = reservoir_meta(cfg, sub)
    records = []
    for seed in cfg["seeds"]:
        rng = RandomSource(seed)
        runner = build_runner(cfg, sub, rng)
        records.append(evaluate(task, runner, RidgeConfig(cfg["ridge_lambda"]), rng.child("task"), meta))
    return "metrics.csv", metrics_csv(records)


def dump_input(cfg: dict, seed: int) -> TimeSeries:
    if cfg["dump_length"] < 1:
        raise ConfigError("dump_length must be >= 1 (empty input series)", "dump_length")
    return TimeSeries(RandomSource(seed).child("dump-input").uniform(0.0, 0.5, cfg["dump_length"]))


def dump_text(cfg: dict, seed: int) -> str:
    """State matrix (or raw DDE trajectory) for one seed, as CSV text."""
    inputs = dump_input(cfg, seed)
    rng = RandomSource(seed)
    if cfg["family"] == "esn":
        r = build_esn(esn_params(cfg), rng.child("reservoir"))
        return states_csv(esn_run(r, inputs, washout=0))
    p = delay_params(cfg)
    mask = make_mask(p.n_virtual, cfg["mask_kind"], rng.child("mask"), p.node_separation)
    if cfg["dump_trajectory"]:
        if cfg["regime"] != "dde":
            raise ConfigError("dump_trajectory needs regime='dde'", "dump_trajectory")
        os_ = cfg["oversample"] or max(DEFAULT_OVERSAMPLE, settled_oversample(p))
        traj = integrate_dde(p, multiplex(inputs, mask, p.input_gain, os_), cfg["history"])
        return trajectory_csv(traj)
    states = run_delay_reservoir(p, inputs, mask, cfg["regime"], cfg["oversample"], cfg["history"])
    return states_csv(states)


def manifest(sub: str, cfg: dict) -> str:
    doc = {
        "manifest_version": 1,
        "package_version": __version__,
        "subcommand": sub,
        "seeds": cfg["seeds"],
        "config": cfg,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _config_from_args(args, sub: str) -> dict:
    raw = load_raw(args.config)
    for item in args.set or []:
        k, v = parse_override(item)
        raw[k] = v
    if args.seed is not None:
        raw["seeds"] = [args.seed]
    return prepare(sub, raw)


def _out_dir(out: str | None) -> Path:
    return Path(out or os.environ.get(OUT_ENV) or "results")


def _dump(cfg: dict, target: Path) -> None:
    atomic_write_text(target, dump_text(cfg, cfg["seeds"][0]))
    atomic_write_text(target.with_name(target.stem + ".manifest.json"), manifest("dump-states", cfg))
    print(target)


def _experiment(sub: str, cfg: dict, out: Path) -> None:
    name, text = run_experiment(sub, cfg)
    atomic_write_text(out / name, text)
    if cfg["dump_states"] and sub != "tolerance":
        for seed in cfg["seeds"]:
            atomic_write_text(out / f"states_seed{seed}.csv", dump_text(cfg, seed))
    atomic_write_text(out / "manifest.json", manifest(sub, cfg))
    print(out / name)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="photonrc", description="Photonic reservoir computing experiments")
    ap.add_argument("--version", action="version", version=__version__)
    subs = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("dump-states",):
        p = subs.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config or run manifest")
        p.add_argument("--seed", type=int, help="replace the seeds list with this one seed")
        p.add_argument("--out", help="output directory (dump-states: output CSV file)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p = subs.add_parser("replay", help="re-run an experiment from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    p = subs.add_parser("default-config", help="print a minimal config")
    p.add_argument("subcommand", choices=EXPERIMENTS + ("dump-states",))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "default-config":
            print(json.dumps({"schema_version": SCHEMA_VERSION, "seeds": [0]}, indent=2))
            return 0
        if args.command == "replay":
            try:
                with open(args.manifest, encoding="utf-8") as fh:
                    doc = json.load(fh)
                sub, raw = doc["subcommand"], doc["config"]
            except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"cannot read manifest {args.manifest}: {exc}") from exc
            if sub == "dump-states":
                _dump(prepare(sub, raw), _out_dir(args.out) / "states.csv")
                return 0
            if sub not in EXPERIMENTS:
                raise ConfigError(f"manifest names unknown subcommand {sub!r}", "subcommand")
            _experiment(sub, prepare(sub, raw), _out_dir(args.out))
            return 0
        sub = args.command
        cfg = _config_from_args(args, sub)
        if sub == "dump-states":
            _dump(cfg, Path(args.out) if args.out else _out_dir(None) / "states.csv")
            return 0
        _experiment(sub, cfg, _out_dir(args.out))
        return 0
    except (ConfigError, ParameterError) as exc:
        key = getattr(exc, "key", None)
        print(f"config error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
