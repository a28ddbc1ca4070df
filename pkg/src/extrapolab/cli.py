"""Command-line entry points and the declarative experiment runner.

A run is described by a small TOML file (kind, seed, output directory,
params table), executed deterministically, and written out as CSV/JSON
plus a manifest with a content hash per file.  Re-running the same config
and seed reproduces the metric files byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import tomli

from . import graphgen
from .diagnostics import sweep_to_csv
from .figures import (
    FIGURE_TAGS,
    read_records_csv,
    reproduce_figure,
    run_activation_study,
    run_direction_sweep,
    run_linear_geometry,
    run_mlp_extrap,
    run_ntk_exact,
    train_mlp_study,
    write_records_csv,
)
from .gnn import run_max_degree_experiment, run_shortest_path_experiment
from .mlp import TrainConfig, save_checkpoint
from .nbody import run_nbody_comparison, run_nbody_experiment
from .numerics import RandomSource
from .synthdata import (
    Ball,
    DomainSpec,
    HyperCube,
    Sphere,
    make_labeled,
    save_csv,
)

__all__ = ["ExperimentConfig", "RunResult", "load_config", "main", "run"]

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "mlp-extrap",
    "linear-geometry",
    "activation-study",
    "ntk-exact",
    "direction-sweep",
    "max-degree",
    "shortest-path",
    "nbody",
)

# Kinds whose drivers take a ``seeds`` tuple and parallelize per seed.
_SEED_GRID_KINDS = (
    "mlp-extrap",
    "linear-geometry",
    "activation-study",
    "max-degree",
    "shortest-path",
    "nbody",
)

_TRAIN_CFG_KEYS = (
    "learning_rate",
    "lr_decay",
    "decay_every",
    "batch_size",
    "weight_decay",
    "epochs",
    "optimizer",
)

_FAMILIES = {
    "path": graphgen.Path,
    "cycle": graphgen.Cycle,
    "ladder": graphgen.Ladder,
    "tree": graphgen.Tree,
    "four_regular": graphgen.FourRegular,
    "complete": graphgen.Complete,
    "expander": graphgen.Expander,
    "general": graphgen.General,
    "gnp": graphgen.Gnp,
}


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 1."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    out: str = ""
    schema_version: int = SCHEMA_VERSION
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind: unknown experiment kind {self.kind!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed: must be an integer")
        if not isinstance(self.params, dict):
            raise ConfigError("params: must be a table")


@dataclass
class RunResult:
    config_hash: str
    records: list
    wall_time_s: float
    paths: list
    summary: dict


def load_config(config_path: str) -> ExperimentConfig:
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    known = {"kind", "seed", "out", "schema_version", "params"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    if "kind" not in raw:
        raise ConfigError("kind: required field missing")
    return ExperimentConfig(
        kind=raw["kind"],
        seed=raw.get("seed", 0),
        out=raw.get("out", f"runs/{raw['kind']}"),
        schema_version=raw.get("schema_version", SCHEMA_VERSION),
        params=raw.get("params", {}),
    )


def config_hash(cfg: ExperimentConfig) -> str:
    """Platform-stable identity: output location is deliberately excluded."""
    payload = {
        "kind": cfg.kind,
        "params": cfg.params,
        "schema_version": cfg.schema_version,
        "seed": cfg.seed,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir: Path, files: Sequence[tuple[str, Path]], partial: bool = False) -> Path:
    entries = [
        {"path": p.name, "role": role, "sha256": _sha256_file(p)}
        for role, p in sorted(files, key=lambda item: item[1].name)
    ]
    manifest = {"schema_version": SCHEMA_VERSION, "partial": partial, "files": entries}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _pop_train_cfg(params: dict) -> Optional[TrainConfig]:
    found = {k: params.pop(k) for k in list(params) if k in _TRAIN_CFG_KEYS}
    return TrainConfig(**found) if found else None


def _family_from_params(params: dict) -> Optional[graphgen.GraphFamily]:
    name = params.pop("train_family", None)
    if name is None:
        return None
    if name not in _FAMILIES:
        raise ConfigError(f"train_family: unknown family {name!r}")
    if name == "gnp":
        return graphgen.Gnp(p=params.pop("p", 0.5))
    return _FAMILIES[name]()


def _run_cell(kind: str, seeds: tuple, seed: int, params: dict) -> list[dict]:
    """One worker job; must stay importable for process pools."""
    params = dict(params)
    if kind == "mlp-extrap":
        cfg = _pop_train_cfg(params)
        if cfg is not None:
            params["train_cfg"] = cfg
        return run_mlp_extrap(seeds=seeds, **params)
    if kind == "linear-geometry":
        cfg = _pop_train_cfg(params)
        if cfg is not None:
            params["train_cfg"] = cfg
        return run_linear_geometry(seeds=seeds, **params)
    if kind == "activation-study":
        return run_activation_study(seeds=seeds, **params)
    if kind == "max-degree":
        family = _family_from_params(params)
        if family is not None:
            params["train_family"] = family
        return run_max_degree_experiment(seeds=seeds, **params)
    if kind == "shortest-path":
        family = _family_from_params(params)
        if family is not None:
            params["train_family"] = family
        return run_shortest_path_experiment(seeds=seeds, **params)
    if kind == "nbody":
        mode = params.pop("mode", "comparison")
        if mode == "comparison":
            return run_nbody_comparison(seeds=seeds, **params)
        if mode == "single":
            return run_nbody_experiment(seeds=seeds, **params)
        raise ConfigError(f"mode: expected 'comparison' or 'single', got {mode!r}")
    if kind == "ntk-exact":
        return run_ntk_exact(seed=seed, **params)
    raise ConfigError(f"kind: unknown experiment kind {kind!r}")


def _execute(cfg: ExperimentConfig, threads: int) -> tuple[list[dict], dict]:
    params = dict(cfg.params)
    if cfg.kind == "direction-sweep":
        train_cfg = _pop_train_cfg(params)
        if train_cfg is not None:
            params["train_cfg"] = train_cfg
        result = run_direction_sweep(seed=cfg.seed, **params)
        sweep = result.pop("sweep")
        records = [
            {
                "task": "direction_sweep",
                "seed": cfg.seed,
                "ray": i,
                "slope": ray.slope,
                "intercept": ray.intercept,
                "r_squared": ray.r_squared,
            }
            for i, ray in enumerate(sweep.rays)
        ]
        return records, result

    if cfg.kind == "ntk-exact":
        records = _run_cell(cfg.kind, (), cfg.seed, params)
        return records, {"max_error": max(r["max_error"] for r in records)}

    seeds = params.pop("seeds", None)
    if seeds is None:
        seeds = [cfg.seed, cfg.seed + 1, cfg.seed + 2]
    seeds = [int(s) for s in seeds]
    jobs = [(cfg.kind, (s,), cfg.seed, params) for s in sorted(seeds)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_cell, *job) for job in jobs]
            chunks = [f.result() for f in futures]
    else:
        chunks = [_run_cell(*job) for job in jobs]
    records = [record for chunk in chunks for record in chunk]
    return records, {"n_records": len(records), "seeds": seeds}


def run(config_path: str, threads: int = 1) -> RunResult:
    """Execute a configured experiment and write its output bundle."""
    cfg = load_config(config_path)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        records, summary = _execute(cfg, threads)
    except ConfigError:
        raise
    except Exception:
        write_manifest(out_dir, [], partial=True)
        raise
    wall = time.perf_counter() - start

    metrics_path = out_dir / "metrics.csv"
    write_records_csv(str(metrics_path), records)
    result_payload = {
        "config_hash": config_hash(cfg),
        "kind": cfg.kind,
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "summary": summary,
        "wall_time_s": wall,
    }
    result_path = out_dir / "result.json"
    result_path.write_text(json.dumps(result_payload, indent=2, sort_keys=True) + "\n")
    files = [("metrics", metrics_path), ("summary", result_path)]
    write_manifest(out_dir, files)
    return RunResult(
        config_hash=config_hash(cfg),
        records=records,
        wall_time_s=wall,
        paths=[str(p) for _, p in files],
        summary=summary,
    )


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # map argparse failures to exit code 1
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="extrapolab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="runs/out")
    common.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("gen", parents=[common], help="generate a dataset file")
    p.add_argument("--target", choices=("quadratic", "cos", "sqrt", "l1", "linear", "tanh"))
    p.add_argument("--family", choices=sorted(_FAMILIES))
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--shape", choices=("cube", "sphere", "ball"), default="cube")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n-lo", type=int, default=20)
    p.add_argument("--n-hi", type=int, default=30)
    p.add_argument("--p", type=float, default=0.5)

    p = sub.add_parser("train-mlp", parents=[common], help="train one feed-forward model")
    p.add_argument("--target", default="quadratic")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--train-scale", type=float, default=1.0)
    p.add_argument("--test-multiple", type=float, default=5.0)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--activation", default="relu")
    p.add_argument("--init", default="default")
    p.add_argument("--epochs", type=int, default=250)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--n-train", type=int, default=2000)

    p = sub.add_parser("train-gnn", parents=[common], help="train graph models on a task")
    p.add_argument("--task", choices=("max-degree", "shortest-path"), required=True)
    p.add_argument("--family", choices=sorted(_FAMILIES), default="general")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--readout", default="max")
    p.add_argument("--aggregation", default="min")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--width", type=int, default=None)

    p = sub.add_parser("ntk", parents=[common], help="closed-form kernel regression table")
    p.add_argument("--d", default="2,8")
    p.add_argument("--transforms", type=int, default=20)
    p.add_argument("--n-test", type=int, default=2000)

    p = sub.add_parser("sweep", parents=[common], help="directional linearity sweep")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n-dirs", type=int, default=500)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--epochs", type=int, default=250)

    p = sub.add_parser("nbody", parents=[common], help="orbit-dynamics representation study")
    p.add_argument("--scheme", choices=("original", "improved", "both"), default="both")
    p.add_argument("--ood", choices=("mass", "distance", "both"), default="both")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--videos", type=int, default=80)

    p = sub.add_parser("figure", parents=[common], help="reproduce one figure grid")
    p.add_argument("--tag", choices=FIGURE_TAGS, required=True)
    p.add_argument("--seeds", default="0,1,2")

    p = sub.add_parser("report", parents=[common], help="summarize a finished run")
    p.add_argument("run_dir")

    p = sub.add_parser("run", parents=[common], help="execute a TOML experiment config")
    p.add_argument("config")
    return parser


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"seeds: expected comma-separated integers, got {text!r}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen(args) -> int:
    out = _out_dir(args)
    if (args.target is None) == (args.family is None):
        raise ConfigError("gen: provide exactly one of --target or --family")
    if args.target is not None:
        from .figures import make_target

        rs = RandomSource(args.seed, "gen")
        target = make_target(args.target, args.d, rs.child("target"))
        shape = {
            "cube": HyperCube(half_width=args.scale),
            "sphere": Sphere(radius=args.scale),
            "ball": Ball(max_radius=args.scale),
        }[args.shape]
        spec = DomainSpec(shape=shape, dim=args.d)
        if args.target == "sqrt":
            spec = DomainSpec(
                shape=HyperCube(half_width=args.scale, center=args.scale), dim=args.d
            )
        ls = make_labeled(target, spec, args.n, rs.child("data"))
        path = out / "data.csv"
        save_csv(ls, str(path))
    else:
        family = graphgen.Gnp(p=args.p) if args.family == "gnp" else _FAMILIES[args.family]()
        g = RandomSource(args.seed, "gen-graphs").generator()
        graphs = [
            graphgen.sample_graph(family, (args.n_lo, args.n_hi), g) for _ in range(args.n)
        ]
        path = out / "graphs.jsonl"
        graphgen.write_jsonl(str(path), graphs)
    write_manifest(out, [("dataset", path)])
    print(path)
    return 0


def _cmd_train_mlp(args) -> int:
    out = _out_dir(args)
    from .figures import cube_spec, make_target

    target = make_target(args.target, args.d, RandomSource(args.seed, f"target-{args.target}"))
    record, model = train_mlp_study(
        target,
        cube_spec(args.d, args.train_scale),
        cube_spec(args.d, args.train_scale * args.test_multiple),
        args.seed,
        n_train=args.n_train,
        width=args.width,
        depth=args.depth,
        activation=args.activation,
        init_scheme=args.init,
        train_cfg=TrainConfig(
            learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs
        ),
    )
    record["task"] = "train_mlp"
    metrics = out / "metrics.csv"
    write_records_csv(str(metrics), [record])
    ckpt = out / "model.npz"
    save_checkpoint(model, str(ckpt))
    write_manifest(out, [("metrics", metrics), ("checkpoint", ckpt)])
    print(json.dumps(record, sort_keys=True))
    return 0


def _cmd_train_gnn(args) -> int:
    out = _out_dir(args)
    seeds = _parse_seeds(args.seeds)
    family = graphgen.Gnp(p=args.p) if args.family == "gnp" else _FAMILIES[args.family]()
    extra = {}
    if args.epochs is not None:
        extra["epochs"] = args.epochs
    if args.n_train is not None:
        extra["n_train"] = args.n_train
    if args.width is not None:
        extra["width"] = args.width
    if args.task == "max-degree":
        records = run_max_degree_experiment(
            train_family=family, readout=args.readout, seeds=seeds, **extra
        )
    else:
        records = run_shortest_path_experiment(
            train_family=family, aggregation=args.aggregation, seeds=seeds, **extra
        )
    metrics = out / "metrics.csv"
    write_records_csv(str(metrics), records)
    write_manifest(out, [("metrics", metrics)])
    for record in records:
        print(f"{record['split']}: seed={record['seed']} mape={record['mape']:.4f}")
    return 0


def _cmd_ntk(args) -> int:
    out = _out_dir(args)
    dims = tuple(int(tok) for tok in str(args.d).split(","))
    records = run_ntk_exact(dims=dims, n_transforms=args.transforms, n_test=args.n_test,
                            seed=args.seed)
    metrics = out / "metrics.csv"
    write_records_csv(str(metrics), records)
    write_manifest(out, [("metrics", metrics)])
    print(f"max_error={max(r['max_error'] for r in records):.3e}")
    return 0


def _cmd_sweep(args) -> int:
    out = _out_dir(args)
    result = run_direction_sweep(
        d=args.d,
        n_dirs=args.n_dirs,
        seed=args.seed,
        width=args.width,
        train_cfg=TrainConfig(epochs=args.epochs),
    )
    sweep = result.pop("sweep")
    rays = out / "rays.csv"
    sweep_to_csv(sweep, str(rays))
    summary = out / "result.json"
    summary.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    write_manifest(out, [("rays", rays), ("summary", summary)])
    print(f"fraction_above={result['fraction_above']:.4f}")
    return 0


def _cmd_nbody(args) -> int:
    out = _out_dir(args)
    seeds = _parse_seeds(args.seeds)
    budget = {"epochs": args.epochs, "n_videos_train": args.videos}
    if args.scheme == "both" or args.ood == "both":
        records = run_nbody_comparison(seeds=seeds, **budget)
    else:
        records = run_nbody_experiment(scheme=args.scheme, ood=args.ood, seeds=seeds, **budget)
    metrics = out / "metrics.csv"
    write_records_csv(str(metrics), records)
    write_manifest(out, [("metrics", metrics)])
    for record in records:
        print(
            f"{record['scheme']}/{record['split']}: seed={record['seed']} "
            f"mape={record['mape']:.4f}"
        )
    return 0


def _cmd_figure(args) -> int:
    out = _out_dir(args)
    records = reproduce_figure(args.tag, seeds=_parse_seeds(args.seeds))
    metrics = out / f"{args.tag}.csv"
    write_records_csv(str(metrics), records)
    write_manifest(out, [("figure-data", metrics)])
    print(metrics)
    return 0


def _cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    metrics = run_dir / "metrics.csv"
    if not metrics.is_file():
        raise ConfigError(f"report: no metrics.csv under {run_dir}")
    records = read_records_csv(str(metrics))
    groups: dict[tuple, list[float]] = {}
    for record in records:
        cell = record.get("ood_mape")
        if cell is None:
            cell = record.get("mape")
        if not isinstance(cell, (int, float)):
            continue
        value = float(cell)
        key = tuple(
            f"{k}={v}"
            for k, v in sorted(record.items())
            if k not in ("mape", "ood_mape", "id_mape", "train_mape", "mse", "ood_mse",
                         "seed", "best_epoch", "epochs_to_best", "diverged")
        )
        groups.setdefault(key, []).append(value)
    for key in sorted(groups):
        values = groups[key]
        label = " ".join(key)
        print(f"{label}: mean={np.mean(values):.4f} min={min(values):.4f} "
              f"max={max(values):.4f} n={len(values)}")
    return 0


def _cmd_run(args) -> int:
    result = run(args.config, threads=args.threads)
    print(json.dumps({"config_hash": result.config_hash, "paths": result.paths,
                      "summary": result.summary}, sort_keys=True))
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train-mlp": _cmd_train_mlp,
    "train-gnn": _cmd_train_gnn,
    "ntk": _cmd_ntk,
    "sweep": _cmd_sweep,
    "nbody": _cmd_nbody,
    "figure": _cmd_figure,
    "report": _cmd_report,
    "run": _cmd_run,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
