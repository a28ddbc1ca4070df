"""Desk-scale experiment grids producing plot-ready CSV records.

Each driver trains small models on synthetic tasks and reports MAPE/MSE
records split into interpolation and extrapolation buckets.  The grids are
deliberately scaled down from a full hyperparameter search; every driver
accepts overrides so wider sweeps remain possible.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import graphgen
from .diagnostics import extrapolation_report, mape, sweep_directions
from .gnn import run_max_degree_experiment, run_shortest_path_experiment
from .mlp import MlpModel, TrainConfig, init_mlp, predict_batch, train
from .nbody import run_nbody_comparison
from .ntk import KernelSpec, exact_extrapolation_check
from .numerics import RandomSource, random_orthogonal
from .synthdata import (
    Cos,
    LabeledSet,
    Quadratic,
    DomainSpec,
    FixFirst,
    HyperCube,
    L1,
    Linear,
    NegativeFirstK,
    Sqrt,
    Tanh,
    TargetFunction,
    make_labeled,
    make_splits,
    random_quadratic,
)

__all__ = [
    "FIGURE_TAGS",
    "reproduce_figure",
    "run_direction_sweep",
    "make_target",
    "run_l1_ntk_study",
    "run_linear_geometry",
    "run_mlp_extrap",
    "run_ntk_exact",
    "run_ushape_sweep",
    "train_mlp_study",
    "write_records_csv",
]

FIGURE_TAGS = ("fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b", "fig7")

MLP_TARGETS = ("quadratic", "cos", "sqrt", "l1", "linear")

# Activation-study input ranges: (train half-width, test half-width).
_ACT_RANGES = {"quadratic": (1.0, 5.0), "cos": (100.0, 200.0), "tanh": (100.0, 200.0)}

USHAPE_P_GRID = (0.05, 0.1, 0.3, 0.5, 0.8, 1.0)

# Sparse Gnp cells reject most draws on connectivity; allow long retries.
USHAPE_MAX_TRIES = 500_000


def make_target(
    kind: str, d: int, rng: RandomSource, linear_span: float = 5.0
) -> TargetFunction:
    """Target instance for a study cell.

    ``linear_span`` is the half-width of the widest cube the linear target
    will be evaluated on; the offset is sized past it so labels stay away
    from zero and MAPE is not dominated by sign-crossing rows.
    """
    g = rng.generator()
    if kind == "quadratic":
        return random_quadratic(d, g)
    if kind == "cos":
        return Cos()
    if kind == "sqrt":
        return Sqrt()
    if kind == "l1":
        return L1()
    if kind == "tanh":
        return Tanh()
    if kind == "linear":
        # Redraw until every coefficient is well away from zero so each
        # direction carries signal.
        beta = g.uniform(-1.0, 1.0, size=d)
        while np.min(np.abs(beta)) < 0.5:
            beta = g.uniform(-1.0, 1.0, size=d)
        b = linear_span * float(np.sum(np.abs(beta))) + float(g.uniform(1.0, 2.0))
        return Linear(beta=beta, b=b)
    raise ValueError(f"unknown target kind {kind!r}")


def train_mlp_study(
    target: TargetFunction,
    train_spec: DomainSpec,
    test_spec: DomainSpec,
    seed: int,
    n_train: int = 2000,
    n_val: int = 500,
    n_test: int = 2000,
    width: int = 128,
    depth: int = 2,
    activation: str = "relu",
    init_scheme: str = "default",
    train_cfg: Optional[TrainConfig] = None,
    center_labels: bool = False,
) -> tuple[dict, MlpModel]:
    """Train one MLP and report train/interpolation/extrapolation MAPE.

    ``depth`` counts weight layers, so depth 2 means one hidden layer.
    The interpolation test set is drawn fresh from the training domain;
    the extrapolation figure comes from the out-of-support bucket of the
    wide test set.  ``center_labels`` subtracts the training-label mean
    before fitting and adds it back at prediction time, so the network
    spends no capacity on a constant component; the reported metrics are
    always against the raw labels.
    """
    rs = RandomSource(seed, "mlp-study")
    train_set, val_set, test_set = make_splits(
        target, train_spec, test_spec, n_train, n_val, n_test, rs
    )
    interp = make_labeled(target, train_set.domain, n_test, rs.child("interp"))
    sizes = [train_spec.dim] + [width] * (depth - 1) + [1]
    model = init_mlp(sizes, activation, init_scheme, rng=rs.child("init"))
    cfg = replace(train_cfg or TrainConfig(), seed=seed)
    shift = float(train_set.labels.mean()) if center_labels else 0.0
    fit_train, fit_val = train_set, val_set
    if center_labels:
        fit_train = LabeledSet(
            train_set.inputs, train_set.labels - shift, train_set.domain, target, {}
        )
        fit_val = LabeledSet(val_set.inputs, val_set.labels - shift, val_set.domain, target, {})
    trained, history = train(model, fit_train, fit_val, cfg)

    def predict(x: np.ndarray) -> np.ndarray:
        return predict_batch(trained, x) + shift

    report = extrapolation_report(predict, test_set, train_set.domain)
    record = {
        "target": target.kind,
        "d": train_spec.dim,
        "seed": seed,
        "width": width,
        "depth": depth,
        "activation": activation,
        "init": init_scheme,
        "train_mape": mape(predict(train_set.inputs), train_set.labels),
        "id_mape": mape(predict(interp.inputs), interp.labels),
        "ood_mape": report.out_of_support.mape,
        "ood_mse": report.out_of_support.mse,
        "best_epoch": history.best_epoch,
        "diverged": history.diverged,
        "label_shift": shift,
    }
    return record, trained


def cube_spec(d: int, half_width: float, restriction=None) -> DomainSpec:
    return DomainSpec(shape=HyperCube(half_width=half_width), dim=d, restriction=restriction)


def run_mlp_extrap(
    targets: Sequence[str] = MLP_TARGETS,
    d: int = 2,
    train_scale: float = 1.0,
    test_multiple: float = 5.0,
    seeds: Sequence[int] = (0, 1, 2),
    **overrides,
) -> list[dict]:
    """Feed-forward extrapolation study across simple target families."""
    records = []
    for kind in targets:
        for seed in seeds:
            target = make_target(
                kind, d, RandomSource(seed, f"target-{kind}"), train_scale * test_multiple
            )
            record, _ = train_mlp_study(
                target,
                cube_spec(d, train_scale),
                cube_spec(d, train_scale * test_multiple),
                seed,
                **overrides,
            )
            record["task"] = "mlp_extrap"
            records.append(record)
    return records


def run_l1_ntk_study(
    seeds: Sequence[int] = (0,),
    learning_rates: Sequence[float] = (1e-2, 5e-3),
    widths: Sequence[int] = (128,),
    d: int = 2,
    **overrides,
) -> list[dict]:
    """L1 target with standard-normal init and output rescaling.

    A small grid over learning rate and width; absolute-value targets are
    exactly representable by one hidden ReLU layer, so some cell should
    extrapolate well.
    """
    records = []
    for lr in learning_rates:
        for width in widths:
            for seed in seeds:
                target = L1()
                record, _ = train_mlp_study(
                    target,
                    cube_spec(d, 1.0),
                    cube_spec(d, 5.0),
                    seed,
                    width=width,
                    init_scheme="ntk",
                    train_cfg=TrainConfig(learning_rate=lr),
                    **overrides,
                )
                record["task"] = "l1_ntk"
                record["learning_rate"] = lr
                records.append(record)
    return records


def run_linear_geometry(
    geometries: Sequence[str] = ("all", "fix1", "neg-d"),
    d: int = 2,
    train_scale: float = 5.0,
    test_multiple: float = 2.0,
    seeds: Sequence[int] = (0, 1, 2),
    **overrides,
) -> list[dict]:
    """Linear target under direction-restricted training supports.

    ``all`` covers every direction; ``fix1`` pins the first coordinate;
    ``neg-d`` restricts every coordinate to be negative.
    """
    records = []
    for geometry in geometries:
        if geometry == "all":
            restriction = None
        elif geometry == "fix1":
            restriction = FixFirst(0.1)
        elif geometry == "neg-d":
            restriction = NegativeFirstK(d)
        else:
            raise ValueError(f"unknown geometry {geometry!r}")
        for seed in seeds:
            target = make_target(
                "linear", d, RandomSource(seed, "target-linear"), train_scale * test_multiple
            )
            record, _ = train_mlp_study(
                target,
                cube_spec(d, train_scale, restriction),
                cube_spec(d, train_scale * test_multiple),
                seed,
                center_labels=True,
                **overrides,
            )
            record["task"] = "linear_geometry"
            record["geometry"] = geometry
            records.append(record)
    return records


def run_activation_study(
    seeds: Sequence[int] = (0, 1, 2),
    n_train: int = 2000,
    **overrides,
) -> list[dict]:
    """Matched and mismatched activation/target combinations.

    Cells: tanh activation on tanh and quadratic targets; quadratic
    activation on a quadratic target at depths 2 and 4; cosine activation
    on the cosine target.  Batch size is fixed at 128 for the whole study.
    """
    cells = [
        ("tanh", "tanh", 1, 2, TrainConfig(batch_size=128)),
        ("tanh", "quadratic", 1, 2, TrainConfig(batch_size=128)),
        ("quadratic", "quadratic", 2, 2, TrainConfig(learning_rate=1e-3, batch_size=128)),
        ("quadratic", "quadratic", 2, 4, TrainConfig(learning_rate=1e-3, batch_size=128)),
        ("cos", "cos", 1, 2, TrainConfig(batch_size=128)),
    ]
    records = []
    for activation, target_kind, d, depth, cfg in cells:
        train_scale, test_scale = _ACT_RANGES[target_kind]
        for seed in seeds:
            target = make_target(target_kind, d, RandomSource(seed, f"target-{target_kind}"))
            record, _ = train_mlp_study(
                target,
                cube_spec(d, train_scale),
                cube_spec(d, test_scale),
                seed,
                n_train=n_train,
                depth=depth,
                activation=activation,
                train_cfg=cfg,
                **overrides,
            )
            record["task"] = "activation_study"
            records.append(record)
    return records


def run_ntk_exact(
    dims: Sequence[int] = (2, 8),
    n_transforms: int = 20,
    scale: float = 1.0,
    n_test: int = 2000,
    test_multiple: float = 10.0,
    seed: int = 0,
) -> list[dict]:
    """Kernel regression on orthogonal 2d-point training sets.

    For each random orthogonal transform the max absolute test error over
    OOD points is recorded; the whole table should sit at rounding level.
    """
    records = []
    for d in dims:
        rs = RandomSource(seed, f"ntk-exact-d{d}")
        g = rs.generator()
        for idx in range(n_transforms):
            q = random_orthogonal(d, g)
            beta = g.uniform(-1.0, 1.0, size=d)
            err = exact_extrapolation_check(
                d, beta, q, scale, n_test, scale * test_multiple, g, KernelSpec()
            )
            records.append(
                {"task": "ntk_exact", "d": d, "transform": idx, "seed": seed, "max_error": err}
            )
    return records


def run_direction_sweep(
    d: int = 2,
    train_scale: float = 1.0,
    n_dirs: int = 500,
    seed: int = 0,
    r_squared_threshold: float = 0.99,
    target: Optional[TargetFunction] = None,
    n_train: int = 4000,
    **overrides,
) -> dict:
    """Train one ReLU MLP on a quadratic and fit lines along OOD rays.

    The default target is the identity quadratic sum(x_i^2): its learned
    directional slopes stay bounded away from zero, so the r-squared of a
    ray measures linearity rather than noise on a flat signal.  Pass an
    indefinite quadratic to see flat-direction bands instead.
    """
    if target is None:
        target = Quadratic(a=np.eye(d))
    train_spec = cube_spec(d, train_scale)
    record, model = train_mlp_study(
        target, train_spec, cube_spec(d, 5.0 * train_scale), seed, n_train=n_train, **overrides
    )

    def predict(x: np.ndarray) -> np.ndarray:
        return predict_batch(model, x)

    sweep = sweep_directions(
        predict, train_spec, n_dirs=n_dirs, rng=RandomSource(seed, "sweep"), model_id="mlp"
    )
    fraction = sweep.fraction_above(r_squared_threshold)
    return {
        "task": "direction_sweep",
        "seed": seed,
        "n_dirs": n_dirs,
        "n_failed": sweep.n_failed,
        "fraction_above": fraction,
        "threshold": r_squared_threshold,
        "train_mape": record["train_mape"],
        "sweep": sweep,
    }


def run_ushape_sweep(
    p_grid: Sequence[float] = USHAPE_P_GRID,
    seeds: Sequence[int] = (0,),
    **overrides,
) -> list[dict]:
    """Shortest-path structure sweep over training-graph density."""
    records = []
    for p in p_grid:
        records.extend(
            run_shortest_path_experiment(
                train_family=graphgen.Gnp(p=p),
                aggregation="min",
                weight_extrapolation=False,
                seeds=seeds,
                max_tries=USHAPE_MAX_TRIES,
                **overrides,
            )
        )
    return records


# ---------------------------------------------------------------------------
# figure dispatch
# ---------------------------------------------------------------------------


def _fig5a(seeds: Sequence[int]) -> list[dict]:
    records = []
    for readout in ("max", "sum"):
        records.extend(run_max_degree_experiment(readout=readout, seeds=seeds))
    for aggregation in ("min", "sum"):
        records.extend(run_shortest_path_experiment(aggregation=aggregation, seeds=seeds))
    return records


def _fig6a(seeds: Sequence[int]) -> list[dict]:
    families = (
        graphgen.Path(),
        graphgen.Cycle(),
        graphgen.Ladder(),
        graphgen.Tree(),
        graphgen.FourRegular(),
        graphgen.Complete(),
        graphgen.Expander(),
        graphgen.General(),
    )
    records = []
    for family in families:
        records.extend(run_max_degree_experiment(train_family=family, seeds=seeds))
    return records


def _sweep_records(seeds: Sequence[int]) -> list[dict]:
    result = run_direction_sweep(seed=seeds[0])
    sweep = result.pop("sweep")
    rows = []
    for ray in sweep.rays:
        rows.append(
            {
                "task": "direction_sweep",
                "seed": seeds[0],
                "slope": ray.slope,
                "intercept": ray.intercept,
                "r_squared": ray.r_squared,
            }
        )
    return rows


def reproduce_figure(tag: str, seeds: Sequence[int] = (0, 1, 2)) -> list[dict]:
    """Run the desk-scale grid behind one figure tag; returns records."""
    if tag == "fig4a":
        return run_mlp_extrap(seeds=seeds)
    if tag == "fig4b":
        return run_linear_geometry(seeds=seeds)
    if tag == "fig5a":
        return _fig5a(seeds)
    if tag == "fig5b":
        return run_nbody_comparison(seeds=seeds)
    if tag == "fig6a":
        return _fig6a(seeds[:1])
    if tag == "fig6b":
        return run_ushape_sweep(seeds=seeds[:1])
    if tag == "fig7":
        return run_activation_study(seeds=seeds)
    raise ValueError(f"unknown figure tag {tag!r}; expected one of {FIGURE_TAGS}")


def write_records_csv(path: str, records: Sequence[dict]) -> None:
    """Deterministic CSV: sorted union of keys, repr-formatted floats."""
    if not records:
        raise ValueError("no records to write")
    fields = sorted({key for record in records for key in record})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for record in records:
            row = []
            for key in fields:
                value = record.get(key, "")
                row.append(repr(value) if isinstance(value, float) else value)
            writer.writerow(row)


def _coerce_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_records_csv(path: str) -> list[dict]:
    """Rows as dicts with numeric cells parsed back; empty cells are None."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: _coerce_cell(v) for k, v in row.items()} for row in reader]
