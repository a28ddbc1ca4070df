"""Extrapolation diagnostics: directional linearity sweeps and error reports.

A sweep walks rays outward from the training-support boundary, fits a line
to the model's predictions along each ray, and records slope and R^2; far
from the data, well-behaved ReLU models become linear along every
direction, so high R^2 fractions are the quantitative signature.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .numerics import RandomSource, fit_line
from .synthdata import Ball, DomainSpec, HyperCube, LabeledSet, Sphere, in_support

__all__ = [
    "BucketStats",
    "DirectionalSweep",
    "ExtrapolationReport",
    "RayFit",
    "extrapolation_report",
    "mape",
    "mape_details",
    "support_boundary",
    "sweep_directions",
    "sweep_to_csv",
]

# Labels this close to zero are excluded from MAPE (and counted).
MAPE_MIN_ABS = 1e-9

BatchPredictor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RayFit:
    direction: np.ndarray
    anchor: np.ndarray
    slope: float
    intercept: float
    r_squared: float


@dataclass
class DirectionalSweep:
    model_id: str
    domain: DomainSpec
    rays: list[RayFit] = field(default_factory=list)
    n_failed: int = 0

    def fraction_above(self, threshold: float) -> float:
        if not self.rays:
            raise ValueError("sweep has no successful rays")
        return float(np.mean([r.r_squared > threshold for r in self.rays]))

    def slopes(self) -> np.ndarray:
        return np.array([r.slope for r in self.rays])


def support_boundary(spec: DomainSpec, v: np.ndarray) -> np.ndarray:
    """Intersection of the ray along ``v`` with the support boundary."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape != (spec.dim,):
        raise ValueError(f"direction has shape {v.shape}, spec dim is {spec.dim}")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    unit = v / norm
    if isinstance(spec.shape, Sphere):
        return spec.shape.radius * unit
    if isinstance(spec.shape, HyperCube):
        return spec.shape.center + spec.shape.half_width * unit / np.max(np.abs(unit))
    if isinstance(spec.shape, Ball):
        raise ValueError("balls have no sharp boundary scale; use a sphere or cube")
    raise TypeError(f"unknown shape {spec.shape!r}")


def sweep_directions(
    predict: BatchPredictor,
    spec: DomainSpec,
    n_dirs: int = 500,
    n_points: int = 100,
    reach_multiple: float = 10.0,
    rng: Union[RandomSource, np.random.Generator, None] = None,
    model_id: str = "model",
) -> DirectionalSweep:
    """Fit a line to predictions along rays leaving the support.

    Each ray starts at the boundary point for a Gaussian-sampled direction
    and is sampled at n_points+1 equally spaced distances out to
    reach_multiple times the support scale (the default spacing is a tenth
    of the scale).  ``predict`` must map an n x d matrix to an n-vector.
    Rays with non-finite predictions are counted and excluded.
    """
    if n_dirs < 1:
        raise ValueError("need at least one direction")
    if n_points < 2:
        raise ValueError("need at least two points per ray")
    if rng is None:
        rng = RandomSource(0, "sweep")
    g = rng if isinstance(rng, np.random.Generator) else rng.generator()
    scale = spec.shape.radius if isinstance(spec.shape, Sphere) else spec.shape.half_width
    step = reach_multiple * scale / n_points
    xs = step * np.arange(n_points + 1)

    sweep = DirectionalSweep(model_id=model_id, domain=spec)
    for _ in range(n_dirs):
        v = g.standard_normal(spec.dim)
        norm = np.linalg.norm(v)
        while norm == 0.0:
            v = g.standard_normal(spec.dim)
            norm = np.linalg.norm(v)
        v = v / norm
        anchor = support_boundary(spec, v)
        points = anchor + xs[:, None] * v
        preds = np.asarray(predict(points), dtype=np.float64).ravel()
        if preds.shape != xs.shape or not np.all(np.isfinite(preds)):
            sweep.n_failed += 1
            continue
        line = fit_line(xs, preds)
        sweep.rays.append(
            RayFit(
                direction=v,
                anchor=anchor,
                slope=line.slope,
                intercept=line.intercept,
                r_squared=line.r_squared,
            )
        )
    if not sweep.rays:
        raise RuntimeError("every ray failed with non-finite predictions")
    return sweep


def sweep_to_csv(sweep: DirectionalSweep, path: str) -> None:
    d = sweep.domain.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"v{i}" for i in range(d)] + [f"anchor{i}" for i in range(d)]
        writer.writerow(header + ["slope", "intercept", "r_squared"])
        for ray in sweep.rays:
            row = [repr(float(x)) for x in ray.direction] + [
                repr(float(x)) for x in ray.anchor
            ]
            writer.writerow(row + [repr(ray.slope), repr(ray.intercept), repr(ray.r_squared)])


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------


def mape_details(preds: np.ndarray, labels: np.ndarray) -> tuple[float, int, int]:
    """(MAPE over usable labels, n_used, n_excluded near zero)."""
    preds = np.asarray(preds, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if preds.shape != labels.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {labels.shape}")
    usable = np.abs(labels) >= MAPE_MIN_ABS
    n_excluded = int((~usable).sum())
    if not usable.any():
        raise ValueError("all labels are within the near-zero exclusion band")
    value = float(np.mean(np.abs((labels[usable] - preds[usable]) / labels[usable])))
    return value, int(usable.sum()), n_excluded


def mape(preds: np.ndarray, labels: np.ndarray) -> float:
    """Mean |A - F| / |A|, excluding labels below the near-zero threshold."""
    return mape_details(preds, labels)[0]


@dataclass
class BucketStats:
    count: int
    mse: Optional[float]
    mape: Optional[float]
    mape_excluded: int

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mse": self.mse,
            "mape": self.mape,
            "mape_excluded": self.mape_excluded,
        }


def _bucket(preds: np.ndarray, labels: np.ndarray) -> BucketStats:
    n = len(labels)
    if n == 0:
        return BucketStats(count=0, mse=None, mape=None, mape_excluded=0)
    diff = preds - labels
    mse_val = float(diff @ diff / n)
    usable = np.abs(labels) >= MAPE_MIN_ABS
    if usable.any():
        mape_val = float(np.mean(np.abs((labels[usable] - preds[usable]) / labels[usable])))
    else:
        mape_val = None
    return BucketStats(count=n, mse=mse_val, mape=mape_val, mape_excluded=int((~usable).sum()))


@dataclass
class ExtrapolationReport:
    overall: BucketStats
    in_support: BucketStats
    out_of_support: BucketStats
    ood_empty: bool

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "in_support": self.in_support.to_dict(),
            "out_of_support": self.out_of_support.to_dict(),
            "ood_empty": self.ood_empty,
        }


def extrapolation_report(
    predict: BatchPredictor,
    test: LabeledSet,
    train_spec: DomainSpec,
) -> ExtrapolationReport:
    """Errors overall and split by training-support membership.

    The out-of-support bucket is the extrapolation error proper: test
    points that the training distribution could never have produced.
    """
    preds = np.asarray(predict(test.inputs), dtype=np.float64).ravel()
    if preds.shape != (test.n,):
        raise ValueError("predictor output shape does not match the test set")
    inside = in_support(train_spec, test.inputs)
    return ExtrapolationReport(
        overall=_bucket(preds, test.labels),
        in_support=_bucket(preds[inside], test.labels[inside]),
        out_of_support=_bucket(preds[~inside], test.labels[~inside]),
        ood_empty=bool(np.all(inside)),
    )
