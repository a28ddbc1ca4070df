"""Synthetic regression data: target functions, domain geometries, splits.

Targets cover the standard ablation set (linear, quadratic, cos, sqrt, L1,
tanh).  Domains are hypercubes, spheres, and balls, optionally restricted so
that some directions never appear in training (first coordinate fixed, or
first k coordinates sign-constrained).  Restrictions are realized by
construction on cubes and by rejection sampling on spheres and balls.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .numerics import RandomSource

__all__ = [
    "Ball",
    "Cos",
    "DomainSpec",
    "FixFirst",
    "HyperCube",
    "L1",
    "LabeledSet",
    "Linear",
    "NegativeFirstK",
    "PositiveFirstK",
    "Quadratic",
    "Sphere",
    "Sqrt",
    "Tanh",
    "eval_target",
    "eval_target_batch",
    "in_support",
    "load_csv",
    "make_splits",
    "sample_domain",
    "save_csv",
]

# Boundary tolerance for membership checks; supports are closed sets.
MEMBERSHIP_TOL = 1e-9

# Rejection sampling aborts below this acceptance rate (pathological specs).
MIN_ACCEPT_RATE = 1e-4


def _gen(rng: Union[RandomSource, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


# ---------------------------------------------------------------------------
# target functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Quadratic:
    """y = x'Ax."""

    a: np.ndarray

    kind = "quadratic"


@dataclass(frozen=True)
class Cos:
    """y = sum_i cos(2*pi*x_i)."""

    kind = "cos"


@dataclass(frozen=True)
class Sqrt:
    """y = sum_i sqrt(x_i); defined only for nonnegative inputs."""

    kind = "sqrt"


@dataclass(frozen=True)
class L1:
    """y = sum_i |x_i|."""

    kind = "l1"


@dataclass(frozen=True, eq=False)
class Linear:
    """y = beta'x + b."""

    beta: np.ndarray
    b: float = 0.0

    kind = "linear"


@dataclass(frozen=True)
class Tanh:
    """y = sum_i tanh(x_i)."""

    kind = "tanh"


TargetFunction = Union[Quadratic, Cos, Sqrt, L1, Linear, Tanh]


def random_quadratic(d: int, rng: Union[RandomSource, np.random.Generator]) -> Quadratic:
    """Quadratic target with A entries uniform on [-1, 1]."""
    g = _gen(rng)
    return Quadratic(a=g.uniform(-1.0, 1.0, size=(d, d)))


def eval_target_batch(f: TargetFunction, x: np.ndarray) -> np.ndarray:
    """Evaluate a target on every row of ``x``; returns an n-vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected n x d matrix, got shape {x.shape}")
    if isinstance(f, Quadratic):
        a = np.asarray(f.a, dtype=np.float64)
        if a.shape != (x.shape[1], x.shape[1]):
            raise ValueError(f"A is {a.shape}, inputs are {x.shape[1]}-dimensional")
        return ((x @ a) * x).sum(axis=1)
    if isinstance(f, Cos):
        return np.cos(2.0 * np.pi * x).sum(axis=1)
    if isinstance(f, Sqrt):
        if np.any(x < 0.0):
            raise ValueError("sqrt target evaluated at a negative coordinate")
        return np.sqrt(x).sum(axis=1)
    if isinstance(f, L1):
        return np.abs(x).sum(axis=1)
    if isinstance(f, Linear):
        beta = np.asarray(f.beta, dtype=np.float64)
        if beta.shape != (x.shape[1],):
            raise ValueError(f"beta is {beta.shape}, inputs are {x.shape[1]}-dimensional")
        return x @ beta + f.b
    if isinstance(f, Tanh):
        return np.tanh(x).sum(axis=1)
    raise TypeError(f"unknown target function {f!r}")


def eval_target(f: TargetFunction, x: np.ndarray) -> float:
    """Scalar target value at a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a d-vector, got shape {x.shape}")
    return float(eval_target_batch(f, x[None, :])[0])


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperCube:
    """[center-a, center+a]^d; center 0 except for nonnegative sqrt domains."""

    half_width: float
    center: float = 0.0

    kind = "cube"


@dataclass(frozen=True)
class Sphere:
    radius: float

    kind = "sphere"


@dataclass(frozen=True)
class Ball:
    max_radius: float

    kind = "ball"


Shape = Union[HyperCube, Sphere, Ball]


@dataclass(frozen=True)
class FixFirst:
    """First coordinate pinned to a constant (default 0.1)."""

    value: float = 0.1

    kind = "fix_first"


@dataclass(frozen=True)
class PositiveFirstK:
    k: int

    kind = "positive_first_k"


@dataclass(frozen=True)
class NegativeFirstK:
    k: int

    kind = "negative_first_k"


Restriction = Union[FixFirst, PositiveFirstK, NegativeFirstK]


@dataclass(frozen=True)
class DomainSpec:
    shape: Shape
    dim: int
    restriction: Optional[Restriction] = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        size = _shape_scale(self.shape)
        if size <= 0.0:
            raise ValueError(f"domain size must be positive, got {size}")
        r = self.restriction
        if isinstance(r, (PositiveFirstK, NegativeFirstK)) and not 1 <= r.k <= self.dim:
            raise ValueError(f"restriction k={r.k} out of range for dim {self.dim}")


def _shape_scale(shape: Shape) -> float:
    if isinstance(shape, HyperCube):
        return shape.half_width
    if isinstance(shape, Sphere):
        return shape.radius
    if isinstance(shape, Ball):
        return shape.max_radius
    raise TypeError(f"unknown shape {shape!r}")


def _sample_cube(spec: DomainSpec, n: int, g: np.random.Generator) -> np.ndarray:
    cube = spec.shape
    lo = cube.center - cube.half_width
    hi = cube.center + cube.half_width
    x = g.uniform(lo, hi, size=(n, spec.dim))
    r = spec.restriction
    if r is None:
        return x
    if isinstance(r, FixFirst):
        if not lo <= r.value <= hi:
            raise ValueError(f"fixed value {r.value} outside cube [{lo}, {hi}]")
        x[:, 0] = r.value
        return x
    if isinstance(r, PositiveFirstK):
        sub_lo = max(lo, 0.0)
        if sub_lo >= hi:
            raise ValueError("cube has no nonnegative part in restricted coordinates")
        x[:, : r.k] = g.uniform(sub_lo, hi, size=(n, r.k))
        return x
    if isinstance(r, NegativeFirstK):
        sub_hi = min(hi, 0.0)
        if lo >= sub_hi:
            raise ValueError("cube has no nonpositive part in restricted coordinates")
        x[:, : r.k] = g.uniform(lo, sub_hi, size=(n, r.k))
        return x
    raise TypeError(f"unknown restriction {r!r}")


def _unit_directions(n: int, d: int, g: np.random.Generator) -> np.ndarray:
    v = g.standard_normal((n, d))
    norms = np.linalg.norm(v, axis=1)
    # Zero-norm Gaussian draws have probability 0; resample defensively.
    while np.any(norms == 0.0):
        bad = norms == 0.0
        v[bad] = g.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def _sample_round(spec: DomainSpec, n: int, g: np.random.Generator) -> np.ndarray:
    """Unrestricted sphere or ball sample."""
    dirs = _unit_directions(n, spec.dim, g)
    if isinstance(spec.shape, Sphere):
        return spec.shape.radius * dirs
    radii = g.uniform(0.0, spec.shape.max_radius, size=n)
    return radii[:, None] * dirs


def _sample_round_rejection(spec: DomainSpec, n: int, g: np.random.Generator) -> np.ndarray:
    r = spec.restriction
    k = r.k
    keep_rows = []
    kept = 0
    drawn = 0
    chunk = max(2048, 2 * n)
    while kept < n:
        x = _sample_round(DomainSpec(spec.shape, spec.dim), chunk, g)
        drawn += chunk
        head = x[:, :k]
        ok = np.all(head >= 0.0, axis=1) if isinstance(r, PositiveFirstK) else np.all(head <= 0.0, axis=1)
        accepted = x[ok]
        kept += len(accepted)
        keep_rows.append(accepted)
        if drawn >= 100_000 and kept / drawn < MIN_ACCEPT_RATE:
            raise RuntimeError(
                f"rejection sampling acceptance rate {kept / drawn:.2e} below "
                f"{MIN_ACCEPT_RATE:.0e} for {r!r} on {spec.shape!r} (drawn {drawn})"
            )
    return np.concatenate(keep_rows, axis=0)[:n]


def sample_domain(
    spec: DomainSpec, n: int, rng: Union[RandomSource, np.random.Generator]
) -> np.ndarray:
    """Draw ``n`` points from the domain; returns an n x d matrix.

    Cube coordinates are uniform; sphere points are normalized Gaussians;
    ball points pair a uniform radius with a uniform direction (the radial
    density is intentionally non-uniform in volume).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    g = _gen(rng)
    if isinstance(spec.shape, HyperCube):
        return _sample_cube(spec, n, g)
    r = spec.restriction
    if r is None:
        return _sample_round(spec, n, g)
    if isinstance(r, FixFirst):
        if not isinstance(spec.shape, Sphere):
            raise ValueError("FixFirst is supported on cubes and spheres only")
        if spec.dim < 2 or abs(r.value) >= spec.shape.radius:
            raise ValueError(
                f"cannot fix first coordinate to {r.value} on a {spec.dim}-d "
                f"sphere of radius {spec.shape.radius}"
            )
        rest = np.sqrt(spec.shape.radius**2 - r.value**2) * _unit_directions(n, spec.dim - 1, g)
        return np.concatenate([np.full((n, 1), r.value), rest], axis=1)
    return _sample_round_rejection(spec, n, g)


def in_support(spec: DomainSpec, x: np.ndarray) -> np.ndarray:
    """Boolean mask: which rows of ``x`` lie in the domain's support."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.dim:
        raise ValueError(f"points are {x.shape[1]}-d, spec is {spec.dim}-d")
    scale = _shape_scale(spec.shape)
    tol = MEMBERSHIP_TOL * max(1.0, scale)
    if isinstance(spec.shape, HyperCube):
        ok = np.all(np.abs(x - spec.shape.center) <= spec.shape.half_width + tol, axis=1)
    elif isinstance(spec.shape, Sphere):
        ok = np.abs(np.linalg.norm(x, axis=1) - spec.shape.radius) <= tol
    else:
        ok = np.linalg.norm(x, axis=1) <= spec.shape.max_radius + tol
    r = spec.restriction
    if isinstance(r, FixFirst):
        ok &= np.abs(x[:, 0] - r.value) <= tol
    elif isinstance(r, PositiveFirstK):
        ok &= np.all(x[:, : r.k] >= -tol, axis=1)
    elif isinstance(r, NegativeFirstK):
        ok &= np.all(x[:, : r.k] <= tol, axis=1)
    return ok


# ---------------------------------------------------------------------------
# labeled sets and splits
# ---------------------------------------------------------------------------


@dataclass
class LabeledSet:
    """Sampled inputs and exact labels, plus the geometry they came from."""

    inputs: np.ndarray
    labels: np.ndarray
    domain: DomainSpec
    target: TargetFunction
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def validate(self) -> None:
        """Raise if labels or membership are inconsistent with the spec."""
        if self.inputs.ndim != 2 or self.labels.shape != (self.n,):
            raise ValueError("inputs must be n x d with matching n-vector labels")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.labels))):
            raise ValueError("non-finite inputs or labels")
        expect = eval_target_batch(self.target, self.inputs)
        if not np.array_equal(expect, self.labels):
            raise ValueError("labels do not match target function exactly")
        mask = in_support(self.domain, self.inputs)
        if not np.all(mask):
            raise ValueError(f"{int((~mask).sum())} inputs fall outside the domain")


def make_labeled(
    target: TargetFunction,
    spec: DomainSpec,
    n: int,
    rng: Union[RandomSource, np.random.Generator],
    meta: Optional[dict] = None,
) -> LabeledSet:
    x = sample_domain(spec, n, rng)
    y = eval_target_batch(target, x)
    return LabeledSet(inputs=x, labels=y, domain=spec, target=target, meta=dict(meta or {}))


def _shift_for_sqrt(spec: DomainSpec) -> DomainSpec:
    """Nonnegative version of a centered cube: [-a,a] becomes [0,2a]."""
    shape = spec.shape
    if not isinstance(shape, HyperCube):
        raise ValueError("sqrt target requires a hypercube domain")
    if shape.center == 0.0:
        shape = HyperCube(half_width=shape.half_width, center=shape.half_width)
    if shape.center - shape.half_width < 0.0:
        raise ValueError("sqrt target requires a nonnegative domain")
    return DomainSpec(shape=shape, dim=spec.dim, restriction=spec.restriction)


def make_splits(
    target: TargetFunction,
    train_spec: DomainSpec,
    test_spec: DomainSpec,
    n_train: int,
    n_val: int,
    n_test: int,
    rng: RandomSource,
) -> tuple[LabeledSet, LabeledSet, LabeledSet]:
    """Train/val/test sets on disjoint RNG streams.

    Validation always shares the training distribution.  For sqrt targets,
    centered cubes are shifted to their nonnegative counterparts.
    """
    if isinstance(target, Sqrt):
        train_spec = _shift_for_sqrt(train_spec)
        test_spec = _shift_for_sqrt(test_spec)
    if train_spec.dim != test_spec.dim:
        raise ValueError("train and test dimensions differ")
    sets = []
    for name, spec, n in (
        ("train", train_spec, n_train),
        ("val", train_spec, n_val),
        ("test", test_spec, n_test),
    ):
        child = rng.child(name)
        meta = {"seed": rng.seed, "stream": child.label, "split": name}
        sets.append(make_labeled(target, spec, n, child, meta))
    return tuple(sets)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _target_meta(f: TargetFunction) -> dict:
    meta = {"target_kind": f.kind}
    if isinstance(f, Quadratic):
        meta["target_a"] = ";".join(f"{v!r}" for v in np.asarray(f.a).ravel())
    if isinstance(f, Linear):
        meta["target_beta"] = ";".join(f"{v!r}" for v in np.asarray(f.beta).ravel())
        meta["target_b"] = repr(f.b)
    return meta


def _domain_meta(spec: DomainSpec) -> dict:
    shape = spec.shape
    meta = {"domain_shape": shape.kind, "dim": str(spec.dim)}
    if isinstance(shape, HyperCube):
        meta["half_width"] = repr(shape.half_width)
        meta["center"] = repr(shape.center)
    elif isinstance(shape, Sphere):
        meta["radius"] = repr(shape.radius)
    else:
        meta["max_radius"] = repr(shape.max_radius)
    r = spec.restriction
    meta["restriction"] = "none" if r is None else r.kind
    if isinstance(r, FixFirst):
        meta["restriction_value"] = repr(r.value)
    elif isinstance(r, (PositiveFirstK, NegativeFirstK)):
        meta["restriction_k"] = str(r.k)
    return meta


def save_csv(ls: LabeledSet, path: str) -> None:
    """Write ``x0,...,x{d-1},y`` rows plus a key=value metadata sidecar."""
    d = ls.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(d)] + ["y"])
        for row, y in zip(ls.inputs, ls.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])
    meta = {**_target_meta(ls.target), **_domain_meta(ls.domain)}
    meta["n"] = str(ls.n)
    for key, value in ls.meta.items():
        meta[str(key)] = str(value)
    with open(path + ".meta", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")


def load_csv(path: str) -> tuple[np.ndarray, np.ndarray, dict]:
    """Read a saved set back; returns (inputs, labels, metadata)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 1
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), d + 1)
    meta = {}
    try:
        with open(path + ".meta") as fh:
            for line in fh:
                if "=" in line:
                    key, _, value = line.strip().partition("=")
                    meta[key] = value
    except FileNotFoundError:
        pass
    return data[:, :d], data[:, d], meta
