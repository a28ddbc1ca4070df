"""Two-layer ReLU neural tangent kernel in closed form, plus kernel regression.

The kernel of an infinitely wide two-layer ReLU network has an arc-cosine
closed form; it is validated here against a Monte-Carlo evaluation of the
defining Gaussian expectation before anything downstream trusts it.  Kernel
regression with this kernel is the infinite-width stand-in for gradient
descent training, and reproduces linear functions exactly outside the
training range when the training set spans an orthogonal basis with both
signs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import graphgen
from .numerics import FactorizationError, RandomSource, solve_spd
from .synthdata import DomainSpec, HyperCube, LabeledSet, Linear, Sphere, make_labeled

__all__ = [
    "KernelPredictor",
    "KernelSpec",
    "exact_extrapolation_check",
    "gntk_condition_rank",
    "kernel_regress",
    "ntk2_relu",
    "ntk_gram",
    "ntk_mc_oracle",
]

# Training-row kernel distances below this are reported as near-duplicates.
NEAR_DUPLICATE_TOL = 1e-12

TRAIN_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel scale and the optional constant-1 input coordinate.

    The scale multiplies the whole kernel and cancels out of regression
    predictions; bias augmentation maps x to [x | 1] before evaluating.
    """

    scale: float = 1.0
    augment_bias: bool = False

    def __post_init__(self) -> None:
        if self.scale <= 0.0:
            raise ValueError(f"kernel scale must be positive, got {self.scale}")


def _augment(x: np.ndarray, spec: KernelSpec) -> np.ndarray:
    if not spec.augment_bias:
        return x
    return np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)


def ntk_gram(x: np.ndarray, z: np.ndarray, spec: KernelSpec = KernelSpec()) -> np.ndarray:
    """Kernel matrix k(x_i, z_j) for row sets ``x`` and ``z``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if x.shape[1] != z.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    x = _augment(x, spec)
    z = _augment(z, spec)
    nx = np.linalg.norm(x, axis=1)
    nz = np.linalg.norm(z, axis=1)
    if np.any(nx == 0.0) or np.any(nz == 0.0):
        raise ValueError("zero-norm input; enable bias augmentation or exclude the origin")
    dots = x @ z.T
    cos = np.clip(dots / np.outer(nx, nz), -1.0, 1.0)
    theta = np.arccos(cos)
    angular = np.sin(theta) + (np.pi - theta) * np.cos(theta)
    k = dots * (np.pi - theta) / (2.0 * np.pi) + np.outer(nx, nz) * angular / (2.0 * np.pi)
    return spec.scale * k


def ntk2_relu(x: np.ndarray, x_other: np.ndarray, spec: KernelSpec = KernelSpec()) -> float:
    """Kernel value for a single pair of points."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x_other = np.asarray(x_other, dtype=np.float64).ravel()
    return float(ntk_gram(x[None, :], x_other[None, :], spec)[0, 0])


def ntk_mc_oracle(
    x: np.ndarray,
    x_other: np.ndarray,
    num_samples: int,
    rng: Union[RandomSource, np.random.Generator],
    chunk: int = 200_000,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the kernel's defining Gaussian expectation.

    Averages x.x' 1(w'x>=0) 1(w'x'>=0) + (w'x)(w'x') 1 1 over w ~ N(0, I);
    returns (estimate, standard error).  This is the independent oracle the
    closed form is checked against.
    """
    if num_samples < 1_000:
        raise ValueError(f"need at least 1000 samples, got {num_samples}")
    x = np.asarray(x, dtype=np.float64).ravel()
    x_other = np.asarray(x_other, dtype=np.float64).ravel()
    if x.shape != x_other.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_other.shape}")
    g = rng if isinstance(rng, np.random.Generator) else rng.generator()
    dot = float(x @ x_other)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < num_samples:
        m = min(chunk, num_samples - done)
        w = g.standard_normal((m, x.size))
        px = w @ x
        pz = w @ x_other
        both = (px >= 0.0) & (pz >= 0.0)
        vals = both * (dot + px * pz)
        total += float(vals.sum())
        total_sq += float(vals @ vals)
        done += m
    mean = total / num_samples
    var = max(total_sq / num_samples - mean**2, 0.0)
    return mean, float(np.sqrt(var / num_samples))


# ---------------------------------------------------------------------------
# kernel regression
# ---------------------------------------------------------------------------


@dataclass
class KernelPredictor:
    """Kernel regression solution: predict(x) = sum_i alpha_i k(x, x_i)."""

    train_inputs: np.ndarray
    alpha: np.ndarray
    spec: KernelSpec

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        k = ntk_gram(np.atleast_2d(np.asarray(x, dtype=np.float64)), self.train_inputs, self.spec)
        return k @ self.alpha

    def predict(self, x: np.ndarray) -> float:
        return float(self.predict_batch(np.asarray(x)[None, :])[0])

    def to_json(self) -> str:
        return json.dumps(
            {
                "train_inputs": self.train_inputs.tolist(),
                "alpha": self.alpha.tolist(),
                "scale": self.spec.scale,
                "augment_bias": self.spec.augment_bias,
            }
        )

    @staticmethod
    def from_json(text: str) -> "KernelPredictor":
        data = json.loads(text)
        return KernelPredictor(
            train_inputs=np.asarray(data["train_inputs"], dtype=np.float64),
            alpha=np.asarray(data["alpha"], dtype=np.float64),
            spec=KernelSpec(scale=data["scale"], augment_bias=data["augment_bias"]),
        )


def _nearest_pair(x: np.ndarray) -> tuple[int, int, float]:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, np.inf)
    i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
    return int(i), int(j), float(np.sqrt(max(d2[i, j], 0.0)))


def fit_kernel(x: np.ndarray, y: np.ndarray, spec: KernelSpec = KernelSpec()) -> KernelPredictor:
    """Solve the kernel system for raw input/label arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = ntk_gram(x, x, spec)
    k = 0.5 * (k + k.T)
    try:
        alpha = solve_spd(k, y)
    except FactorizationError as exc:
        i, j, dist = _nearest_pair(_augment(x, spec))
        row_gap = float(np.max(np.abs(k[i] - k[j])))
        hint = " (near-duplicate)" if row_gap < NEAR_DUPLICATE_TOL else ""
        raise FactorizationError(
            f"singular kernel: closest training pair ({i}, {j}) at distance "
            f"{dist:.3e}, kernel row gap {row_gap:.3e}{hint}"
        ) from exc
    residual = float(np.max(np.abs(k @ alpha - y)))
    scale = max(1.0, float(np.max(np.abs(y))))
    if residual > TRAIN_RESIDUAL_TOL * scale:
        raise FactorizationError(f"kernel fit residual {residual:.3e} too large")
    return KernelPredictor(train_inputs=x, alpha=alpha, spec=spec)


def kernel_regress(train: LabeledSet, spec: KernelSpec = KernelSpec()) -> KernelPredictor:
    """Kernel regression on a labeled training set."""
    return fit_kernel(train.inputs, train.labels, spec)


def exact_extrapolation_check(
    d: int,
    beta: np.ndarray,
    q: np.ndarray,
    s: float,
    n_test: int,
    test_range: float,
    rng: Union[RandomSource, np.random.Generator],
    spec: KernelSpec = KernelSpec(),
) -> float:
    """Max |prediction - beta'x| far outside a 2d-point training set.

    The training set is {+-s Q e_i}: one positive and one negative point per
    orthogonal direction.  Kernel regression on it reproduces the linear
    target everywhere, so the returned error should sit at float rounding
    scale no matter how far the test cube extends.
    """
    beta = np.asarray(beta, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64)
    if beta.shape != (d,) or q.shape != (d, d):
        raise ValueError("beta must be a d-vector and q a d x d matrix")
    if np.max(np.abs(q.T @ q - np.eye(d))) > 1e-10:
        raise ValueError("q is not orthogonal")
    if s <= 0.0:
        raise ValueError(f"scale must be positive, got {s}")
    x_train = np.concatenate([s * q.T, -s * q.T], axis=0)
    target = Linear(beta=beta)
    domain = DomainSpec(Sphere(radius=s * 1.0), dim=d)
    y_train = x_train @ beta
    train = LabeledSet(inputs=x_train, labels=y_train, domain=domain, target=target)
    predictor = fit_kernel(train.inputs, train.labels, spec)

    g = rng if isinstance(rng, np.random.Generator) else rng.generator()
    x_test = g.uniform(-test_range, test_range, size=(n_test, d))
    preds = predictor.predict_batch(x_test)
    return float(np.max(np.abs(preds - x_test @ beta)))


# ---------------------------------------------------------------------------
# graph data condition (degree-profile rank)
# ---------------------------------------------------------------------------

RANK_EPS = 1e-8


def gntk_condition_rank(graphs: list) -> tuple[int, list[graphgen.DegreeProfile]]:
    """Numerical rank of the stacked (g, g', g N_max, g' N_min) vectors.

    Max-degree extrapolation requires these per-graph vectors to span R^4;
    single-family training sets such as paths or regular graphs stay on a
    rank-<=2 subspace.
    """
    if not graphs:
        raise ValueError("need at least one graph")
    profiles = [graphgen.degree_profile(g) for g in graphs]
    rows = np.array(
        [[p.g_max, p.g_min, p.g_max * p.n_max, p.g_min * p.n_min] for p in profiles],
        dtype=np.float64,
    )
    sigma = np.linalg.svd(rows, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0, profiles
    return int(np.sum(sigma > RANK_EPS * sigma[0])), profiles
