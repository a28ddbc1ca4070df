"""Shared numerical kernels: seeded randomness, SPD solves, and line fits.

Everything downstream draws its randomness through :class:`RandomSource` so
that experiments are reproducible from a single integer seed, and solves its
kernel systems through :func:`solve_spd` so that near-singular Gram matrices
fail in one well-defined place.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg as _sla

__all__ = [
    "FactorizationError",
    "LineFit",
    "RandomSource",
    "fit_line",
    "random_orthogonal",
    "solve_spd",
]

# Matrices further than this from their transpose are rejected as asymmetric.
SYMMETRY_TOL = 1e-10

# Diagonal jitter escalation for Cholesky: start tiny, give up at 1e-6.
JITTER_LADDER = tuple(10.0 ** k for k in range(-12, -5))


class FactorizationError(RuntimeError):
    """Raised when a matrix stays indefinite after maximal diagonal jitter."""


# ---------------------------------------------------------------------------
# seeded randomness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomSource:
    """Counter-based random stream identified by ``(seed, label)``.

    Two sources with the same seed and label always produce identical
    streams; sources whose labels differ are statistically independent.
    ``child`` derives a named substream, so an experiment can hand
    non-overlapping randomness to data generation, initialization, and
    shuffling without coordinating offsets.
    """

    seed: int
    label: str = "root"

    def generator(self) -> np.random.Generator:
        """Fresh generator at the start of this stream."""
        digest = hashlib.sha256(self.label.encode("utf-8")).digest()
        label_key = int.from_bytes(digest[:8], "little")
        seed_key = int(self.seed) & (2**64 - 1)
        return np.random.Generator(np.random.Philox(key=(seed_key << 64) | label_key))

    def child(self, label: str) -> "RandomSource":
        """Derive the substream named ``label`` under this one."""
        return RandomSource(self.seed, f"{self.label}/{label}")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def _as_2d(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive (semi)definite ``a``.

    Tries a Cholesky factorization with escalating diagonal jitter from
    1e-12 up to 1e-6; raises :class:`FactorizationError` if the matrix is
    still not positive definite at the top of the ladder.  ``b`` may be a
    vector or a matrix of right-hand sides.
    """
    a = _as_2d(a, "a")
    n, m = a.shape
    if n != m:
        raise ValueError(f"a must be square, got shape {a.shape}")
    if not np.all(np.abs(a - a.T) <= SYMMETRY_TOL):
        raise ValueError("a is not symmetric within tolerance")

    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != n:
        raise ValueError(f"b has {b.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(b)):
        raise ValueError("b contains non-finite entries")

    eye = np.eye(n)
    for jitter in (0.0,) + JITTER_LADDER:
        try:
            cf = _sla.cho_factor(a + jitter * eye, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        return _sla.cho_solve(cf, b, check_finite=False)
    raise FactorizationError(
        f"matrix of size {n} not positive definite even with jitter {JITTER_LADDER[-1]:.0e}"
    )


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal ``d x d`` matrix drawn from the Haar measure.

    QR of a Gaussian matrix with the sign of R's diagonal folded into Q,
    which removes the sign ambiguity that would otherwise bias the draw.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    gauss = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


class LineFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def fit_line(xs: np.ndarray, ys: np.ndarray) -> LineFit:
    """Least-squares line through ``(xs, ys)`` with its R^2.

    A constant ``ys`` is a perfect fit by convention (R^2 = 1), since the
    zero-slope line explains everything there is to explain.
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.shape != ys.shape:
        raise ValueError(f"shape mismatch: {xs.shape} vs {ys.shape}")
    if xs.size < 2:
        raise ValueError("need at least two points to fit a line")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("inputs contain non-finite entries")
    if np.ptp(xs) == 0.0:
        raise ValueError("xs are all identical; slope is undefined")

    x_mean = xs.mean()
    y_mean = ys.mean()
    dx = xs - x_mean
    dy = ys - y_mean
    slope = float(dx @ dy / (dx @ dx))
    intercept = float(y_mean - slope * x_mean)

    ss_tot = float(dy @ dy)
    if ss_tot == 0.0:
        return LineFit(slope, intercept, 1.0)
    resid = ys - (slope * xs + intercept)
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return LineFit(slope, intercept, float(min(max(r2, 0.0), 1.0)))
