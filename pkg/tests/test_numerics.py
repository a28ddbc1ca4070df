"""Tests for seeded randomness, SPD solves, orthogonal sampling, line fits."""

import numpy as np
import pytest

from extrapolab.numerics import (
    FactorizationError,
    LineFit,
    RandomSource,
    fit_line,
    random_orthogonal,
    solve_spd,
)

# ---------------------------------------------------------------- RandomSource


def test_random_source_repeatable():
    a = RandomSource(7, "unit").generator().normal(size=16)
    b = RandomSource(7, "unit").generator().normal(size=16)
    assert np.array_equal(a, b)


def test_random_source_label_separates_streams():
    a = RandomSource(7, "alpha").generator().normal(size=16)
    b = RandomSource(7, "beta").generator().normal(size=16)
    assert not np.array_equal(a, b)


def test_random_source_seed_separates_streams():
    a = RandomSource(1, "same").generator().normal(size=16)
    b = RandomSource(2, "same").generator().normal(size=16)
    assert not np.array_equal(a, b)


def test_child_streams_independent_of_creation_order():
    root = RandomSource(11, "root")
    u1 = root.child("u").generator().normal(size=8)
    v1 = root.child("v").generator().normal(size=8)

    root = RandomSource(11, "root")
    v2 = root.child("v").generator().normal(size=8)
    u2 = root.child("u").generator().normal(size=8)

    assert np.array_equal(u1, u2)
    assert np.array_equal(v1, v2)


def test_child_chain_differs_from_flat_label():
    root = RandomSource(3, "a")
    chained = root.child("b").generator().normal(size=8)
    flat = RandomSource(3, "b").generator().normal(size=8)
    assert not np.array_equal(chained, flat)


# ------------------------------------------------------------------- solve_spd


def test_solve_spd_matches_reference_solver():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 30))
        a = rng.normal(size=(n, n))
        k = a @ a.T + n * np.eye(n)
        y = rng.normal(size=n)
        x = solve_spd(k, y)
        assert np.allclose(k @ x, y, rtol=0, atol=1e-8 * np.abs(y).max())


def test_solve_spd_handles_near_singular_gram():
    # duplicated rows make the Gram matrix exactly rank deficient; the
    # jitter ladder must still solve a consistent system
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(5, 3))
    pts = np.vstack([pts, pts[0]])
    k = pts @ pts.T
    y = k @ rng.normal(size=6)
    x = solve_spd(k, y)
    assert np.all(np.isfinite(x))
    assert np.allclose(k @ x, y, atol=1e-4 * np.abs(y).max())


def test_solve_spd_matrix_rhs():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(4, 4))
    k = a @ a.T + 4 * np.eye(4)
    b = rng.normal(size=(4, 3))
    x = solve_spd(k, b)
    assert x.shape == (4, 3)
    assert np.allclose(k @ x, b, atol=1e-10)


def test_solve_spd_rejects_non_square():
    with pytest.raises(ValueError):
        solve_spd(np.ones((2, 3)), np.ones(2))


def test_solve_spd_rejects_asymmetric():
    k = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        solve_spd(k, np.ones(2))


def test_solve_spd_indefinite_raises():
    k = np.array([[1.0, 0.0], [0.0, -5.0]])
    with pytest.raises(FactorizationError):
        solve_spd(k, np.ones(2))


# ----------------------------------------------------------- random_orthogonal


def test_random_orthogonal_is_orthogonal():
    rng = np.random.default_rng(2)
    for d in (1, 2, 3, 8, 17):
        q = random_orthogonal(d, rng)
        assert q.shape == (d, d)
        assert np.allclose(q.T @ q, np.eye(d), atol=1e-12)


def test_random_orthogonal_deterministic_under_seed():
    q1 = random_orthogonal(6, RandomSource(5, "q").generator())
    q2 = random_orthogonal(6, RandomSource(5, "q").generator())
    assert np.array_equal(q1, q2)


def test_random_orthogonal_not_axis_aligned():
    q = random_orthogonal(4, np.random.default_rng(3))
    # a Haar draw almost surely mixes coordinates
    assert np.abs(q - np.eye(4)).max() > 0.1


# -------------------------------------------------------------------- fit_line


def test_fit_line_recovers_exact_line():
    t = np.linspace(-3.0, 5.0, 50)
    y = 2.5 * t - 1.25
    fit = fit_line(t, y)
    assert isinstance(fit, LineFit)
    assert fit.slope == pytest.approx(2.5, abs=1e-12)
    assert fit.intercept == pytest.approx(-1.25, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_line_constant_signal_is_perfect_fit():
    # zero residual on zero variance counts as a perfect fit
    t = np.linspace(0.0, 1.0, 20)
    fit = fit_line(t, np.full(20, 4.0))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.intercept == pytest.approx(4.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_fit_line_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        fit_line(np.ones(5), np.arange(5.0))
    with pytest.raises(ValueError):
        fit_line(np.array([1.0]), np.array([2.0]))


def test_fit_line_r_squared_penalizes_noise():
    rng = np.random.default_rng(4)
    t = np.linspace(0.0, 1.0, 200)
    y = t + rng.normal(scale=0.5, size=200)
    fit = fit_line(t, y)
    assert fit.r_squared < 0.9
