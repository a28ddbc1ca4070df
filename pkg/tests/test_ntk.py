"""Tests for the closed-form two-layer ReLU kernel and kernel regression."""

import numpy as np
import pytest

from extrapolab.numerics import RandomSource, random_orthogonal
from extrapolab.ntk import (
    KernelSpec,
    exact_extrapolation_check,
    fit_kernel,
    gntk_condition_rank,
    kernel_regress,
    ntk2_relu,
    ntk_gram,
    ntk_mc_oracle,
)
from extrapolab.graphgen import degree_profile, sample_graph, General, Path, Cycle
from extrapolab.synthdata import DomainSpec, HyperCube, Linear, make_labeled

# ----------------------------------------------------------------- spot values


def test_kernel_spot_values():
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    assert ntk2_relu(e1, e1) == pytest.approx(1.0, abs=1e-12)
    assert ntk2_relu(e1, e2) == pytest.approx(1.0 / (2.0 * np.pi), abs=1e-12)
    assert ntk2_relu(e1, -e1) == pytest.approx(0.0, abs=1e-12)


def test_kernel_value_at_known_angle():
    # at 60 degrees on unit vectors: (pi - t)cos(t)/(2 pi) + sin(t)/(2 pi)
    t = np.pi / 3.0
    x = np.array([1.0, 0.0])
    z = np.array([np.cos(t), np.sin(t)])
    expected = (np.cos(t) * (np.pi - t) + np.sin(t) + (np.pi - t) * np.cos(t)) / (2 * np.pi)
    assert ntk2_relu(x, z) == pytest.approx(expected, abs=1e-12)


def test_gram_is_symmetric_and_psd():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 3))
    k = ntk_gram(x, x)
    assert np.allclose(k, k.T, atol=1e-12)
    eigs = np.linalg.eigvalsh(k)
    assert eigs.min() > -1e-9 * eigs.max()


def test_kernel_is_rotation_invariant():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(8, 4))
    z = rng.normal(size=(8, 4))
    q = random_orthogonal(4, rng)
    assert np.allclose(ntk_gram(x @ q.T, z @ q.T), ntk_gram(x, z), atol=1e-12)


def test_kernel_degree_one_homogeneity():
    # both branches of the closed form scale linearly with either argument
    rng = np.random.default_rng(2)
    x = rng.normal(size=(5, 3))
    z = rng.normal(size=(5, 3))
    assert np.allclose(ntk_gram(3.0 * x, z), 3.0 * ntk_gram(x, z), rtol=1e-12)
    assert np.allclose(ntk_gram(x, 0.25 * z), 0.25 * ntk_gram(x, z), rtol=1e-12)


def test_kernel_scale_spec():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(6, 2))
    base = ntk_gram(x, x)
    scaled = ntk_gram(x, x, KernelSpec(scale=2.5))
    assert np.allclose(scaled, 2.5 * base, rtol=1e-12)


def test_bias_augmentation_appends_constant_coordinate():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 2))
    z = rng.normal(size=(5, 2))
    aug = ntk_gram(x, z, KernelSpec(augment_bias=True))
    ones = np.ones((5, 1))
    manual = ntk_gram(np.hstack([x, ones]), np.hstack([z, ones]))
    assert np.allclose(aug, manual, atol=1e-12)


# -------------------------------------------------------- monte carlo agreement


def test_kernel_matches_sampled_feature_expectation():
    rng = RandomSource(0, "mc")
    gen = rng.generator()
    for trial in range(4):
        d = int(gen.integers(2, 8))
        x = gen.normal(size=d)
        z = gen.normal(size=d)
        est, se = ntk_mc_oracle(x, z, 400_000, rng.child(f"pair-{trial}"))
        exact = ntk2_relu(x, z)
        assert abs(est - exact) <= 3.0 * se
        assert se < 0.05 * max(abs(exact), 1.0)


# ------------------------------------------------------------ kernel regression


def test_fit_kernel_interpolates_training_data():
    rng = RandomSource(1, "fit")
    spec = DomainSpec(HyperCube(1.0), dim=3)
    train = make_labeled(Linear(np.array([1.0, -2.0, 0.5]), b=0.3), spec, 30, rng)
    pred = fit_kernel(train.inputs, train.labels)
    back = pred.predict_batch(train.inputs)
    assert np.allclose(back, train.labels, atol=1e-8)


def test_kernel_regress_wraps_labeled_set():
    rng = RandomSource(2, "wrap")
    spec = DomainSpec(HyperCube(1.0), dim=2)
    train = make_labeled(Linear(np.array([0.5, 1.0])), spec, 20, rng)
    pred = kernel_regress(train)
    x = np.array([0.3, -0.2])
    assert pred.predict(x) == pytest.approx(
        fit_kernel(train.inputs, train.labels).predict(x))


def test_predictor_json_round_trip():
    rng = RandomSource(3, "json")
    spec = DomainSpec(HyperCube(1.0), dim=2)
    train = make_labeled(Linear(np.array([1.0, 1.0])), spec, 10, rng)
    pred = kernel_regress(train, KernelSpec(scale=1.5))
    clone = type(pred).from_json(pred.to_json())
    x = np.random.default_rng(0).normal(size=(7, 2))
    assert np.array_equal(clone.predict_batch(x), pred.predict_batch(x))


def test_exact_linear_extrapolation_small_case():
    rng = RandomSource(4, "exact")
    q = random_orthogonal(3, rng.generator())
    beta = np.array([1.0, -0.5, 2.0])
    err = exact_extrapolation_check(3, beta, q, s=1.0, n_test=200, test_range=10.0,
                                    rng=rng.child("test"))
    assert err < 1e-6


# -------------------------------------------------------- aggregate rank probe


def test_condition_rank_mixed_families_is_full():
    rng = RandomSource(5, "rank")
    graphs = []
    for i in range(30):
        fam = (General(), Path(), Cycle())[i % 3]
        graphs.append(sample_graph(fam, (5, 12), rng.child(f"g{i}")))
    rank, profiles = gntk_condition_rank(graphs)
    assert rank == 4
    assert len(profiles) == len(graphs)
    assert profiles[0] == degree_profile(graphs[0])


def test_condition_rank_single_family_is_deficient():
    rng = RandomSource(6, "rank-path")
    graphs = [sample_graph(Path(), (5, 12), rng.child(f"g{i}")) for i in range(20)]
    rank, _ = gntk_condition_rank(graphs)
    assert rank <= 2
