import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randla.errors import DistributionError, ShapeError
from randla.numcore import SeedSpec
from randla.sketch import (ProbabilityVector, SketchOperator, apply_sketch, gaussian_operator,
                           hadamard_apply, identity_operator, leverage_uniformization_check,
                           make_sampling_plan, next_pow2, plan_from_indices, sampling_operator,
                           sign_operator, srht_operator)

from .strategies import gaussian_matrices, seeds


def dense_hadamard(n):
    H = np.array([[1.0]])
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H / math.sqrt(n)


def test_probability_vector_validation():
    with pytest.raises(DistributionError):
        ProbabilityVector([0.5, -0.1, 0.6])
    with pytest.raises(DistributionError):
        ProbabilityVector([0.5, 0.4])
    with pytest.raises(DistributionError):
        ProbabilityVector.from_weights([0.0, 0.0])
    p = ProbabilityVector.from_weights([1.0, 2.0, 3.0])
    np.testing.assert_allclose(p.probs, [1 / 6, 2 / 6, 3 / 6])
    assert abs(p.probs.sum() - 1.0) <= 1e-12


def test_plan_point_mass():
    plan = make_sampling_plan([1.0, 0.0, 0.0], 5, 0)
    assert list(plan.indices) == [0] * 5
    np.testing.assert_allclose(plan.scales, 1 / math.sqrt(5))


def test_plan_scale_arithmetic():
    plan = make_sampling_plan([0.5, 0.5], 2, 3)
    np.testing.assert_allclose(plan.scales, 1.0)


def test_plan_negative_entry_is_distribution_error():
    with pytest.raises(DistributionError):
        make_sampling_plan(np.array([1.2, -0.2]), 3, 0)


def test_plan_uniform_frequencies_multinomial():
    trials, c = 100_000, 4
    counts = np.zeros(4)
    base = SeedSpec(5)
    # one long plan is c * trials i.i.d. draws from the same distribution
    plan = make_sampling_plan(ProbabilityVector.uniform(4), c * trials, base)
    counts = np.bincount(plan.indices, minlength=4)
    freq = counts / (c * trials)
    sd = math.sqrt(0.25 * 0.75 / (c * trials))
    assert np.all(np.abs(freq - 0.25) <= 3 * sd)


def test_plan_uniform_frequencies_over_replans():
    trials = 20_000
    counts = np.zeros(4)
    for t in range(trials):
        counts += np.bincount(make_sampling_plan(ProbabilityVector.uniform(4), 4,
                                                 SeedSpec(9, t)).indices, minlength=4)
    freq = counts / (4 * trials)
    sd = math.sqrt(0.25 * 0.75 / (4 * trials))
    assert np.all(np.abs(freq - 0.25) <= 3.5 * sd)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=12), st.integers(1, 50), seeds)
def test_plan_invariants(w, c, seed):
    w = np.array(w)
    if not w.sum() > 0:
        w[0] = 1.0
    p = ProbabilityVector.from_weights(w)
    plan = make_sampling_plan(p, c, seed)
    assert plan.indices.size == c
    assert np.all(p.probs[plan.indices] > 0)
    np.testing.assert_allclose(plan.scales, 1 / np.sqrt(c * p.probs[plan.indices]))
    again = make_sampling_plan(p, c, seed)
    assert np.array_equal(plan.indices, again.indices)


def test_sampling_point_mass_right():
    A = np.arange(12.0).reshape(3, 4)
    p = ProbabilityVector([1.0, 0.0, 0.0, 0.0])
    out = apply_sketch(sampling_operator(p, 1, 0), A, "right")
    np.testing.assert_allclose(out, A[:, [0]])


def test_sampling_point_mass_scales_by_inverse_sqrt_p():
    A = np.arange(12.0).reshape(3, 4)
    p = ProbabilityVector([0.25, 0.25, 0.25, 0.25])
    op = sampling_operator(p, plan=plan_from_indices(p, [0]))
    np.testing.assert_allclose(apply_sketch(op, A, "right"), A[:, [0]] / math.sqrt(0.25))


def test_srht_full_identity_signs_preserves_frobenius():
    A = np.random.default_rng(0).standard_normal((16, 5))
    op = srht_operator(16, 16, 0, signs=np.ones(16))
    out = apply_sketch(op, A, "left")
    np.testing.assert_allclose(out, dense_hadamard(16) @ A, atol=1e-12)
    assert abs(np.linalg.norm(out) - np.linalg.norm(A)) <= 1e-12 * np.linalg.norm(A)


def test_gaussian_right_on_identity_column_norms():
    n, l = 64, 32
    # the JL quantity ||Omega.T e_i||^2 is the squared norm of row i of I @ Omega
    means = [np.mean(np.sum(apply_sketch(gaussian_operator(n, l, s), np.eye(n), "right")**2,
                            axis=1)) for s in range(200)]
    assert abs(np.mean(means) - 1.0) <= 0.05


def test_apply_shape_error():
    with pytest.raises(ShapeError):
        apply_sketch(gaussian_operator(5, 2, 0), np.ones((4, 3)), "left")
    with pytest.raises(ShapeError):
        apply_sketch(gaussian_operator(5, 2, 0), np.ones((4, 3)), "right")


def test_apply_sides_agree_with_dense():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((7, 10))
    op = sign_operator(10, 4, 2)
    np.testing.assert_allclose(apply_sketch(op, A, "right"), A @ op.dense)
    op2 = gaussian_operator(7, 3, 2)
    np.testing.assert_allclose(apply_sketch(op2, A, "left"), op2.dense.T @ A)
    assert np.all(np.abs(np.abs(op.dense) - 0.5) == 0)


def test_srht_matches_explicit_dhs():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((12, 3))
    op = srht_operator(12, 5, SeedSpec(3))
    N = op.padded_dim
    assert N == 16
    Ap = np.vstack([A, np.zeros((N - 12, 3))])
    full = dense_hadamard(N) @ (op.signs[:, None] * Ap)
    expect = full[op.plan.indices] * math.sqrt(N / 5)
    np.testing.assert_allclose(apply_sketch(op, A, "left"), expect, atol=1e-12)


def test_srht_out_dim_bounds():
    with pytest.raises(ShapeError):
        srht_operator(10, 17, 0)


def test_hadamard_examples():
    np.testing.assert_allclose(hadamard_apply(np.array([1.0, 0.0])), [1 / math.sqrt(2)] * 2)
    x = np.random.default_rng(1).standard_normal(8)
    np.testing.assert_allclose(hadamard_apply(x), dense_hadamard(8) @ x, atol=1e-12)
    X = np.random.default_rng(2).standard_normal((3, 8))
    np.testing.assert_allclose(hadamard_apply(X, "right"), X @ dense_hadamard(8), atol=1e-12)
    with pytest.raises(ShapeError):
        hadamard_apply(np.ones(6))


@given(st.integers(0, 7), seeds)
def test_hadamard_involution(logn, seed):
    x = np.random.default_rng(seed % 2**32).standard_normal((2**logn, 2))
    np.testing.assert_allclose(hadamard_apply(hadamard_apply(x)), x, atol=1e-12)


def test_uniformization_coherent_identity_block():
    A = np.eye(256)[:, :4]
    for s in range(20):
        before, after = leverage_uniformization_check(A, s)
        assert before == pytest.approx(1.0)
        assert after < 1.0


def test_uniformization_uniform_leverage():
    m, n = 256, 4
    A = dense_hadamard(m)[:, :n]
    before, after = leverage_uniformization_check(A, 3)
    assert before == pytest.approx(n / m)
    target = n * math.log(m) / m
    assert target / 8 <= after <= 8 * target


def test_uniformization_single_column():
    m = 16
    before, after = leverage_uniformization_check(np.eye(m)[:, [0]], 0)
    assert before == pytest.approx(1.0)
    assert after == pytest.approx(1 / m, rel=1e-12)


def test_sampling_unbiased():
    A = np.random.default_rng(3).standard_normal((3, 5))
    p = ProbabilityVector.from_weights([1.0, 2.0, 3.0, 4.0, 5.0])
    trials = 10_000
    acc = np.zeros_like(A)
    sq = np.zeros_like(A)
    for t in range(trials):
        op = sampling_operator(p, 3, SeedSpec(11, t))
        S_A = apply_sketch(op, A, "right")
        est = S_A @ apply_sketch(op, np.eye(5), "right").T
        acc += est
        sq += est**2
    mean = acc / trials
    se = np.sqrt((sq / trials - mean**2) / trials)
    assert np.all(np.abs(mean - A) <= 4 * se + 1e-12)


@given(gaussian_matrices(min_rows=1, max_rows=40, max_cols=5, tall=False), seeds)
def test_srht_full_transform_isometry(A, seed):
    op = srht_operator(A.shape[1], next_pow2(A.shape[1]), seed)
    out = apply_sketch(op, A, "right")
    assert abs(np.linalg.norm(out) - np.linalg.norm(A)) <= 1e-10 * np.linalg.norm(A)


@pytest.mark.parametrize("make", [gaussian_operator, sign_operator])
def test_projection_norm_expectation(make):
    x = np.random.default_rng(0).standard_normal(8)
    vals = np.array([np.sum(apply_sketch(make(8, 4, SeedSpec(1, t)), x, "left")**2)
                     for t in range(10_000)])
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - x @ x) <= 3 * se


@given(seeds, st.sampled_from(["gaussian", "sign", "srht", "sampling"]))
def test_operator_determinism_and_recipe_roundtrip(seed, kind):
    A = np.random.default_rng(1).standard_normal((10, 3))
    build = {
        "gaussian": lambda: gaussian_operator(10, 4, seed),
        "sign": lambda: sign_operator(10, 4, seed),
        "srht": lambda: srht_operator(10, 4, seed),
        "sampling": lambda: sampling_operator(ProbabilityVector.uniform(10), 4, seed),
    }[kind]
    a, b = build(), build()
    out = apply_sketch(a, A, "left")
    assert np.array_equal(out, apply_sketch(b, A, "left"))
    assert np.array_equal(out, apply_sketch(a, A, "left"))
    rec = json.loads(json.dumps(a.to_recipe()))
    assert np.array_equal(apply_sketch(SketchOperator.from_recipe(rec), A, "left"), out)


def test_identity_operator():
    A = np.random.default_rng(0).standard_normal((6, 2))
    assert np.array_equal(apply_sketch(identity_operator(6), A, "left"), A)
