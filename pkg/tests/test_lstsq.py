import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randla.bench import precond_fixture
from randla.errors import ConvergenceError, RankError, ShapeError
from randla.gen import GenSpec, generate, ls_rhs
from randla.leverage import exact_leverage
from randla.lstsq import (LsProblem, best_of, check_structural, default_sample_size,
                          min_norm_exact, solve_exact, solve_min_norm, solve_preconditioned,
                          solve_projected, solve_sampled, solve_srht)
from randla.numcore import SeedSpec
from randla.sketch import (ProbabilityVector, identity_operator, plan_from_indices,
                           sampling_operator, srht_operator)

from .strategies import gaussian_matrices, seeds


def orthonormal(m, n, seed):
    return np.linalg.qr(np.random.default_rng(seed).standard_normal((m, n)))[0]


def problem(A, seed, gamma=0.9):
    return LsProblem(A, ls_rhs(A, gamma, seed))


# exact solver

def test_exact_identity():
    b = np.array([1.0, -2.0, 3.5])
    rep = solve_exact(LsProblem(np.eye(3), b))
    np.testing.assert_allclose(rep.x, b)
    assert rep.residual_norm == pytest.approx(0.0, abs=1e-15)


def test_exact_b_orthogonal_to_range():
    rep = solve_exact(LsProblem(np.eye(3)[:, [0]], np.eye(3)[1]))
    np.testing.assert_allclose(rep.x, [0.0])
    assert rep.residual_norm == pytest.approx(1.0)
    assert rep.mass_fraction == 0.0


def test_exact_normal_equations_oracle():
    rng = np.random.default_rng(0)
    A, b = rng.standard_normal((40, 5)), rng.standard_normal(40)
    x_ne = np.linalg.solve(A.T @ A, A.T @ b)
    rep = solve_exact(LsProblem(A, b))
    assert np.linalg.norm(rep.x - x_ne) <= 1e-8 * np.linalg.norm(x_ne)
    assert rep.backward_error <= 1e-12


def test_exact_rank_deficient_min_norm():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((10, 2)) @ rng.standard_normal((2, 4))
    b = rng.standard_normal(10)
    np.testing.assert_allclose(solve_exact(LsProblem(A, b)).x, np.linalg.pinv(A) @ b,
                               atol=1e-10)


def test_exact_shape_errors():
    with pytest.raises(ShapeError):
        solve_exact(LsProblem(np.ones((2, 3)), np.ones(2)))
    with pytest.raises(ShapeError):
        LsProblem(np.eye(3), np.ones(2))


# sketched solvers

def consistent(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    return LsProblem(A, A @ rng.standard_normal(n)), A


@pytest.mark.parametrize("solve", [
    lambda P, s: solve_sampled(P, r=40, seed=s),
    lambda P, s: solve_srht(P, r=40, seed=s),
    lambda P, s: solve_projected(P, l=40, seed=s),
])
def test_consistent_system_solved_exactly(solve):
    P, A = consistent(200, 6, 3)
    x_opt = solve_exact(P).x
    for s in range(5):
        rep = solve(P, s)
        assert rep.residual_norm <= 1e-10 * np.linalg.norm(P.b)
        assert np.linalg.norm(rep.x - x_opt) <= 1e-10 * np.linalg.norm(x_opt)


def test_sampled_orthonormal_uniform():
    A = orthonormal(1024, 4, 0)
    P = problem(A, 1)
    base = solve_exact(P)
    uni = ProbabilityVector.uniform(1024)
    hits = sum(solve_sampled(P, r=64, probs=uni, seed=SeedSpec(1, s),
                             baseline=base).relative_objective <= 1.5 for s in range(100))
    assert hits >= 90


def coherent_problem():
    A = generate(GenSpec(1024, 8, "coherent_block", {"tail_scale": 1e-3}, SeedSpec(4)))
    return problem(A, 5)


def test_coherent_needs_leverage_sampling():
    P = coherent_problem()
    base = solve_exact(P)
    r = default_sample_size(8)
    uni = ProbabilityVector.uniform(1024)
    bad = sum(solve_sampled(P, r=r, probs=uni, seed=SeedSpec(2, s),
                            baseline=base).relative_objective > 1.5 for s in range(100))
    good = sum(solve_sampled(P, r=r, seed=SeedSpec(3, s),
                             baseline=base).relative_objective <= 1.5 for s in range(100))
    assert bad > 50
    assert good >= 90


def test_srht_rescues_coherent():
    P = coherent_problem()
    base = solve_exact(P)
    r = math.ceil(8 * 8 * math.log(1024))
    hits = sum(solve_srht(P, r=r, seed=SeedSpec(4, s), baseline=base).relative_objective <= 1.5
               for s in range(100))
    assert hits >= 90


def test_srht_timing_recorded():
    A = np.random.default_rng(0).standard_normal((2048, 16))
    P = problem(A, 1)
    rep = solve_srht(P, r=400, seed=0)
    ex = solve_exact(P)
    # timing is indicative only at this scale
    assert rep.wall_time > 0 and ex.wall_time > 0


def test_projected_random():
    A = np.random.default_rng(7).standard_normal((512, 8))
    P = problem(A, 8)
    base = solve_exact(P)
    hits = sum(solve_projected(P, l=16 * 8, seed=SeedSpec(5, s),
                               baseline=base).relative_objective <= 1.5 for s in range(100))
    assert hits >= 90


def test_projected_sign_kind():
    A = np.random.default_rng(7).standard_normal((512, 8))
    P = problem(A, 8)
    rep = solve_projected(P, l=128, seed=1, kind="sign", baseline=True)
    assert rep.relative_objective < 2.0
    with pytest.raises(ValueError):
        solve_projected(P, l=128, kind="cauchy")


def test_projected_orthogonal_operator_is_exact():
    A = np.random.default_rng(9).standard_normal((256, 6))
    P = problem(A, 10)
    rep = solve_projected(P, op=srht_operator(256, 256, 3), baseline=True)
    x_opt = solve_exact(P).x
    assert np.linalg.norm(rep.x - x_opt) <= 1e-10 * np.linalg.norm(x_opt)
    assert rep.relative_objective == pytest.approx(1.0, abs=1e-12)


def test_sample_size_guards_and_defaults():
    assert default_sample_size(16) == math.ceil(4 * 16 * math.log(16) / 0.25)
    P = problem(np.random.default_rng(0).standard_normal((100, 5)), 1)
    with pytest.raises(ValueError):
        solve_sampled(P, r=4)
    with pytest.raises(ShapeError):
        solve_sampled(P, r=10, probs=ProbabilityVector.uniform(50))


def test_rank_loss_resamples_then_errors():
    A = np.vstack([np.eye(3), np.zeros((5, 3))])
    P = LsProblem(A, np.ones(8))
    p = ProbabilityVector.from_weights([0, 0, 0, 1, 1, 1, 1, 1])
    with pytest.raises(RankError):
        solve_sampled(P, r=10, probs=p, seed=0)


@given(gaussian_matrices(min_rows=20, max_rows=60, max_cols=5), seeds,
       st.sampled_from(["sampled", "srht", "projected"]))
def test_randomized_residual_never_beats_exact(A, seed, algo):
    rng = np.random.default_rng(seed % 2**32)
    P = LsProblem(A, rng.standard_normal(A.shape[0]))
    base = solve_exact(P)
    solve = {"sampled": solve_sampled, "srht": solve_srht, "projected": solve_projected}[algo]
    try:
        rep = solve(P, 2 * A.shape[1] + 4, seed=seed, baseline=base)
    except RankError:
        return
    assert rep.residual_norm >= base.residual_norm * (1 - 1e-12) - 1e-12
    assert 0.0 <= rep.mass_fraction <= 1.0
    assert rep.relative_objective >= 1 - 1e-12


@given(gaussian_matrices(min_rows=30, max_rows=80, max_cols=5), seeds,
       st.floats(0.2, 0.98))
def test_certificate_always_holds(A, seed, gamma):
    P = problem(A, seed % 2**32, gamma)
    base = solve_exact(P)
    try:
        rep = solve_sampled(P, r=3 * A.shape[1] + 3, seed=seed, baseline=base)
    except RankError:
        return
    assert rep.x_error <= rep.certificate_bound * (1 + 1e-9) + 1e-12 * np.linalg.norm(base.x)


def test_certificate_not_applicable_when_b_outside_range():
    A = np.vstack([np.eye(2), np.zeros((3, 2))])
    P = LsProblem(A, np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    rep = solve_projected(P, op=identity_operator(5), baseline=True)
    assert rep.certificate_bound is None


def test_best_of_keeps_smallest_residual():
    P = problem(np.random.default_rng(2).standard_normal((300, 6)), 3)
    reps = [solve_sampled(P, r=30, seed=SeedSpec(0).child(1000 + t)) for t in range(5)]
    best = best_of(solve_sampled, P, 5, seed=0, r=30)
    assert best.residual_norm == min(r.residual_norm for r in reps)
    with pytest.raises(ValueError):
        best_of(solve_sampled, P, 0)


def test_report_dict_matches_fields():
    P = problem(np.random.default_rng(2).standard_normal((300, 6)), 3)
    d = solve_srht(P, r=60, seed=1, baseline=True).to_dict()
    assert set(d) >= {"x", "residual_norm", "relative_objective", "x_error", "kappa",
                      "mass_fraction", "iterations", "sketch_recipe", "wall_time"}
    assert "wall_time" not in solve_srht(P, r=60, seed=1).to_dict(timing=False)


# sketch-and-precondition

def test_preconditioned_orthonormal_few_iterations():
    A = orthonormal(512, 8, 1)
    P = problem(A, 2)
    rep = solve_preconditioned(P, l=512, tol=1e-12, seed=0)
    assert rep.kappa == pytest.approx(1.0, abs=1e-8)
    assert rep.iterations <= 3


@pytest.fixture(scope="module")
def kappa6_runs():
    P = precond_fixture(1e6, SeedSpec(11))
    base = solve_exact(P)
    reps = [solve_preconditioned(P, l=128, tol=1e-10, seed=SeedSpec(12, s), baseline=base)
            for s in range(100)]
    return P, base, reps


def test_preconditioned_kappa_and_iterations(kappa6_runs):
    _, _, reps = kappa6_runs
    assert sum(r.kappa <= 10 for r in reps) >= 95
    assert max(r.iterations for r in reps) <= 40


def test_preconditioned_matches_exact_solution(kappa6_runs):
    _, base, reps = kappa6_runs
    xo = np.linalg.norm(base.x)
    worst = max(r.x_error / xo for r in reps)
    assert worst <= 1e-8


def test_preconditioned_kappa_independent_iterations():
    meds = []
    for j, kappa in enumerate((1e2, 1e4, 1e6)):
        P = precond_fixture(kappa, SeedSpec(20, j))
        its = [solve_preconditioned(P, l=128, tol=1e-10, seed=SeedSpec(21).child(j, s)).iterations
               for s in range(20)]
        meds.append(np.median(its))
    assert max(meds) <= 2 * min(meds)


def test_preconditioned_convergence_error_carries_iterate():
    P = precond_fixture(1e4, SeedSpec(3))
    with pytest.raises(ConvergenceError) as info:
        solve_preconditioned(P, tol=1e-10, max_iter=2, seed=0)
    assert info.value.x is not None and info.value.x.shape == (32,)
    assert info.value.iterations == 2
    with pytest.raises(ValueError):
        solve_preconditioned(P, tol=0.0)


# structural conditions

def test_structural_identity():
    A = np.random.default_rng(3).standard_normal((50, 4))
    P = problem(A, 4)
    chk = check_structural(P, Z_op=identity_operator(50))
    assert chk.sigma_min_sq == pytest.approx(1.0)
    assert chk.cross_term == pytest.approx(0.0, abs=1e-25)
    assert chk.condition1_ok and chk.condition2_ok(0.5)


def test_structural_from_sketched_images_matches_operator():
    A = np.random.default_rng(3).standard_normal((200, 4))
    P = problem(A, 4)
    op = srht_operator(200, 60, 5)
    a = check_structural(P, Z_op=op)
    Z_A, Z_b = op.apply(A, "left"), op.apply(P.b, "left")
    b = check_structural(P, Z_applied_A=Z_A, Z_applied_b=Z_b)
    assert b.sigma_min_sq == pytest.approx(a.sigma_min_sq, rel=1e-9)
    assert b.cross_term == pytest.approx(a.cross_term, rel=1e-6, abs=1e-14)


def test_structural_leverage_sampling_rate():
    n = 8
    r = math.ceil(8 * n * math.log(n))
    hits = 0
    for s in range(100):
        A = np.random.default_rng(s).standard_normal((512, n))
        P = problem(A, s + 1000)
        op = sampling_operator(exact_leverage(A).probabilities(), r, SeedSpec(6, s))
        hits += check_structural(P, Z_op=op).both_ok(0.5)
    assert hits >= 90


def test_structural_implication_no_counterexamples():
    eps = 0.5
    A = np.random.default_rng(9).standard_normal((512, 8))
    P = problem(A, 10)
    base = solve_exact(P)
    lev = exact_leverage(A).probabilities()
    xo = np.linalg.norm(base.x)
    bound = math.sqrt(eps) * base.kappa * math.sqrt(base.mass_fraction**-2 - 1) * xo
    met = bad = 0
    for t in range(1000):
        r = (40, 100, 200, 400)[t % 4]
        op = sampling_operator(lev, r, SeedSpec(7, t))
        if not check_structural(P, Z_op=op).both_ok(eps):
            continue
        met += 1
        rep = solve_projected(P, op=op, baseline=base)
        bad += not (rep.relative_objective <= (1 + eps) * (1 + 1e-9) and
                    rep.x_error <= bound * (1 + 1e-9))
    assert met > 0
    assert bad == 0


@given(seeds, st.integers(10, 120))
def test_structural_implication_property(seed, r):
    eps = 0.5
    A = np.random.default_rng(seed % 2**32).standard_normal((128, 4))
    P = problem(A, seed % 2**31)
    op = srht_operator(128, r, seed)
    chk = check_structural(P, Z_op=op)
    assert chk.sigma_min_sq >= 0 and chk.cross_term >= 0
    if chk.both_ok(eps):
        rep = solve_projected(P, op=op, baseline=True)
        assert rep.relative_objective <= (1 + eps) * (1 + 1e-9)


# minimum-norm

def test_min_norm_identity_block():
    m, n = 4, 12
    A = np.hstack([np.eye(m), np.zeros((m, n - m))])
    b = np.array([1.0, -2.0, 0.5, 3.0])
    P = LsProblem(A, b)
    probs = exact_leverage(A.T).probabilities()
    plan = plan_from_indices(probs, np.repeat(np.arange(m), 2))
    rep = solve_min_norm(P, 8, plan=plan)
    np.testing.assert_allclose(rep.x, np.concatenate([b, np.zeros(n - m)]), atol=1e-14)


def test_min_norm_random_8x256():
    hits = 0
    for s in range(100):
        rng = np.random.default_rng(s)
        P = LsProblem(rng.standard_normal((8, 256)), rng.standard_normal(8))
        x_opt = min_norm_exact(P)
        x = solve_min_norm(P, 64, seed=SeedSpec(8, s)).x
        hits += np.linalg.norm(x - x_opt) / np.linalg.norm(x_opt) <= 0.5
    assert hits >= 90


@pytest.mark.parametrize("mode", ["sample", "project"])
def test_min_norm_homogeneous(mode):
    rng = np.random.default_rng(4)
    P = LsProblem(rng.standard_normal((6, 40)), rng.standard_normal(6))
    a = solve_min_norm(P, 20, mode=mode, seed=3).x
    b = solve_min_norm(P.scaled(2.5), 20, mode=mode, seed=3).x
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-14)


def test_min_norm_guards():
    P = LsProblem(np.random.default_rng(0).standard_normal((6, 40)), np.ones(6))
    with pytest.raises(ValueError):
        solve_min_norm(P, 6)
    with pytest.raises(ValueError):
        solve_min_norm(P, 20, mode="other")
    with pytest.raises(ShapeError):
        solve_min_norm(LsProblem(np.eye(3), np.ones(3)), 5)
