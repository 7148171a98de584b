"""Acceptance and scaling suites.

Each acceptance check is a function of a :class:`SeedSpec` returning one
JSON-ready record ``{"criterion", "name", "passed", "observed",
"required"}``.  Records hold no timings, so two runs with the same seed
serialize to identical bytes.
"""

import json
import math

import numpy as np

from .errors import PreconditionError
from .gen import (GenSpec, BUILTIN_GRAPHS, builtin_graph, expression_labels, generate,
                  hidden_direction, ls_rhs)
from .leverage import exact_leverage, fast_leverage, graph_edge_leverage
from .lowrank import (additive_sample, cssp, cx_probabilities, range_find, relative_cx,
                      structural_bound_eval)
from .lstsq import (LsProblem, check_structural, solve_exact, solve_preconditioned,
                    solve_projected, solve_sampled, solve_srht)
from .matmul import amm_probs_optimal, approx_matmul
from .numcore import as_seed, thin_svd
from .sketch import (ProbabilityVector, gaussian_operator, make_sampling_plan,
                     sampling_operator, srht_operator)
from .leverage import WeightedGraph

SUITES = ("acceptance", "scaling")
# floating-point slack on inequalities that hold exactly in real arithmetic
FP_SLACK = 1e-9


def _record(num, name, passed, observed, required):
    return {"criterion": num, "name": name, "passed": bool(passed),
            "observed": observed, "required": required}


def _f(x):
    return float(x)


def amm_fixture(seed):
    A = seed.rng().standard_normal((30, 100))
    return A, A.T.copy()


def crit_amm_scaling(seed):
    A, B = amm_fixture(seed.child(0))
    p = amm_probs_optimal(A, B)
    med = {}
    for c in (100, 400):
        errs = [approx_matmul(A, B, c, p, seed.child(1, c, t)).frobenius_error_vs
                for t in range(51)]
        med[c] = float(np.median(errs))
    ratio = med[400] / med[100]
    return _record(1, "amm_scaling", 0.35 <= ratio <= 0.75,
                   {"median_c100": med[100], "median_c400": med[400], "ratio": ratio},
                   {"ratio_min": 0.35, "ratio_max": 0.75})


def crit_amm_envelope(seed, c=100):
    A, B = amm_fixture(seed.child(0))
    p = amm_probs_optimal(A, B)
    bound = 10.0 / math.sqrt(c) * np.linalg.norm(A) * np.linalg.norm(B)
    hits = sum(approx_matmul(A, B, c, p, seed.child(2, t)).frobenius_error_vs <= bound
               for t in range(100))
    return _record(2, "amm_envelope", hits >= 99, {"within": int(hits), "trials": 100, "c": c},
                   {"min_within": 99})


def leverage_fixtures(seed):
    """20 full-rank fixtures of assorted shapes plus 5 rank-deficient ones."""
    full, deficient = [], []
    for j in range(20):
        rng = seed.child(j).rng()
        m, n = int(rng.integers(5, 60)), 0
        n = int(rng.integers(1, m + 1))
        full.append(rng.standard_normal((m, n)))
    for j in range(5):
        rng = seed.child(100 + j).rng()
        m, n = 30, 8
        r = 2 + j
        deficient.append((rng.standard_normal((m, r)) @ rng.standard_normal((r, n)), r))
    return full, deficient


def crit_leverage_exact(seed):
    full, deficient = leverage_fixtures(seed)
    worst_hat = worst_trace = 0.0
    for A in full:
        prof = exact_leverage(A)
        hat = np.diag(A @ np.linalg.solve(A.T @ A, A.T))
        worst_hat = max(worst_hat, float(np.max(np.abs(prof.scores - hat))))
        worst_trace = max(worst_trace, abs(prof.scores.sum() - A.shape[1]))
    rank_ok = True
    for A, r in deficient:
        prof = exact_leverage(A)
        rank_ok &= prof.rank_context == r
        worst_trace = max(worst_trace, abs(prof.scores.sum() - r))
    passed = worst_hat <= 1e-10 and worst_trace <= 1e-8 and rank_ok
    return _record(3, "leverage_exact", passed,
                   {"max_hat_error": worst_hat, "max_trace_error": _f(worst_trace),
                    "ranks_detected": bool(rank_ok)},
                   {"hat_tol": 1e-10, "trace_tol": 1e-8})


def crit_fast_leverage(seed):
    observed = {}
    passed = True
    for j, prof in enumerate(("uniform", "moderate", "extreme")):
        A = generate(GenSpec(512, 8, "leverage_profile", {"profile": prof, "kappa": 100.0},
                             seed.child(0, j)))
        exact = exact_leverage(A).scores
        hits = 0
        for t in range(100):
            approx = fast_leverage(A, 0.5, seed.child(1, j, t)).scores
            hits += np.max(np.abs(approx - exact) / exact) <= 0.5
        observed[prof] = int(hits)
        passed &= hits >= 90
    return _record(4, "fast_leverage", passed, observed, {"min_within": 90, "eps": 0.5})


LS_PROFILES = ("uniform", "moderate", "extreme")
LS_SOLVERS = ("sampled", "srht", "projected")


def ls_fixture(profile, seed, m=1024, n=16, gamma=0.9):
    A = generate(GenSpec(m, n, "leverage_profile", {"profile": profile, "kappa": 100.0},
                         seed.child(0)))
    return LsProblem(A, ls_rhs(A, gamma, seed.child(1)))


def _ls_trials(seed):
    """All criterion-5 solves: ``{(solver, profile): [reports]}`` plus the negative control."""
    out = {}
    for j, prof in enumerate(LS_PROFILES):
        P = ls_fixture(prof, seed.child(0, j))
        base = solve_exact(P)
        runners = {
            "sampled": lambda s: solve_sampled(P, seed=s, baseline=base),
            "srht": lambda s: solve_srht(P, seed=s, baseline=base),
            "projected": lambda s: solve_projected(P, seed=s, baseline=base),
        }
        for i, name in enumerate(LS_SOLVERS):
            out[name, prof] = [runners[name](seed.child(1, j, i, t)) for t in range(100)]
        if prof == "extreme":
            uni = ProbabilityVector.uniform(P.shape[0])
            out["uniform_control", prof] = [
                solve_sampled(P, probs=uni, seed=seed.child(2, t), baseline=base)
                for t in range(100)]
    return out


def crit_ls_relative(seed, trials=None):
    trials = _ls_trials(seed) if trials is None else trials
    observed, passed = {}, True
    for name in LS_SOLVERS:
        for prof in LS_PROFILES:
            hits = sum(r.relative_objective <= 1.5 for r in trials[name, prof])
            observed[f"{name}/{prof}"] = int(hits)
            passed &= hits >= 90
    violations = sum(r.relative_objective > 1.5 for r in trials["uniform_control", "extreme"])
    observed["uniform_control_violations"] = int(violations)
    passed &= violations >= 50
    return _record(5, "ls_relative_error", passed, observed,
                   {"min_within": 90, "bound": 1.5, "control_min_violations": 50})


def certificate_holds(rep, x_norm):
    return rep.x_error <= rep.certificate_bound * (1 + FP_SLACK) + FP_SLACK * 1e-3 * x_norm


def crit_ls_certificate(seed, trials=None):
    trials = _ls_trials(seed) if trials is None else trials
    checked = violations = 0
    for name in LS_SOLVERS:
        for prof in LS_PROFILES:
            for r in trials[name, prof]:
                if r.relative_objective > 1.5:
                    continue
                checked += 1
                violations += not certificate_holds(r, np.linalg.norm(r.x))
    return _record(6, "ls_certificate", checked > 0 and violations == 0,
                   {"checked": checked, "violations": violations}, {"max_violations": 0})


def crit_ls_structural(seed, trials=1000, eps=0.5):
    """Structure implies the bounds: no trial meets both conditions and misses a bound."""
    fixtures = []
    for j, prof in enumerate(("gaussian", "moderate")):
        if prof == "gaussian":
            A = seed.child(0, j).rng().standard_normal((512, 8))
        else:
            A = generate(GenSpec(512, 8, "leverage_profile", {"profile": prof, "kappa": 30.0},
                                 seed.child(0, j)))
        P = LsProblem(A, ls_rhs(A, 0.9, seed.child(1, j)))
        fixtures.append((P, solve_exact(P), exact_leverage(A).probabilities()))
    sizes = (40, 80, 134, 200, 300)
    kinds = ("leverage", "uniform", "srht", "gaussian")
    both = counter = 0
    for t in range(trials):
        P, base, lev = fixtures[t % 2]
        r = sizes[(t // 2) % len(sizes)]
        kind = kinds[(t // 10) % len(kinds)]
        s = seed.child(2, t)
        m = P.shape[0]
        if kind == "leverage":
            op = sampling_operator(lev, r, s)
        elif kind == "uniform":
            op = sampling_operator(ProbabilityVector.uniform(m), r, s)
        elif kind == "srht":
            op = srht_operator(m, r, s)
        else:
            op = gaussian_operator(m, r, s)
        chk = check_structural(P, Z_op=op)
        if not chk.both_ok(eps):
            continue
        both += 1
        rep = solve_projected(P, op=op, baseline=base)
        gamma = base.mass_fraction
        xo = float(np.linalg.norm(base.x))
        x_bound = math.sqrt(eps) * base.kappa * math.sqrt(gamma**-2 - 1) * xo
        ok = (rep.relative_objective <= (1 + eps) * (1 + FP_SLACK) and
              rep.x_error <= x_bound * (1 + FP_SLACK))
        counter += not ok
    return _record(7, "ls_structural_implication", counter == 0 and both > 0,
                   {"trials": trials, "conditions_met": both, "counterexamples": counter},
                   {"max_counterexamples": 0})


def precond_fixture(kappa, seed, m=4096, n=32):
    sigma = list(np.logspace(0, -math.log10(kappa), n))
    A = generate(GenSpec(m, n, "lowrank_noise", {"k": n, "sigma": sigma}, seed.child(0)))
    return LsProblem(A, ls_rhs(A, 0.9, seed.child(1)))


def crit_preconditioning(seed, trials=100):
    observed, passed = {}, True
    medians = []
    for j, kappa in enumerate((1e2, 1e4, 1e6)):
        P = precond_fixture(kappa, seed.child(0, j))
        kap, its = [], []
        for t in range(trials):
            rep = solve_preconditioned(P, l=4 * P.shape[1], tol=1e-10, seed=seed.child(1, j, t))
            kap.append(rep.kappa)
            its.append(rep.iterations)
        hits = sum(k <= 10 for k in kap)
        medians.append(float(np.median(its)))
        observed[f"kappa_{kappa:.0e}"] = {"within": int(hits), "max_kappa": max(kap),
                                          "median_iterations": medians[-1],
                                          "max_iterations": int(max(its))}
        passed &= hits >= 95
    spread = max(medians) / min(medians)
    observed["iteration_spread"] = spread
    passed &= spread <= 2.0
    return _record(8, "preconditioning", passed, observed,
                   {"min_within": 95, "kappa_max": 10, "max_iteration_spread": 2.0})


def cx_fixture(seed, m=60, n=300):
    sigma = list(np.logspace(0, -2, m))
    return generate(GenSpec(m, n, "lowrank_noise", {"k": m, "sigma": sigma}, seed))


def cx_sample_size(k, eps=0.5):
    return math.ceil(4 * k * math.log(k) / eps**2)


def crit_cx(seed, k=6):
    c = cx_sample_size(k)
    A = cx_fixture(seed.child(0))
    ratios = [relative_cx(A, k, c, seed.child(1, t))[1].ratio_frob for t in range(100)]
    hits = sum(r <= 1.5 for r in ratios)
    H = hidden_direction(60, 300, k, seed.child(2))
    add = [additive_sample(H, k, c, seed.child(3, t))[1].ratio_frob for t in range(50)]
    rel = [relative_cx(H, k, c, seed.child(4, t))[1].ratio_frob for t in range(50)]
    med_add, med_cx = float(np.median(add)), float(np.median(rel))
    passed = hits >= 90 and med_add >= 2 * med_cx
    return _record(9, "relative_cx", passed,
                   {"c": c, "within": int(hits), "adversarial_median_additive": med_add,
                    "adversarial_median_cx": med_cx},
                   {"min_within": 90, "bound": 1.5, "min_median_factor": 2.0})


def cssp_fixture(seed, m=40, n=100):
    sigma = list(np.logspace(0, -2, m))
    return generate(GenSpec(m, n, "lowrank_noise", {"k": m, "sigma": sigma}, seed))


def _structural_evaluations(seed):
    """Explicit-``Z`` evaluations: Gaussian sketches and leverage-sampling matrices."""
    held = evaluated = skipped = 0
    A = seed.child(0).rng().standard_normal((30, 40))
    cases = [(A, 5, seed.child(1, t).rng().standard_normal((40, 15))) for t in range(100)]
    B = cssp_fixture(seed.child(2))
    probs = cx_probabilities(B, 5)
    for t in range(100):
        plan = make_sampling_plan(probs, 8 + t % 30, seed.child(3, t))
        Z = np.zeros((B.shape[1], plan.num_samples))
        Z[plan.indices, np.arange(plan.num_samples)] = plan.scales
        cases.append((B, 5, Z))
    for M, k, Z in cases:
        try:
            res = structural_bound_eval(M, Z, k)
        except PreconditionError:
            skipped += 1
            continue
        evaluated += 1
        held += res.holds()
    return evaluated, held, skipped


def crit_cssp(seed, k=5):
    A = cssp_fixture(seed.child(0))
    n = A.shape[1]
    lim = 4 * k * math.sqrt(math.log(k + 1))
    lim_spec = 4 * k**0.75 * math.sqrt(n * math.log(k + 1))
    distinct = frob_hits = spec_hits = 0
    for t in range(100):
        sel, err = cssp(A, k, seed=seed.child(1, t))
        distinct += len(set(int(i) for i in sel.indices)) == k == len(sel.indices)
        frob_hits += err.ratio_frob <= lim
        spec_hits += err.ratio_spectral <= lim_spec
    evaluated, held, skipped = _structural_evaluations(seed.child(2))
    passed = distinct == 100 and frob_hits >= 95 and evaluated > 0 and held == evaluated
    return _record(10, "cssp", passed,
                   {"exactly_k_distinct": distinct, "frob_within": int(frob_hits),
                    "spectral_within": int(spec_hits), "structural_evaluated": evaluated,
                    "structural_counterexamples": evaluated - held,
                    "structural_rank_deficient_skipped": skipped},
                   {"frob_bound": lim, "min_frob_within": 95, "max_counterexamples": 0,
                    "spectral_bound_reported": lim_spec})


def crit_range_finders(seed):
    A = generate(GenSpec(100, 200, "lowrank_noise", {"k": 100, "decay": 0.9}, seed.child(0)))
    ratios = [range_find(A, 5, "basic", {"eps": 0.5}, seed.child(1, t))[1].ratio_frob
              for t in range(100)]
    hits = sum(r <= 1.5 for r in ratios)
    S = generate(GenSpec(100, 200, "slow_decay", {"base": 0.9}, seed.child(2)))
    meds = []
    for q in (0, 1, 2, 4):
        errs = [range_find(S, 10, "power", {"p": 5, "q": q}, seed.child(3, t))[1].spectral_error
                for t in range(50)]
        meds.append(float(np.median(errs)))
    monotone = all(b <= a for a, b in zip(meds, meds[1:]))
    return _record(11, "range_finders", hits >= 90 and monotone,
                   {"basic_within": int(hits), "power_medians": dict(zip(("0", "1", "2", "4"),
                                                                          meds))},
                   {"min_within": 90, "bound": 1.5, "power_medians": "nonincreasing in q"})


def crit_synthetic(seed):
    A = generate(GenSpec(2000, 14, "synthetic_expression", {}, seed.child(0)))
    labels = expression_labels(2000)
    counts = [int(np.sum(labels == c)) for c in ("noise", "sine", "exponential")]
    s = thin_svd(A).singular_values
    frac = float(np.sum(s[:2] ** 2) / np.sum(s**2))
    passed = A.shape == (2000, 14) and counts == [1600, 200, 200] and abs(frac - 0.64) <= 0.06
    return _record(12, "synthetic_expression", passed,
                   {"shape": list(A.shape), "class_counts": counts, "top2_fraction": frac},
                   {"shape": [2000, 14], "class_counts": [1600, 200, 200],
                    "top2_fraction": [0.58, 0.70]})


def bridges(G):
    out = []
    for i in range(len(G.edges)):
        rest = G.edges[:i] + G.edges[i + 1:]
        if not WeightedGraph(G.num_nodes, rest).connected:
            out.append(i)
    return out


def crit_graphs(seed):
    observed, passed = {}, True
    for name in BUILTIN_GRAPHS:
        G = builtin_graph(name)
        scores = graph_edge_leverage(G).scores
        trace_err = abs(scores.sum() - (G.num_nodes - 1))
        br = bridges(G)
        bridge_err = max((abs(scores[i] - 1.0) for i in br), default=0.0)
        observed[name] = {"trace_error": _f(trace_err), "bridges": len(br),
                          "max_bridge_error": _f(bridge_err)}
        passed &= trace_err <= 1e-8 and bridge_err <= 1e-8
        if name == "triangle":
            tri = float(np.max(np.abs(scores - 2.0 / 3.0)))
            observed[name]["max_triangle_error"] = tri
            passed &= tri <= 1e-8
    return _record(13, "graph_leverage", passed, observed, {"tol": 1e-8})


def run_acceptance(seed=42):
    """Criteria 1-13 as records; criterion 14 needs two runs (see :func:`determinism_record`)."""
    seed = as_seed(seed)
    ls = _ls_trials(seed.child(5))
    return [
        crit_amm_scaling(seed.child(1)),
        crit_amm_envelope(seed.child(1)),
        crit_leverage_exact(seed.child(3)),
        crit_fast_leverage(seed.child(4)),
        crit_ls_relative(seed.child(5), ls),
        crit_ls_certificate(seed.child(5), ls),
        crit_ls_structural(seed.child(7)),
        crit_preconditioning(seed.child(8)),
        crit_cx(seed.child(9)),
        crit_cssp(seed.child(10)),
        crit_range_finders(seed.child(11)),
        crit_synthetic(seed.child(12)),
        crit_graphs(seed.child(13)),
    ]


def determinism_record(body_a, body_b):
    return _record(14, "determinism", body_a == body_b,
                   {"bytes": len(body_a), "identical": body_a == body_b},
                   {"identical": True})


def _quartiles(vals):
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3)}


def run_scaling(seed=42, trials=50):
    """Error-versus-size sweeps: amm over c, sampled LS over r, range finders over l and q."""
    seed = as_seed(seed)
    rows = []
    A, B = amm_fixture(seed.child(0))
    p = amm_probs_optimal(A, B)
    for c in (25, 100, 400):
        errs = [approx_matmul(A, B, c, p, seed.child(1, c, t)).frobenius_error_vs
                for t in range(trials)]
        rows.append({"suite": "scaling", "experiment": "amm", "param": "c", "value": c,
                     **_quartiles(errs)})
    P = ls_fixture("moderate", seed.child(2), m=1024, n=16)
    base = solve_exact(P)
    for r in (64, 160, 400, 710):
        vals = [solve_sampled(P, r=r, seed=seed.child(3, r, t), baseline=base)
                .relative_objective for t in range(trials)]
        rows.append({"suite": "scaling", "experiment": "lstsq_sampled", "param": "r",
                     "value": r, **_quartiles(vals)})
    M = generate(GenSpec(100, 200, "lowrank_noise", {"k": 100, "decay": 0.9}, seed.child(4)))
    for p_ in (2, 5, 10, 20):
        vals = [range_find(M, 5, "oversampled", {"p": p_}, seed.child(5, p_, t))[1].ratio_frob
                for t in range(trials)]
        rows.append({"suite": "scaling", "experiment": "range_oversampled", "param": "l",
                     "value": 5 + p_, **_quartiles(vals)})
    S = generate(GenSpec(100, 200, "slow_decay", {"base": 0.9}, seed.child(6)))
    for q in (0, 1, 2, 4):
        vals = [range_find(S, 10, "power", {"p": 5, "q": q}, seed.child(7, q, t))[1]
                .spectral_error for t in range(trials)]
        rows.append({"suite": "scaling", "experiment": "range_power", "param": "q",
                     "value": q, **_quartiles(vals)})
    for exp in ("amm", "lstsq_sampled", "range_oversampled", "range_power"):
        meds = [r["median"] for r in rows if r["experiment"] == exp]
        rows.append({"suite": "scaling", "experiment": exp, "summary": "monotone_median",
                     "passed": all(b <= a for a, b in zip(meds, meds[1:]))})
    return rows


def dumps(records):
    """JSON-lines body: one sorted-key record per line."""
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def run_suite(name, seed=42):
    if name == "acceptance":
        return run_acceptance(seed)
    if name == "scaling":
        return run_scaling(seed)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
