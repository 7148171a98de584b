"""Overconstrained least squares by sketching, plus the minimum-norm variant.

Every randomized solver reduces ``min ||Ax - b||`` to a smaller problem
``min ||Z A x - Z b||`` for a random ``Z`` and solves that exactly.  When
a baseline is supplied (or ``baseline=True``) the report carries the
realized objective ratio ``||b - A x~|| / ||b - A x_opt||``, the forward
error and the a posteriori forward-error certificate

    sqrt(eps) * kappa(A) * sqrt(gamma**-2 - 1) * ||x_opt||,

with ``eps = ratio**2 - 1`` and ``gamma = ||P_A b|| / ||b||``.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import config
from .errors import ConvergenceError, RankError, ShapeError
from .leverage import exact_leverage
from .numcore import as_matrix, as_seed, as_vector, pinv_apply, thin_qr, thin_svd
from .sketch import (ProbabilityVector, apply_sketch, gaussian_operator,
                     next_pow2, sampling_operator, sign_operator, srht_operator)

# below this mass fraction the certificate is reported as not applicable
GAMMA_FLOOR = 1e-8


@dataclass(frozen=True)
class LsProblem:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        b = as_vector(self.b, "b")
        if b.size != A.shape[0]:
            raise ShapeError(f"b has length {b.size}, A has {A.shape[0]} rows")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self):
        return self.A.shape

    def scaled(self, alpha):
        return LsProblem(alpha * self.A, alpha * self.b)


@dataclass(frozen=True)
class SolveReport:
    x: np.ndarray
    residual_norm: float
    algo: str
    relative_objective: float = None
    x_error: float = None
    kappa: float = None
    mass_fraction: float = None
    certificate_bound: float = None
    backward_error: float = None
    iterations: int = 0
    sketch_recipe: dict = None
    wall_time: float = field(default=None, compare=False)

    @property
    def eps_realized(self):
        if self.relative_objective is None:
            return None
        return max(self.relative_objective**2 - 1.0, 0.0)

    def to_dict(self, timing=True):
        d = {
            "algo": self.algo,
            "x": [float(v) for v in self.x],
            "residual_norm": self.residual_norm,
            "relative_objective": self.relative_objective,
            "x_error": self.x_error,
            "kappa": self.kappa,
            "mass_fraction": self.mass_fraction,
            "certificate_bound": self.certificate_bound,
            "backward_error": self.backward_error,
            "iterations": self.iterations,
            "sketch_recipe": self.sketch_recipe,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass(frozen=True)
class StructuralCheck:
    sigma_min_sq: float
    cross_term: float
    residual_sq: float

    @property
    def condition1_ok(self):
        return self.sigma_min_sq >= 1.0 / math.sqrt(2.0)

    def condition2_ok(self, eps):
        return self.cross_term <= 0.5 * eps * self.residual_sq

    def both_ok(self, eps):
        return self.condition1_ok and self.condition2_ok(eps)


def _problem(P, b=None):
    if isinstance(P, LsProblem):
        return P
    return LsProblem(P, b) if b is not None else LsProblem(*P)


def _backward_error(A, b, x):
    r = b - A @ x
    rn = np.linalg.norm(r)
    if rn == 0.0:
        return 0.0, 0.0
    return float(rn), float(np.linalg.norm(A.T @ r) / (np.linalg.norm(A) * rn))


def solve_exact(P):
    """Householder QR solve ``x = R^{-1} Q.T b``.

    A numerically rank-deficient ``A`` falls back to the SVD
    pseudoinverse, which returns the minimum-norm minimizer.  ``kappa``
    and ``mass_fraction`` are always filled in.
    """
    t0 = time.perf_counter()
    P = _problem(P)
    A, b = P.A, P.b
    m, n = A.shape
    if m < n:
        raise ShapeError(f"solve_exact needs m >= n, got {A.shape}; use solve_min_norm")
    qr = thin_qr(A)
    s = np.linalg.svd(qr.R, compute_uv=False)
    if qr.full_rank and s[-1] > 0:
        x = scipy.linalg.solve_triangular(qr.R, qr.Q.T @ b)
        kappa = float(s[0] / s[-1])
    else:
        x = pinv_apply(A, b)
        svd = thin_svd(A)
        nz = svd.singular_values[: svd.rank]
        kappa = float(nz[0] / nz[-1]) if nz.size else math.inf
    bn = np.linalg.norm(b)
    gamma = float(min(np.linalg.norm(A @ x) / bn, 1.0)) if bn > 0 else 0.0
    res, back = _backward_error(A, b, x)
    return SolveReport(x, res, "exact", relative_objective=1.0, x_error=0.0, kappa=kappa,
                       mass_fraction=gamma, backward_error=back,
                       wall_time=time.perf_counter() - t0)


def _attach_baseline(rep, P, baseline):
    """Fill the comparison fields of ``rep`` from an exact report."""
    if baseline is None or baseline is False:
        return rep
    if baseline is True:
        baseline = solve_exact(P)
    x_opt = baseline.x
    r_opt = baseline.residual_norm
    # a residual at rounding level means the system is consistent
    floor = 1e-12 * max(float(np.linalg.norm(P.b)), 1.0)
    if r_opt > floor:
        ratio = rep.residual_norm / r_opt
    else:
        ratio = 1.0 if rep.residual_norm <= floor else math.inf
    x_err = float(np.linalg.norm(rep.x - x_opt))
    gamma = baseline.mass_fraction
    cert = None
    if gamma >= GAMMA_FLOOR and math.isfinite(ratio):
        eps = max(ratio**2 - 1.0, 0.0)
        cert = math.sqrt(eps) * baseline.kappa * math.sqrt(max(gamma**-2 - 1.0, 0.0)) * \
            float(np.linalg.norm(x_opt))
    kappa = rep.kappa if rep.kappa is not None else baseline.kappa
    return replace(rep, relative_objective=float(ratio), x_error=x_err, kappa=kappa,
                   mass_fraction=gamma, certificate_bound=cert)


def default_sample_size(n, eps=None):
    """``ceil(mult * n * ln(n) / eps**2)`` rows, at least ``n``."""
    eps = config.get("ls_eps") if eps is None else eps
    mult = config.get("ls_sample_multiplier")
    return max(n, math.ceil(mult * n * max(math.log(n), 1.0) / eps**2))


def _sketched_solve(P, make_op, seed, algo, baseline, t0):
    """Solve ``min ||Z(Ax - b)||`` for ``Z = make_op(sub_seed)``; one resample on rank loss."""
    A, b = P.A, P.b
    n = A.shape[1]
    Ab = np.column_stack([A, b])
    for attempt in range(2):
        op = make_op(seed.child(attempt))
        ZAb = apply_sketch(op, Ab, "left")
        ZA, Zb = ZAb[:, :n], ZAb[:, n]
        if ZA.shape[0] >= n and thin_svd(ZA).rank == n:
            break
    else:
        raise RankError(f"{algo}: sketched matrix stayed rank-deficient after a resample")
    sub = solve_exact(LsProblem(ZA, Zb))
    res, back = _backward_error(A, b, sub.x)
    rep = SolveReport(sub.x, res, algo, backward_error=back, sketch_recipe=op.to_recipe())
    rep = _attach_baseline(rep, P, baseline)
    return replace(rep, wall_time=time.perf_counter() - t0)


def _check_size(r, n, name="r"):
    if r < n:
        raise ValueError(f"{name}={r} must be at least n={n}")


def solve_sampled(P, r=None, probs=None, seed=0, baseline=None, eps=None):
    """Sample-and-rescale ``r`` rows of ``[A b]`` (leverage probabilities by default)."""
    t0 = time.perf_counter()
    P = _problem(P)
    m, n = P.shape
    r = default_sample_size(n, eps) if r is None else int(r)
    _check_size(r, n)
    if probs is None:
        probs = exact_leverage(P.A).probabilities()
    elif not isinstance(probs, ProbabilityVector):
        probs = ProbabilityVector(probs)
    if len(probs) != m:
        raise ShapeError(f"probs has {len(probs)} entries, A has {m} rows")
    return _sketched_solve(P, lambda s: sampling_operator(probs, r, s), as_seed(seed),
                           "sampled", baseline, t0)


def solve_srht(P, r=None, seed=0, baseline=None, eps=None):
    """Randomized Hadamard rotation of ``[A b]`` then uniform sampling of ``r`` rows."""
    t0 = time.perf_counter()
    P = _problem(P)
    m, n = P.shape
    r = default_sample_size(n, eps) if r is None else int(r)
    _check_size(r, n)
    r = min(r, next_pow2(m))
    return _sketched_solve(P, lambda s: srht_operator(m, r, s), as_seed(seed),
                           "srht", baseline, t0)


def solve_projected(P, l=None, seed=0, baseline=None, kind="gaussian", op=None, eps=None):
    """Dense random projection with ``l`` rows (Gaussian or random signs).

    ``op`` substitutes a caller-built operator, e.g. an orthogonal one.
    """
    t0 = time.perf_counter()
    P = _problem(P)
    m, n = P.shape
    if op is not None:
        return _sketched_solve(P, lambda s: op, as_seed(seed), "projected", baseline, t0)
    l = default_sample_size(n, eps) if l is None else int(l)
    _check_size(l, n, "l")
    makers = {"gaussian": gaussian_operator, "sign": sign_operator}
    if kind not in makers:
        raise ValueError(f"kind must be one of {sorted(makers)}")
    return _sketched_solve(P, lambda s: makers[kind](m, l, s), as_seed(seed),
                           "projected", baseline, t0)


def _cgls(A, R, b, tol, max_iter):
    """CG on the normal equations of ``M = A R^{-1}``; returns ``y``, iterations and status."""
    def M(v):
        return A @ scipy.linalg.solve_triangular(R, v)

    def Mt(v):
        return scipy.linalg.solve_triangular(R, A.T @ v, trans="T")

    n = A.shape[1]
    y = np.zeros(n)
    res = b.copy()
    s = Mt(res)
    s0 = np.linalg.norm(s)
    if s0 == 0.0:
        return y, 0, True, 0.0
    p = s.copy()
    gamma = s @ s
    best = (1.0, y.copy())
    for it in range(1, max_iter + 1):
        q = M(p)
        alpha = gamma / (q @ q)
        y = y + alpha * p
        res = res - alpha * q
        s = Mt(res)
        gnew = s @ s
        rel = math.sqrt(gnew) / s0
        if rel < best[0]:
            best = (rel, y.copy())
        if rel <= tol:
            return y, it, True, rel
        p = s + (gnew / gamma) * p
        gamma = gnew
    return best[1], max_iter, False, best[0]


def solve_preconditioned(P, l=None, tol=None, max_iter=None, seed=0, baseline=None):
    """Sketch-and-precondition: QR of an SRHT sketch, then preconditioned CGLS.

    ``R`` from ``thin_qr(Omega.T A)`` makes ``A R^{-1}`` well conditioned
    whatever ``kappa(A)`` is, so the iteration count depends on ``tol``
    only.  Stops once ``||M.T r_k|| <= tol * ||M.T b||`` for
    ``M = A R^{-1}``; ``report.kappa`` is the measured ``kappa(M)``.
    Exceeding ``max_iter`` raises :class:`ConvergenceError` carrying the
    best iterate.
    """
    t0 = time.perf_counter()
    P = _problem(P)
    A, b = P.A, P.b
    m, n = A.shape
    l = 4 * n if l is None else int(l)
    tol = config.get("cg_tol") if tol is None else float(tol)
    max_iter = config.get("cg_max_iter") if max_iter is None else int(max_iter)
    if not tol > 0:
        raise ValueError("tol must be positive")
    _check_size(l, n, "l")
    l = min(l, next_pow2(m))
    seed = as_seed(seed)
    for attempt in range(2):
        op = srht_operator(m, l, seed.child(attempt))
        qr = thin_qr(apply_sketch(op, A, "left"))
        if qr.full_rank:
            break
    else:
        raise RankError("preconditioner sketch stayed rank-deficient after a resample")
    R = np.array(qr.R)
    y, iters, ok, rel = _cgls(A, R, b, tol, max_iter)
    x = scipy.linalg.solve_triangular(R, y)
    s = np.linalg.svd(A @ scipy.linalg.solve_triangular(R, np.eye(n)), compute_uv=False)
    kappa = float(s[0] / s[-1])
    if not ok:
        raise ConvergenceError(f"CGLS stopped after {iters} iterations at relative "
                               f"residual {rel:.3e} > tol {tol:.1e}", x=x, iterations=iters,
                               residual=rel)
    res, back = _backward_error(A, b, x)
    rep = SolveReport(x, res, "precond", kappa=kappa, backward_error=back, iterations=iters,
                      sketch_recipe=op.to_recipe())
    rep = _attach_baseline(rep, P, baseline)
    return replace(rep, kappa=kappa, wall_time=time.perf_counter() - t0)


def check_structural(P, Z_applied_A=None, Z_applied_b=None, Z_op=None, eps=None):
    """Evaluate the two structural conditions for a sketch ``Z``.

    ``U`` is the exact left singular basis of ``A`` and
    ``b_perp = b - U U.T b``.  ``Z_op`` is applied to ``U`` and ``b_perp``
    when given; otherwise ``Z U`` and ``Z b_perp`` are recovered from the
    sketched ``Z A`` and ``Z b`` through ``A = U S V.T``.
    """
    P = _problem(P)
    svd = thin_svd(P.A)
    r = svd.rank
    U, s, Vt = svd.U[:, :r], svd.singular_values[:r], svd.Vt[:r]
    b_perp = P.b - U @ (U.T @ P.b)
    if Z_op is not None:
        ZU = apply_sketch(Z_op, U, "left")
        Zbp = apply_sketch(Z_op, b_perp, "left")
    else:
        if Z_applied_A is None or Z_applied_b is None:
            raise ValueError("need Z_op or both sketched images")
        ZA = np.asarray(Z_applied_A, dtype=np.float64)
        ZU = ZA @ Vt.T / s
        # Z b_perp = Z b - (Z U)(U.T b)
        Zbp = np.asarray(Z_applied_b, dtype=np.float64) - ZU @ (U.T @ P.b)
    smin = np.linalg.svd(ZU, compute_uv=False)[-1] if ZU.shape[0] >= r else 0.0
    cross = np.linalg.norm(ZU.T @ Zbp) ** 2
    return StructuralCheck(float(smin**2), float(cross), float(b_perp @ b_perp))


def solve_min_norm(P, c, mode="sample", seed=0, plan=None):
    """Approximate minimum-length solution of an underdetermined ``Ax = b``.

    Sketch the columns, ``AS`` (``m x c``), then return
    ``x~ = A.T pinv(AS).T pinv(AS) b``.  ``mode="sample"`` draws columns
    by the leverage of ``A.T``; ``mode="project"`` uses an SRHT on the
    columns.  ``plan`` forces the column draws (test hook).
    """
    t0 = time.perf_counter()
    P = _problem(P)
    A, b = P.A, P.b
    m, n = A.shape
    if m >= n:
        raise ShapeError(f"solve_min_norm needs m < n, got {A.shape}")
    if plan is None and c <= m:
        raise ValueError(f"c={c} must exceed m={m}")
    seed = as_seed(seed)
    if mode == "sample":
        probs = exact_leverage(A.T).probabilities()

        def make_op(s):
            return sampling_operator(probs, c, s, plan=plan)
    elif mode == "project":
        c = min(c, next_pow2(n))

        def make_op(s):
            return srht_operator(n, c, s)
    else:
        raise ValueError(f"mode must be 'sample' or 'project', got {mode!r}")
    for attempt in range(2):
        op = make_op(seed.child(attempt))
        AS = apply_sketch(op, A, "right")
        if thin_svd(AS).rank == m:
            break
    else:
        raise RankError("column sketch stayed rank-deficient after a resample")
    w = pinv_apply(AS.T, pinv_apply(AS, b))
    x = A.T @ w
    res = float(np.linalg.norm(A @ x - b))
    return SolveReport(x, res, "minnorm", sketch_recipe=op.to_recipe(),
                       wall_time=time.perf_counter() - t0)


def min_norm_exact(P):
    """Exact minimum-norm solution ``pinv(A) b`` (oracle for :func:`solve_min_norm`)."""
    P = _problem(P)
    return pinv_apply(P.A, P.b)


SOLVERS = {
    "exact": lambda P, seed=0, **kw: solve_exact(P),
    "sampled": solve_sampled,
    "srht": solve_srht,
    "projected": solve_projected,
    "precond": solve_preconditioned,
}


def best_of(solver, P, repeats, seed=0, **kwargs):
    """Run ``solver`` with ``repeats`` independent sub-seeds and keep the smallest residual."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    seed = as_seed(seed)
    if repeats == 1:
        return solver(P, seed=seed, **kwargs)
    reports = [solver(P, seed=seed.child(1000 + t), **kwargs) for t in range(repeats)]
    return min(reports, key=lambda rep: rep.residual_norm)
