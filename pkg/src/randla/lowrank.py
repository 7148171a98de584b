"""Low-rank approximation by column sampling and random projection.

Errors are always reported against the truncated SVD of ``A``: an
approximation ``Ahat`` is scored by ``||A - Ahat||`` in the Frobenius and
spectral norms next to ``||A - A_k||``.  Approximants of rank at most
``k`` can never beat that baseline; higher-rank approximants (the
``P_{B_2k}`` projection, the whole span of an oversampled basis) can, so
``LowRankError`` records the approximant rank alongside the errors.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import config
from .errors import PreconditionError, RankError, ShapeError, SketchFailure
from .leverage import rank_k_leverage
from .matmul import amm_probs_onesided
from .numcore import as_matrix, as_seed, col_norms_sq, pinv_apply, range_basis, thin_qr, thin_svd
from .sketch import (ProbabilityVector, SketchOperator, apply_sketch, gaussian_operator,
                     make_sampling_plan, next_pow2, srht_operator)

METHODS = ("basic", "oversampled", "power")
# slack for comparisons that hold exactly in real arithmetic
REL_SLACK = 1e-10


@dataclass(frozen=True)
class ColumnSelection:
    indices: np.ndarray
    scales: np.ndarray
    C: np.ndarray
    probs_used: ProbabilityVector = None

    def to_dict(self):
        return {"indices": [int(i) for i in self.indices],
                "scales": [float(s) for s in self.scales]}


@dataclass(frozen=True)
class RangeBasis:
    Q: np.ndarray
    method: str
    k: int
    oversample_p: int = 0
    power_q: int = 0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] < 1:
            raise PreconditionError("a range basis needs at least one column")
        if np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) > 1e-10:
            raise PreconditionError("basis columns are not orthonormal")
        object.__setattr__(self, "Q", Q)

    @property
    def width(self):
        return self.Q.shape[1]


@dataclass(frozen=True)
class LowRankError:
    frob_error: float
    spectral_error: float
    baseline_frob: float
    baseline_spectral: float
    k: int
    approx_rank: int
    # errors of the full (untruncated) subspace projection, when relevant
    subspace_frob: float = None
    subspace_spectral: float = None
    # ||A||_F, the scale for absolute slack
    norm_A: float = 1.0

    @staticmethod
    def _ratio(err, base, scale):
        if base <= REL_SLACK * scale:
            return 1.0
        return err / base

    @property
    def ratio_frob(self):
        return self._ratio(self.frob_error, self.baseline_frob, self.norm_A)

    @property
    def ratio_spectral(self):
        return self._ratio(self.spectral_error, self.baseline_spectral, self.norm_A)

    @property
    def floor_applies(self):
        return self.approx_rank <= self.k

    def floor_ok(self, slack=REL_SLACK):
        """SVD optimality: a rank-``<= k`` approximant cannot beat ``A_k``."""
        if not self.floor_applies:
            return True
        tol = slack * self.norm_A
        return (self.frob_error >= self.baseline_frob - tol and
                self.spectral_error >= self.baseline_spectral - tol)

    def to_dict(self):
        d = {"frob_error": self.frob_error, "spectral_error": self.spectral_error,
             "baseline_frob": self.baseline_frob, "baseline_spectral": self.baseline_spectral,
             "ratio_frob": self.ratio_frob, "ratio_spectral": self.ratio_spectral,
             "k": self.k, "approx_rank": self.approx_rank}
        if self.subspace_frob is not None:
            d["subspace_frob"] = self.subspace_frob
            d["subspace_spectral"] = self.subspace_spectral
        return d


def svd_baseline(A, k):
    """``(||A - A_k||_F, ||A - A_k||_2, ||A||_F)`` from the singular values of ``A``."""
    s = np.linalg.svd(A, compute_uv=False)
    tail = s[k:]
    return float(np.sqrt(np.sum(tail**2))), float(tail[0]) if tail.size else 0.0, \
        float(np.sqrt(np.sum(s**2)))


def _norms(E):
    frob = float(np.linalg.norm(E))
    spec = float(np.linalg.norm(E, 2)) if E.size else 0.0
    return frob, spec


def projection_error(A, Ahat, k, approx_rank=None, baseline=None, subspace=None):
    """Score an approximation ``Ahat`` of ``A`` against ``A_k``.

    ``approx_rank`` defaults to the numerical rank of ``Ahat``;
    ``baseline`` may carry a precomputed :func:`svd_baseline` triple.
    """
    A = as_matrix(A)
    if not 1 <= k <= min(A.shape):
        raise ShapeError(f"k={k} must lie in [1, {min(A.shape)}]")
    bf, bs, fro = svd_baseline(A, k) if baseline is None else baseline
    frob, spec = _norms(A - Ahat)
    if approx_rank is None:
        approx_rank = thin_svd(Ahat).rank if np.any(Ahat) else 0
    sub = (None, None) if subspace is None else _norms(A - subspace)
    return LowRankError(frob, spec, bf, bs, int(k), int(approx_rank), sub[0], sub[1],
                        norm_A=fro)


def _top_left(M, k):
    """Orthonormal basis of the best rank-``k`` column space of ``M`` (rank-capped)."""
    svd = thin_svd(M)
    r = min(k, svd.rank)
    return svd.U[:, :r]


def _project(A, H):
    return H @ (H.T @ A)


def _select(A, plan, probs):
    C = A[:, plan.indices] * plan.scales
    return ColumnSelection(plan.indices, plan.scales, C, probs)


def additive_sample(A, k, c, seed, plan=None):
    """Column-norm sampling of ``c`` columns; ``A`` is projected onto ``C_k``."""
    A = as_matrix(A)
    if not 1 <= k <= c:
        raise ValueError(f"need 1 <= k <= c, got k={k}, c={c}")
    if k > min(A.shape):
        raise ShapeError(f"k={k} exceeds min(m, n)")
    probs = amm_probs_onesided(A)
    plan = make_sampling_plan(probs, c, as_seed(seed)) if plan is None else plan
    sel = _select(A, plan, probs)
    H = _top_left(sel.C, k)
    err = projection_error(A, _project(A, H), k, approx_rank=H.shape[1])
    return sel, err


def _project_operator(n, l, seed, kind):
    if kind == "gaussian":
        return gaussian_operator(n, l, seed)
    if kind == "srht":
        return srht_operator(n, min(l, next_pow2(n)), seed)
    raise ValueError(f"kind must be 'gaussian' or 'srht', got {kind!r}")


def additive_project_size(m, k, eps=0.5):
    """Default sketch width ``ceil(srht_alpha * ln(m) / eps**2)``, at least ``2k``."""
    return max(2 * k, math.ceil(config.get("srht_alpha") * math.log(m) / eps**2))


def additive_project(A, k, l, seed, kind="gaussian"):
    """``B = A Omega`` with ``l`` columns; ``A`` is projected onto ``B_2k``.

    The approximant has rank ``2k``, so its error can fall below
    ``||A - A_k||``; the additive target is
    ``||A - P_{B_2k} A||_F <= ||A - A_k||_F + eps ||A||_F``.
    """
    A = as_matrix(A)
    if l < 2 * k:
        raise ValueError(f"l={l} must be at least 2k={2 * k}")
    op = _project_operator(A.shape[1], l, as_seed(seed), kind)
    B = apply_sketch(op, A, "right")
    H = _top_left(B, 2 * k)
    basis = RangeBasis(_orth(B), "projection", k)
    err = projection_error(A, _project(A, H), k, approx_rank=H.shape[1])
    return basis, err


def cx_probabilities(A, k):
    """``p_i = ||(V_k.T)^(i)||^2 / k``: rank-``k`` leverage of the columns."""
    return rank_k_leverage(A.T, k).probabilities()


def relative_cx(A, k, c, seed, probs=None, plan=None):
    """Leverage-based column sampling; ``A`` is projected onto ``C_k``."""
    A = as_matrix(A)
    if not 1 <= k <= c:
        raise ValueError(f"need 1 <= k <= c, got k={k}, c={c}")
    if probs is None:
        probs = cx_probabilities(A, k)
    elif not isinstance(probs, ProbabilityVector):
        probs = ProbabilityVector(probs)
    plan = make_sampling_plan(probs, c, as_seed(seed)) if plan is None else plan
    sel = _select(A, plan, probs)
    H = _top_left(sel.C, k)
    err = projection_error(A, _project(A, H), k, approx_rank=H.shape[1])
    return sel, err


def cur(A, k, c, r, seed, col_plan=None, row_plan=None):
    """CUR from rank-``k`` column and row leverage, middle factor ``M = C^+ A R^+``.

    ``C`` and ``R`` hold actual (unscaled) columns and rows of ``A``;
    rescaling would cancel in ``C M R``.  Returns ``(C, M, R, error)``.
    """
    A = as_matrix(A)
    if c < k or r < k:
        raise ValueError(f"need c, r >= k, got c={c}, r={r}, k={k}")
    seed = as_seed(seed)
    if col_plan is None:
        col_plan = make_sampling_plan(cx_probabilities(A, k), c, seed.child(0))
    if row_plan is None:
        row_plan = make_sampling_plan(rank_k_leverage(A, k).probabilities(), r, seed.child(1))
    C = A[:, col_plan.indices]
    R = A[row_plan.indices]
    if thin_svd(C).rank < k or thin_svd(R).rank < k:
        raise RankError("sampled C or R has rank below k")
    M = pinv_apply(C, pinv_apply(R.T, A.T).T)
    CMR = C @ M @ R
    err = projection_error(A, CMR, k)
    return C, M, R, err


def cssp(A, k, c_phase1=None, seed=0):
    """Exactly ``k`` distinct columns by leverage sampling then pivoted QR.

    Phase one samples ``c`` columns of ``V_k.T`` (rank-``k`` leverage
    probabilities) with rescaling; phase two runs a column-pivoted
    Householder QR on that ``k x c`` sample and keeps the first ``k``
    pivots.  With fewer than ``k`` distinct draws, ``c`` is doubled once.
    The returned error uses the projection onto all ``k`` columns.
    """
    A = as_matrix(A)
    m, n = A.shape
    if not 1 <= k <= min(m, n):
        raise ShapeError(f"k={k} must lie in [1, {min(m, n)}]")
    c = c_phase1 or math.ceil(config.get("cssp_multiplier") * k * math.log(k + 1))
    c = max(c, k)
    seed = as_seed(seed)
    Vk = thin_svd(A, k).Vt
    probs = ProbabilityVector.from_weights(col_norms_sq(Vk))
    for attempt in range(2):
        plan = make_sampling_plan(probs, c, seed.child(attempt))
        if np.unique(plan.indices).size >= k:
            Vs = Vk[:, plan.indices] * plan.scales
            _, R, piv = scipy.linalg.qr(Vs, mode="economic", pivoting=True)
            chosen = plan.indices[piv[:k]]
            d = np.abs(np.diag(R))[:k]
            if np.unique(chosen).size == k and d[-1] > max(m, n) * np.finfo(float).eps * d[0]:
                break
        c *= 2
    else:
        raise SketchFailure(f"phase one did not yield {k} independent columns")
    idx = np.array(chosen, dtype=np.int64)
    C = A[:, idx]
    ones = np.ones(k)
    sel = ColumnSelection(idx, ones, C, probs)
    H = range_basis(C)
    err = projection_error(A, _project(A, H), k, approx_rank=H.shape[1])
    return sel, err


@dataclass(frozen=True)
class StructuralBound:
    lhs_frob: float
    rhs_frob: float
    lhs_spectral: float
    rhs_spectral: float
    norm_sq: float = 1.0

    def holds(self, slack=REL_SLACK):
        tol = slack * self.norm_sq
        return (self.lhs_frob <= self.rhs_frob + tol and
                self.lhs_spectral <= self.rhs_spectral + tol)

    def as_pairs(self):
        return {"fro": (self.lhs_frob, self.rhs_frob), "2": (self.lhs_spectral, self.rhs_spectral)}


def structural_bound_eval(A, Z, k):
    """Evaluate both sides of the deterministic low-rank sketching inequality.

    For an explicit ``n x l`` matrix ``Z`` (or a :class:`SketchOperator`
    on the columns) with ``V_k.T Z`` of full row rank::

        ||A - P_{AZ} A||^2 <= ||A - A_k||^2
                              + ||S_perp (V_perp.T Z) pinv(V_k.T Z)||^2

    in both the Frobenius and spectral norms (squared values returned).
    """
    A = as_matrix(A)
    n = A.shape[1]
    if isinstance(Z, SketchOperator):
        Z = apply_sketch(Z, np.eye(n), "right")
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if Z.shape[0] != n:
        raise ShapeError(f"Z must have {n} rows, got {Z.shape[0]}")
    U, s, Vt = scipy.linalg.svd(A, full_matrices=False)
    if not 1 <= k <= s.size:
        raise ShapeError(f"k={k} must lie in [1, {s.size}]")
    VkZ = Vt[:k] @ Z
    sv = np.linalg.svd(VkZ, compute_uv=False)
    if sv.size < k or sv[-1] <= max(VkZ.shape) * np.finfo(float).eps * sv[0]:
        raise PreconditionError("V_k.T Z is rank-deficient")
    E = A - _project(A, range_basis(A @ Z))
    lhs_f, lhs_2 = _norms(E)
    tail = s[k:]
    T = (tail[:, None] * (Vt[k:] @ Z)) @ np.linalg.pinv(VkZ)
    t_f, t_2 = _norms(T) if T.size else (0.0, 0.0)
    base_f = float(np.sum(tail**2))
    base_2 = float(tail[0] ** 2) if tail.size else 0.0
    return StructuralBound(lhs_f**2, base_f + t_f**2, lhs_2**2, base_2 + t_2**2,
                           float(np.sum(s**2)))


def _orth(Y):
    return np.array(thin_qr(Y).Q) if Y.shape[0] >= Y.shape[1] else range_basis(Y)


def range_find(A, k, method="oversampled", params=None, seed=0, kind="gaussian"):
    """Randomized range finder; returns ``(RangeBasis, LowRankError)``.

    ``basic`` (``params={"eps": e}``): SRHT with ``l = ceil(4k/eps)``
    columns, error of the projection onto ``B_k``.  ``oversampled``
    (``{"p": p}``): ``l = k + p``.  ``power`` (``{"p": p, "q": q}``):
    ``(A A.T)^q A Omega``, re-orthonormalized after every product with
    ``A`` or ``A.T``.  For the last two the error is that of
    ``Q [Q.T A]_k``; ``subspace_*`` fields hold ``||A - Q Q.T A||``.
    """
    A = as_matrix(A)
    m, n = A.shape
    params = dict(params or {})
    if not 1 <= k <= min(m, n):
        raise ShapeError(f"k={k} must lie in [1, {min(m, n)}]")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    seed = as_seed(seed)
    p = q = 0
    if method == "basic":
        eps = float(params["eps"])
        l = math.ceil(config.get("range_basic_multiplier") * k / eps)
        kind = "srht"
    else:
        p = int(params.get("p", 0))
        if p < 1:
            raise ValueError("oversampling p must be at least 1")
        l = k + p
        if method == "power":
            q = int(params.get("q", 0))
            if q < 0:
                raise ValueError("power q must be nonnegative")
    l = min(l, n) if kind == "gaussian" else min(l, next_pow2(n))
    for attempt in range(2):
        op = _project_operator(n, l, seed.child(attempt), kind)
        Y = apply_sketch(op, A, "right")
        if thin_svd(Y).rank >= min(k, thin_svd(A).rank):
            break
    else:
        raise RankError("sketch A Omega collapsed in rank after a retry")
    Q = _orth(Y)
    for _ in range(q):
        W = _orth(A.T @ Q)
        Q = _orth(A @ W)
    basis = RangeBasis(Q, method, k, p, q)
    if method == "basic":
        H = _top_left(Y, k)
        err = projection_error(A, _project(A, H), k, approx_rank=H.shape[1])
    else:
        QtA = Q.T @ A
        Ub = _top_left(QtA, k)
        Ahat = Q @ (Ub @ (Ub.T @ QtA))
        err = projection_error(A, Ahat, k, approx_rank=Ub.shape[1],
                               subspace=Q @ QtA)
    return basis, err


def posterior_error_estimate(A, basis, num_probes=10, seed=0):
    """Probe estimate of ``||(I - Q Q.T) A||_2``.

    ``inflation * max_j ||(I - Q Q.T) A g_j|| / ||g_j||`` over Gaussian
    probes ``g_j``; each probe ratio is a lower bound, the inflation
    factor (default 10) turns the maximum into a likely upper bound.
    """
    A = as_matrix(A)
    if num_probes < 1:
        raise ValueError("need at least one probe")
    Q = basis.Q if isinstance(basis, RangeBasis) else RangeBasis(basis, "given", 1).Q
    if Q.shape[0] != A.shape[0]:
        raise ShapeError(f"basis has {Q.shape[0]} rows, A has {A.shape[0]}")
    G = as_seed(seed).rng().standard_normal((A.shape[1], num_probes))
    Y = A @ G
    Y = Y - Q @ (Q.T @ Y)
    ratios = np.linalg.norm(Y, axis=0) / np.linalg.norm(G, axis=0)
    return float(config.get("posterior_inflation") * ratios.max())


def spectral_residual(A, basis):
    """Exact ``||(I - Q Q.T) A||_2`` (oracle for the probe estimate)."""
    Q = basis.Q if isinstance(basis, RangeBasis) else basis
    return float(np.linalg.norm(A - Q @ (Q.T @ A), 2))
