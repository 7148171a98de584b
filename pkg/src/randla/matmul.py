"""Approximate matrix multiplication by sampling outer products.

``AB`` is the sum of the ``n`` rank-one terms ``A[:, i] B[i, :]``.
Sampling ``c`` of them with replacement from ``{p_i}`` and rescaling each
by ``1/(c p_i)`` gives an unbiased estimate ``C @ R``.
"""

from dataclasses import dataclass

import numpy as np

from . import config
from .errors import DistributionError, PreconditionError, ShapeError
from .numcore import as_matrix, col_norms_sq, row_norms_sq
from .sketch import ProbabilityVector, apply_sketch, make_sampling_plan


@dataclass(frozen=True)
class AmmResult:
    C: np.ndarray
    R: np.ndarray
    estimate: np.ndarray
    frobenius_error_vs: float = None


def _check_pair(A, B):
    A, B = as_matrix(A, "A"), as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"inner dimensions differ: {A.shape} x {B.shape}")
    return A, B


def amm_probs_optimal(A, B):
    """``p_i`` proportional to ``||A[:, i]|| * ||B[i, :]||`` (minimizes expected error)."""
    A, B = _check_pair(A, B)
    w = np.sqrt(col_norms_sq(A)) * np.sqrt(row_norms_sq(B))
    if not w.sum() > 0:
        raise DistributionError("every column-row product is zero")
    return ProbabilityVector.from_weights(w)


def amm_probs_onesided(A):
    """``p_i = ||A[:, i]||^2 / ||A||_F^2``."""
    A = as_matrix(A)
    w = col_norms_sq(A)
    if not w.sum() > 0:
        raise DistributionError("zero matrix has no column-norm distribution")
    return ProbabilityVector.from_weights(w)


def approx_matmul(A, B, c, p, seed, exact=True):
    """Estimate ``A @ B`` from ``c`` sampled column/row pairs.

    With ``exact=True`` and ``m * p`` at most ``amm_exact_threshold``
    entries, ``frobenius_error_vs`` holds ``||AB - CR||_F``.
    """
    A, B = _check_pair(A, B)
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(p)
    if len(p) != A.shape[1]:
        raise ShapeError(f"p has {len(p)} entries, expected {A.shape[1]}")
    plan = make_sampling_plan(p, c, seed)
    C = A[:, plan.indices] * plan.scales
    R = B[plan.indices] * plan.scales[:, None]
    est = C @ R
    err = None
    if exact and A.shape[0] * B.shape[1] <= config.get("amm_exact_threshold"):
        err = float(np.linalg.norm(A @ B - est))
    return AmmResult(C, R, est, err)


def orthogonal_sketch_check(Q, op):
    """Spectral norm ``||I_k - X.T X||_2`` where ``X = Omega.T Q``.

    Small values mean the sketch acts as an approximate isometry on
    range(Q), so rank is preserved.
    """
    Q = as_matrix(Q, "Q")
    k = Q.shape[1]
    if op.in_dim != Q.shape[0]:
        raise ShapeError(f"sketch expects {op.in_dim} rows, Q has {Q.shape[0]}")
    if np.max(np.abs(Q.T @ Q - np.eye(k))) > 1e-8:
        raise PreconditionError("Q does not have orthonormal columns")
    X = apply_sketch(op, Q, "left")
    return float(np.linalg.norm(np.eye(k) - X.T @ X, 2))
