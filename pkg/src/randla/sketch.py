"""Random linear maps: sampling-and-rescaling, Gaussian, sign and SRHT sketches.

A :class:`SketchOperator` stands for an ``in_dim x out_dim`` matrix
``Omega``.  Right application computes ``A @ Omega``; left application
computes ``Omega.T @ A``.  Sampling is always with replacement.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DistributionError, ShapeError
from .numcore import SeedSpec, as_matrix, as_seed

KINDS = ("sampling", "gaussian", "sign", "srht")
SIDES = ("left", "right")


@dataclass(frozen=True)
class ProbabilityVector:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64, copy=True).ravel()
        if p.size == 0:
            raise DistributionError("empty probability vector")
        if not np.all(np.isfinite(p)):
            raise DistributionError("probabilities must be finite")
        if np.any(p < 0):
            raise DistributionError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DistributionError(f"probabilities sum to {p.sum():.17g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size

    @classmethod
    def from_weights(cls, w):
        w = np.asarray(w, dtype=np.float64).ravel()
        if np.any(w < 0):
            raise DistributionError("weights must be nonnegative")
        total = w.sum()
        if not total > 0:
            raise DistributionError("weights sum to zero")
        p = w / total
        # push the rounding residue onto the largest entry so the sum is 1
        p[np.argmax(p)] += 1.0 - p.sum()
        return cls(p)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class SamplingPlan:
    source_dim: int
    num_samples: int
    indices: np.ndarray
    scales: np.ndarray
    seed: SeedSpec = None


def make_sampling_plan(p, c, seed):
    """Draw ``c`` indices i.i.d. from ``p`` and attach the ``1/sqrt(c p_i)`` rescaling.

    Zero-probability entries are dropped from the alphabet up front, so
    they can never be drawn.
    """
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(p)
    if c < 1:
        raise ValueError(f"need at least one sample, got c={c}")
    seed = as_seed(seed)
    support = np.flatnonzero(p.probs > 0)
    cdf = np.cumsum(p.probs[support])
    u = seed.rng().random(c) * cdf[-1]
    pos = np.minimum(np.searchsorted(cdf, u, side="right"), support.size - 1)
    idx = support[pos]
    scales = 1.0 / np.sqrt(c * p.probs[idx])
    idx.setflags(write=False)
    scales.setflags(write=False)
    return SamplingPlan(len(p), int(c), idx, scales, seed)


def plan_from_indices(p, indices):
    """Deterministic plan with caller-chosen draws (used to force distinct picks)."""
    if not isinstance(p, ProbabilityVector):
        p = ProbabilityVector(p)
    idx = np.asarray(indices, dtype=np.int64)
    if np.any(p.probs[idx] <= 0):
        raise DistributionError("cannot select an index with zero probability")
    scales = 1.0 / np.sqrt(idx.size * p.probs[idx])
    idx.setflags(write=False)
    scales.setflags(write=False)
    return SamplingPlan(len(p), int(idx.size), idx, scales, None)


def next_pow2(n):
    return 1 << max(0, int(n) - 1).bit_length()


def _fwht(X):
    """Normalized Walsh-Hadamard transform along axis 0 (Sylvester ordering)."""
    n = X.shape[0]
    Y = np.array(X, dtype=np.float64, copy=True).reshape(n, -1)
    h = 1
    while h < n:
        Y = Y.reshape(n // (2 * h), 2, h, -1)
        a, b = Y[:, 0], Y[:, 1]
        Y = np.stack((a + b, a - b), axis=1).reshape(n, -1)
        h *= 2
    return Y / math.sqrt(n)


def hadamard_apply(x, side="left"):
    """Multiply by the normalized Hadamard matrix ``H = H_n / sqrt(n)``.

    ``side="left"`` returns ``H @ x``, ``side="right"`` returns ``x @ H``.
    A 1-D input is treated as a column vector and a 1-D result returned.
    The applied dimension must be a power of two.
    """
    x = np.asarray(x, dtype=np.float64)
    vector = x.ndim == 1
    X = x.reshape(-1, 1) if vector else x
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    X = X if side == "left" else X.T
    n = X.shape[0]
    if n < 1 or n & (n - 1):
        raise ShapeError(f"Hadamard dimension must be a power of two, got {n}")
    Y = _fwht(X)
    Y = Y if side == "left" else Y.T
    return Y.ravel() if vector else Y


@dataclass(frozen=True)
class SketchOperator:
    """Seeded description of a random ``in_dim x out_dim`` matrix ``Omega``.

    ``plan`` holds the row/column draws for ``sampling`` and ``srht``
    kinds (``None`` for an SRHT without subsampling).  ``seed`` drives the
    dense entries of ``gaussian``/``sign`` and the diagonal of ``srht``.
    """

    kind: str
    in_dim: int
    out_dim: int
    plan: SamplingPlan = None
    seed: SeedSpec = None
    padded_dim: int = None
    forced_signs: tuple = None

    @cached_property
    def signs(self):
        if self.kind != "srht":
            return None
        if self.forced_signs is not None:
            return np.asarray(self.forced_signs, dtype=np.float64)
        bits = self.seed.child(0).rng().integers(0, 2, size=self.padded_dim)
        return 2.0 * bits - 1.0

    @cached_property
    def dense(self):
        """Materialized ``Omega`` for the unstructured kinds."""
        rng = self.seed.rng()
        shape = (self.in_dim, self.out_dim)
        if self.kind == "gaussian":
            return rng.standard_normal(shape) / math.sqrt(self.out_dim)
        if self.kind == "sign":
            return (2.0 * rng.integers(0, 2, size=shape) - 1.0) / math.sqrt(self.out_dim)
        raise TypeError(f"{self.kind} sketches are applied implicitly")

    def apply(self, A, side="left"):
        return apply_sketch(self, A, side)

    def to_recipe(self):
        rec = {"kind": self.kind, "in_dim": self.in_dim, "out_dim": self.out_dim}
        if self.seed is not None:
            rec["seed"] = self.seed.to_dict()
        if self.padded_dim is not None:
            rec["padded_dim"] = self.padded_dim
        if self.forced_signs is not None:
            rec["signs"] = [int(s) for s in self.forced_signs]
        if self.plan is not None:
            rec["indices"] = [int(i) for i in self.plan.indices]
            rec["scales"] = [float(s) for s in self.plan.scales]
        return rec

    @classmethod
    def from_recipe(cls, rec):
        seed = SeedSpec.from_dict(rec["seed"]) if "seed" in rec else None
        plan = None
        if "indices" in rec:
            src = rec["padded_dim"] if rec["kind"] == "srht" else rec["in_dim"]
            idx = np.asarray(rec["indices"], dtype=np.int64)
            scales = np.asarray(rec["scales"], dtype=np.float64)
            plan = SamplingPlan(src, idx.size, idx, scales, None)
        signs = tuple(rec["signs"]) if "signs" in rec else None
        return cls(rec["kind"], rec["in_dim"], rec["out_dim"], plan, seed,
                   rec.get("padded_dim"), signs)


def sampling_operator(p, c=None, seed=0, plan=None):
    """Sampling-and-rescaling operator, drawn from ``p`` or wrapping a given ``plan``."""
    if plan is None:
        plan = make_sampling_plan(p, c, seed)
    return SketchOperator("sampling", plan.source_dim, plan.num_samples, plan=plan,
                          seed=plan.seed)


def gaussian_operator(in_dim, out_dim, seed):
    return SketchOperator("gaussian", int(in_dim), int(out_dim), seed=as_seed(seed))


def sign_operator(in_dim, out_dim, seed):
    return SketchOperator("sign", int(in_dim), int(out_dim), seed=as_seed(seed))


def srht_operator(in_dim, out_dim, seed, signs=None):
    """Subsampled randomized Hadamard transform ``Omega = D H S``.

    ``in_dim`` is zero-padded to the next power of two ``N``.  Every row of
    ``H D`` mixes all original coordinates, so rows are drawn uniformly
    over all ``N`` with scale ``sqrt(N / out_dim)``; ``out_dim == N``
    keeps the whole (orthogonal) transform.  ``signs`` overrides the
    random diagonal, mainly for tests.
    """
    seed = as_seed(seed)
    N = next_pow2(in_dim)
    if not 1 <= out_dim <= N:
        raise ShapeError(f"SRHT out_dim must lie in [1, {N}], got {out_dim}")
    if signs is not None:
        signs = tuple(float(s) for s in signs)
        if len(signs) != N:
            raise ShapeError(f"need {N} signs, got {len(signs)}")
    plan = None
    if out_dim < N:
        plan = make_sampling_plan(ProbabilityVector.uniform(N), out_dim, seed.child(1))
    return SketchOperator("srht", int(in_dim), int(out_dim), plan=plan, seed=seed,
                          padded_dim=N, forced_signs=signs)


def identity_operator(n):
    """Sampling operator that picks every coordinate once with unit scale."""
    return sampling_operator(None, plan=plan_from_indices(ProbabilityVector.uniform(n),
                                                           np.arange(n)))


def apply_sketch(op, A, side="left"):
    """Apply ``op``: ``side="right"`` gives ``A @ Omega``, ``side="left"`` gives ``Omega.T @ A``.

    A 1-D ``A`` is treated as a column vector for left application (and a
    row vector for right application); the result is 1-D as well.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    A = np.asarray(A, dtype=np.float64)
    vector = A.ndim == 1
    if vector:
        A = A.reshape(-1, 1) if side == "left" else A.reshape(1, -1)
    # work in the left orientation: X has op.in_dim rows
    X = A if side == "left" else A.T
    if X.shape[0] != op.in_dim:
        raise ShapeError(f"sketch expects dimension {op.in_dim}, got {X.shape[0]}")

    if op.kind == "sampling":
        Y = X[op.plan.indices] * op.plan.scales[:, None]
    elif op.kind in ("gaussian", "sign"):
        Y = op.dense.T @ X
    elif op.kind == "srht":
        Xp = np.zeros((op.padded_dim, X.shape[1]))
        Xp[: op.in_dim] = X
        Y = _fwht(Xp * op.signs[:, None])
        if op.plan is not None:
            Y = Y[op.plan.indices] * op.plan.scales[:, None]
    else:
        raise ValueError(f"unknown sketch kind {op.kind!r}")

    Y = Y if side == "left" else Y.T
    return Y.ravel() if vector else Y


def leverage_uniformization_check(A, seed):
    """Coherence of ``A`` before and after the randomized Hadamard rotation ``H D``.

    Rows are zero-padded to a power of two before rotating.  Diagnostic
    only: returns ``(before, after)``.
    """
    from .leverage import exact_leverage

    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise ShapeError(f"need m >= n, got {A.shape}")
    N = next_pow2(m)
    op = srht_operator(m, N, seed)
    rotated = apply_sketch(op, A, "left")
    return exact_leverage(A).coherence, exact_leverage(rotated).coherence
