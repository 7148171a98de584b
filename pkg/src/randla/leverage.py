"""Statistical leverage scores, coherence, outlier flags and graph edge leverage.

The leverage score of row ``i`` is the ``i``-th diagonal entry of the
orthogonal projector onto range(A), i.e. the squared norm of row ``i`` of
any orthonormal basis for that range.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import ConnectivityError, RankError, ShapeError, SketchFailure
from .numcore import (as_matrix, as_seed, pinv_apply, rank_tolerance, row_norms_sq,
                      thin_qr, thin_svd)
from .sketch import ProbabilityVector, apply_sketch, gaussian_operator, next_pow2, srht_operator


@dataclass(frozen=True)
class LeverageProfile:
    scores: np.ndarray
    rank_context: int
    coherence: float = None
    normalized: bool = False

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64, copy=True).ravel()
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "coherence", float(s.max()))

    def probabilities(self):
        """Scores rescaled to a sampling distribution (``scores / rank`` for exact profiles)."""
        return ProbabilityVector.from_weights(self.scores)


def exact_leverage(A):
    """Exact leverage of the rows of a tall matrix ``A`` (``m >= n``).

    The basis comes from a Householder QR.  When ``A`` is numerically
    rank-deficient the basis is trimmed through the SVD of ``R``, so the
    scores always sum to the numerical rank.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise ShapeError(f"exact_leverage needs m >= n, got {A.shape}; transpose for columns")
    qr = thin_qr(A)
    Ur, s, _ = np.linalg.svd(qr.R)
    rank = int(np.sum(s > rank_tolerance(s, A.shape)))
    if rank == n:
        basis = qr.Q
    else:
        basis = qr.Q @ Ur[:, :rank]
    return LeverageProfile(row_norms_sq(basis), rank)


def rank_k_leverage(A, k):
    """Leverage relative to the top-``k`` left singular subspace of ``A``."""
    A = as_matrix(A)
    svd = thin_svd(A)
    if not 1 <= k <= svd.rank:
        raise RankError(f"k={k} exceeds the numerical rank {svd.rank}; the scores are ill-posed")
    return LeverageProfile(row_norms_sq(svd.U[:, :k]), int(k))


def fast_leverage_sizes(m, n, eps, c1=None, c2=None):
    c1 = config.get("fastlev_c1") if c1 is None else c1
    c2 = config.get("fastlev_c2") if c2 is None else c2
    r1 = math.ceil(c1 * n * max(math.log(n), 1.0) / eps)
    r2 = math.ceil(c2 * math.log(m) / eps**2)
    return max(r1, n), r2


def fast_leverage(A, eps, seed, c1=None, c2=None):
    """Approximate all leverage scores of a tall ``A`` without an exact basis.

    Sketch the rows with an SRHT of ``r1`` rows, then form
    ``X = A pinv(Omega1 A) Omega2`` with a Gaussian ``Omega2`` of ``r2``
    columns and return the squared row norms of ``X``.  A rank-deficient
    first sketch is retried with ``r1`` doubled.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < 4 * n:
        raise ShapeError(f"fast_leverage needs m >= 4n, got {A.shape}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    seed = as_seed(seed)
    r1, r2 = fast_leverage_sizes(m, n, eps, c1, c2)
    N = next_pow2(m)
    for attempt in range(config.get("fastlev_retries") + 1):
        op1 = srht_operator(m, min(r1, N), seed.child(attempt, 1))
        SA = apply_sketch(op1, A, "left")
        if thin_svd(SA).rank == n:
            break
        r1 *= 2
    else:
        raise SketchFailure("first-stage sketch stayed rank-deficient after retries")
    omega2 = gaussian_operator(SA.shape[0], r2, seed.child(attempt, 2)).dense
    X = A @ pinv_apply(SA, omega2)
    return LeverageProfile(row_norms_sq(X), n)


def flag_outliers(prof, m=None, multiplier=2.0):
    """Indices whose score exceeds ``multiplier`` times the average ``rank / m``, largest first."""
    m = prof.scores.size if m is None else m
    threshold = multiplier * prof.rank_context / m
    idx = np.flatnonzero(prof.scores > threshold)
    order = np.argsort(-prof.scores[idx], kind="stable")
    return [int(i) for i in idx[order]]


@dataclass(frozen=True)
class WeightedGraph:
    num_nodes: int
    edges: tuple
    labels: tuple = field(default=None, compare=False)

    def __post_init__(self):
        edges = []
        for e in self.edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not w > 0:
                raise ValueError(f"edge ({u}, {v}) has nonpositive weight {w}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"edge ({u}, {v}) references a missing node")
            edges.append((u, v, w))
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def connected(self):
        parent = list(range(self.num_nodes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v, _ in self.edges:
            parent[find(u)] = find(v)
        return len({find(x) for x in range(self.num_nodes)}) == 1

    def weighted_incidence(self):
        """``W^{1/2} B`` with the lower-numbered endpoint of each edge at ``+1``."""
        Phi = np.zeros((len(self.edges), self.num_nodes))
        for i, (u, v, w) in enumerate(self.edges):
            a, b = min(u, v), max(u, v)
            Phi[i, a] = math.sqrt(w)
            Phi[i, b] = -math.sqrt(w)
        return Phi


def read_edge_list(path):
    """Parse ``u v [weight]`` lines (``#`` comments allowed); labels are renumbered in sorted order."""
    raw = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            w = float(parts[2]) if len(parts) > 2 else 1.0
            raw.append((parts[0], parts[1], w))
    names = set()
    for u, v, _ in raw:
        names.update((u, v))

    def key(s):
        return (0, int(s), "") if s.lstrip("-").isdigit() else (1, 0, s)

    labels = tuple(sorted(names, key=key))
    index = {s: i for i, s in enumerate(labels)}
    edges = tuple((index[u], index[v], w) for u, v, w in raw)
    return WeightedGraph(len(labels), edges, labels)


def graph_edge_leverage(G):
    """Edge leverage of a connected graph: ``w_e`` times the effective resistance of ``e``."""
    if not G.edges:
        raise ValueError("graph has no edges")
    if not G.connected:
        raise ConnectivityError("graph is disconnected; leverage rank context is ambiguous")
    svd = thin_svd(G.weighted_incidence())
    rank = G.num_nodes - 1
    if svd.rank != rank:
        raise RankError(f"incidence rank {svd.rank} != num_nodes - 1 = {rank}")
    return LeverageProfile(row_norms_sq(svd.U[:, :rank]), rank)
