"""Dense matrices, deterministic factorizations and seeded randomness.

A "DenseMatrix" here is a plain 2-D ``float64`` :class:`numpy.ndarray`
that has passed :func:`as_matrix` (finite entries, read-only).  numpy
transposes are views, so operations take ``A.T`` instead of a transpose
flag.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import config
from .errors import DomainError, FactorizationError, ShapeError

EPS = np.finfo(np.float64).eps
_U64 = 2**64


def as_matrix(A, name="A"):
    """Validate ``A`` as a finite real 2-D matrix and return a read-only copy."""
    M = np.array(A, dtype=np.float64, copy=True)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {M.shape}")
    if M.shape[0] < 1 or M.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has NaN or Inf entries")
    M.setflags(write=False)
    return M


def as_vector(b, name="b"):
    v = np.array(b, dtype=np.float64, copy=True)
    if v.ndim == 2 and 1 in v.shape:
        v = v.ravel()
    if v.ndim != 1:
        raise ShapeError(f"{name} must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} has NaN or Inf entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible random stream, keyed by ``(seed, stream)``.

    ``path`` extends the key for internal sub-streams (retries, the two
    halves of a composite sketch) so they never collide with the caller's
    ``stream`` numbering.  Draws come from numpy's counter-based Philox
    generator; Gaussians use numpy's ziggurat sampler, whose output is
    fixed for a given numpy release independent of platform.
    """

    seed: int = 0
    stream: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", int(self.stream))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    def child(self, *keys):
        return SeedSpec(self.seed, self.stream, self.path + tuple(keys))

    def rng(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,) + self.path)
        return np.random.Generator(np.random.Philox(ss))

    def to_dict(self):
        d = {"seed": self.seed, "stream": self.stream}
        if self.path:
            d["path"] = list(self.path)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["seed"], d.get("stream", 0), tuple(d.get("path", ())))


def as_seed(seed):
    """Accept a SeedSpec, a plain integer seed, or a ``(seed, stream)`` pair."""
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, tuple):
        return SeedSpec(*seed)
    return SeedSpec(int(seed))


@dataclass(frozen=True)
class ThinSvd:
    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray
    rank_tolerance: float

    @property
    def rank(self):
        return int(np.sum(self.singular_values > self.rank_tolerance))


@dataclass(frozen=True)
class ThinQr:
    Q: np.ndarray
    R: np.ndarray
    # columns whose R diagonal falls below the rank tolerance
    deficient_columns: tuple = ()

    @property
    def full_rank(self):
        return not self.deficient_columns


def rank_tolerance(s, shape):
    smax = float(s[0]) if len(s) else 0.0
    return config.get("rank_tol_factor") * max(shape) * EPS * smax


def thin_svd(A, k=None):
    """Thin SVD ``A = U diag(s) Vt``, optionally truncated to the top ``k`` triples.

    LAPACK's divide-and-conquer driver runs first; if it reports
    non-convergence the QR-iteration driver is tried before giving up
    with :class:`FactorizationError`.
    """
    A = as_matrix(A)
    m, n = A.shape
    if k is not None and not 1 <= k <= min(m, n):
        raise ShapeError(f"k={k} must lie in [1, {min(m, n)}]")
    try:
        U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        if not config.get("svd_fallback"):
            raise FactorizationError("SVD (gesdd) did not converge")
        try:
            U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("SVD did not converge with gesdd or gesvd") from exc
    tol = rank_tolerance(s, A.shape)
    if k is not None:
        U, s, Vt = U[:, :k], s[:k], Vt[:k]
    for M in (U, s, Vt):
        M.setflags(write=False)
    return ThinSvd(U, s, Vt, tol)


def thin_qr(A):
    """Householder QR with ``diag(R) >= 0``; near-zero pivots are reported."""
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise ShapeError(f"thin_qr needs m >= n, got {A.shape}")
    Q, R = scipy.linalg.qr(A, mode="economic")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    d = np.abs(np.diag(R))
    tol = config.get("rank_tol_factor") * max(m, n) * EPS * (d.max() if n else 0.0)
    deficient = tuple(int(i) for i in np.flatnonzero(d <= tol))
    Q.setflags(write=False)
    R.setflags(write=False)
    return ThinQr(Q, R, deficient)


def condition_number(A):
    """sigma_max / sigma_min over the numerically nonzero singular values."""
    svd = thin_svd(A)
    s = svd.singular_values
    if s[0] == 0.0:
        raise DomainError("condition number of the zero matrix is undefined")
    nz = s[s > svd.rank_tolerance]
    return float(nz[0] / nz[-1])


def pinv_apply(A, Y):
    """Return ``pinv(A) @ Y`` via the thin SVD, dropping sub-tolerance singular values."""
    A = as_matrix(A)
    Y = np.asarray(Y, dtype=np.float64)
    vector = Y.ndim == 1
    Y2 = Y.reshape(-1, 1) if vector else Y
    if Y2.shape[0] != A.shape[0]:
        raise ShapeError(f"A has {A.shape[0]} rows but Y has {Y2.shape[0]}")
    svd = thin_svd(A)
    r = svd.rank
    U, s, Vt = svd.U[:, :r], svd.singular_values[:r], svd.Vt[:r]
    X = Vt.T @ ((U.T @ Y2) / s[:, None])
    return X.ravel() if vector else X


def range_basis(A):
    """Orthonormal basis of range(A) with the numerical-rank cutoff applied."""
    svd = thin_svd(A)
    return svd.U[:, : svd.rank]


def row_norms_sq(M):
    return np.einsum("ij,ij->i", M, M)


def col_norms_sq(M):
    return np.einsum("ij,ij->j", M, M)
