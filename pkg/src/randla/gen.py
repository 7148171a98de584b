"""Seeded test-matrix generators and bundled graphs.

``generate`` is a pure function of its :class:`GenSpec`.  Kinds:

lowrank_noise
    ``U diag(sigma) V.T + noise * G`` with Haar-random ``U``, ``V`` and
    i.i.d. standard normal ``G``.  ``params``: ``k``, ``sigma`` (list) or
    ``decay`` (``sigma_i = decay**i``), ``noise``.
slow_decay
    Full-rank ``U diag(base**i) V.T`` for ``i = 1..min(m, n)``; ``params``:
    ``base`` (default 0.9).
leverage_profile
    ``U0 diag(sigma) W.T``; the leverage of the rows is that of ``U0``.
    ``profile`` is ``uniform`` (Hadamard columns, every score ``n/m``),
    ``moderate`` (identity block scaled so its rows carry leverage
    ``coherence``, default 0.3, over Gaussian rows) or ``extreme``
    (identity block over Gaussian rows shrunk by ``tail_scale``).
    ``kappa`` sets the condition number through ``sigma``.
coherent_block
    ``[I_n; tail_scale * G]`` without rotation.
synthetic_expression
    Gene-expression style ``2000 x 14`` matrix: 1600 noise rows, then 200
    noisy-sine rows, then 200 noisy-exponential rows.
"""

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import SpecError
from .leverage import WeightedGraph, read_edge_list
from .numcore import SeedSpec, as_seed
from .sketch import hadamard_apply, next_pow2

KINDS = ("lowrank_noise", "leverage_profile", "synthetic_expression", "coherent_block",
         "slow_decay")

# Noise amplitude for synthetic_expression, calibrated once over seeds 0..49
# so the top two singular directions hold ~64% of ||A||_F^2.
EXPRESSION_NOISE = 0.262
EXPRESSION_CLASSES = (("noise", 0.8), ("sine", 0.1), ("exponential", 0.1))


@dataclass(frozen=True)
class GenSpec:
    m: int
    n: int
    kind: str
    params: dict = field(default_factory=dict)
    seed: SeedSpec = field(default_factory=SeedSpec)

    def to_dict(self):
        return {"m": self.m, "n": self.n, "kind": self.kind, "params": dict(self.params),
                "seed": self.seed.to_dict()}

    @classmethod
    def from_dict(cls, d):
        seed = d.get("seed", 0)
        seed = SeedSpec.from_dict(seed) if isinstance(seed, dict) else as_seed(seed)
        return cls(int(d["m"]), int(d["n"]), d["kind"], dict(d.get("params", {})), seed)


def _haar(rng, m, k):
    Q, R = np.linalg.qr(rng.standard_normal((m, k)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def _lowrank_noise(spec, rng):
    m, n, p = spec.m, spec.n, spec.params
    k = int(p.get("k", min(m, n)))
    if not 1 <= k <= min(m, n):
        raise SpecError(f"rank k={k} must lie in [1, {min(m, n)}]")
    if "sigma" in p:
        sigma = np.asarray(p["sigma"], dtype=np.float64)
        if sigma.size != k:
            raise SpecError(f"sigma has {sigma.size} entries, expected k={k}")
    else:
        sigma = float(p.get("decay", 1.0)) ** np.arange(k)
    U, V = _haar(rng, m, k), _haar(rng, n, k)
    A = (U * sigma) @ V.T
    noise = float(p.get("noise", 0.0))
    if noise:
        A = A + noise * rng.standard_normal((m, n))
    return A


def _slow_decay(spec, rng):
    r = min(spec.m, spec.n)
    base = float(spec.params.get("base", 0.9))
    if not 0 < base:
        raise SpecError("decay base must be positive")
    sigma = base ** np.arange(1, r + 1)
    return (_haar(rng, spec.m, r) * sigma) @ _haar(rng, spec.n, r).T


def _coherent_block(m, n, tail_scale, rng):
    return np.vstack([np.eye(n), tail_scale * rng.standard_normal((m - n, n))])


def _leverage_profile(spec, rng):
    m, n, p = spec.m, spec.n, spec.params
    if m < n:
        raise SpecError("leverage profiles need m >= n")
    profile = p.get("profile", "uniform")
    if profile == "uniform":
        if m == next_pow2(m):
            cols = rng.choice(m, size=n, replace=False)
            E = np.zeros((m, n))
            E[cols, np.arange(n)] = 1.0
            U0 = hadamard_apply(E, "left")
        else:
            U0 = _haar(rng, m, n)
    elif profile == "moderate":
        t = float(p.get("coherence", 0.3))
        if not 0 < t < 1:
            raise SpecError("moderate coherence must lie in (0, 1)")
        U0 = _coherent_block(m, n, 1.0, rng)
        U0[:n] *= math.sqrt((m - n) * t / (1 - t))
    elif profile == "extreme":
        U0 = _coherent_block(m, n, float(p.get("tail_scale", 1e-3)), rng)
    else:
        raise SpecError(f"unknown leverage profile {profile!r}")
    kappa = float(p.get("kappa", 1.0))
    if kappa < 1:
        raise SpecError("kappa must be >= 1")
    sigma = np.logspace(0, -math.log10(kappa), n)
    return (U0 * sigma) @ _haar(rng, n, n).T


def expression_patterns(n=14):
    """The sine (one period) and exponential (decays to 1/e) row patterns."""
    t = np.arange(n)
    return np.sin(2 * np.pi * t / n), np.exp(-t / (n - 1))


def expression_labels(m=2000):
    counts = [int(round(frac * m)) for _, frac in EXPRESSION_CLASSES]
    counts[0] = m - sum(counts[1:])
    return np.repeat([name for name, _ in EXPRESSION_CLASSES], counts)


def _synthetic_expression(spec, rng):
    m, n = spec.m, spec.n
    noise = float(spec.params.get("noise", EXPRESSION_NOISE))
    sine, expo = expression_patterns(n)
    labels = expression_labels(m)
    A = np.zeros((m, n))
    A[labels == "sine"] = sine
    A[labels == "exponential"] = expo
    A[labels == "noise"] = 0.0
    return A + noise * rng.standard_normal((m, n))


def generate(spec):
    """Build the matrix described by ``spec`` (read-only ``float64`` array)."""
    if spec.m < 1 or spec.n < 1:
        raise SpecError(f"dimensions must be positive, got {spec.m} x {spec.n}")
    rng = spec.seed.rng()
    builders = {
        "lowrank_noise": _lowrank_noise,
        "slow_decay": _slow_decay,
        "leverage_profile": _leverage_profile,
        "synthetic_expression": _synthetic_expression,
        "coherent_block": lambda s, r: _coherent_block(
            s.m, s.n, float(s.params.get("tail_scale", 1e-3)), r),
    }
    if spec.kind not in builders:
        raise SpecError(f"unknown kind {spec.kind!r}")
    if spec.kind == "coherent_block" and spec.m < spec.n:
        raise SpecError("coherent_block needs m >= n")
    A = np.ascontiguousarray(builders[spec.kind](spec, rng), dtype=np.float64)
    A.setflags(write=False)
    return A


def expression_matrix(seed=0, noise=None):
    params = {} if noise is None else {"noise": noise}
    return generate(GenSpec(2000, 14, "synthetic_expression", params, as_seed(seed)))


def ls_rhs(A, gamma, seed):
    """Right-hand side with mass fraction ``||P_A b|| / ||b|| = gamma`` and ``||b|| = 1``."""
    rng = as_seed(seed).rng()
    m, n = A.shape
    inside = A @ rng.standard_normal(n)
    g = rng.standard_normal(m)
    Q, _ = np.linalg.qr(A)
    outside = g - Q @ (Q.T @ g)
    return gamma * inside / np.linalg.norm(inside) + \
        math.sqrt(1 - gamma**2) * outside / np.linalg.norm(outside)


_SMALL_GRAPHS = {
    "triangle": (3, ((0, 1), (1, 2), (0, 2))),
    "path3": (3, ((0, 1), (1, 2))),
    "star5": (5, ((0, 1), (0, 2), (0, 3), (0, 4))),
    "cycle4": (4, ((0, 1), (1, 2), (2, 3), (0, 3))),
    "k4": (4, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))),
}
BUILTIN_GRAPHS = tuple(_SMALL_GRAPHS) + ("karate",)


def builtin_graph(name):
    """Bundled connected graphs: small fixtures plus the karate-club network."""
    if name == "karate":
        with resources.as_file(resources.files("randla") / "data" / "karate.edgelist") as p:
            return read_edge_list(p)
    if name not in _SMALL_GRAPHS:
        raise LookupError(f"unknown graph {name!r}; choose from {BUILTIN_GRAPHS}")
    n, edges = _SMALL_GRAPHS[name]
    return WeightedGraph(n, tuple((u, v, 1.0) for u, v in edges))


def hidden_direction(m, n, k, seed, big=10.0, small=0.5, tail=0.1):
    """Matrix whose ``k``-th singular direction sits on column 0 alone.

    ``k - 1`` directions of size ``big`` are spread over columns
    ``1..n-1``; column 0 carries a direction of size ``small`` orthogonal
    to them, and a Gaussian tail of Frobenius norm ``tail`` fills the
    rest.  Column-norm sampling almost never draws column 0, while its
    rank-``k`` leverage is close to one.
    """
    if not 2 <= k < min(m, n):
        raise SpecError(f"need 2 <= k < min(m, n), got k={k}")
    rng = as_seed(seed).rng()
    U = _haar(rng, m, k)
    V = np.zeros((n, k - 1))
    V[1:] = _haar(rng, n - 1, k - 1)
    A = big * U[:, : k - 1] @ V.T
    A[:, 0] += small * U[:, k - 1]
    G = rng.standard_normal((m, n))
    # keep the tail out of the planted directions so the baseline is the tail
    G -= U @ (U.T @ G)
    G[:, 0] = 0.0
    G -= (G @ V) @ V.T
    A = A + tail * G / np.linalg.norm(G)
    A.setflags(write=False)
    return A
