"""Tunable constants and the ``RANDLA_CONFIG`` override file.

Every multiplier that stands in for an unspecified big-O constant lives
here.  Setting ``RANDLA_CONFIG`` to the path of a JSON object overrides
any subset of the keys below, e.g. ``{"ls_sample_multiplier": 8}``.
"""

import json
import os

DEFAULTS = {
    # numerical rank: sigma <= rank_tol_factor * max(m, n) * eps * sigma_max
    "rank_tol_factor": 1.0,
    # SVD: LAPACK gesdd first, gesvd as fallback; gesvd's QR sweep cap is
    # LAPACK's own 6 * min(m, n) ** 2 (documented, not configurable there)
    "svd_fallback": True,
    # approximate matrix multiply: exact product only if m * p <= this
    "amm_exact_threshold": 10_000_000,
    # fast leverage sketch sizes
    "fastlev_c1": 16.0,
    "fastlev_c2": 8.0,
    "fastlev_retries": 3,
    # least squares
    "ls_eps": 0.5,
    "ls_sample_multiplier": 4.0,
    "cg_max_iter": 200,
    "cg_tol": 1e-10,
    # low rank
    "cssp_multiplier": 4.0,
    "range_basic_multiplier": 4.0,
    "posterior_inflation": 10.0,
    # additive projection width: alpha * ln(m) / eps^2
    "srht_alpha": 4.0,
}

_cache = {}


def load(path=None):
    """Return the effective config: DEFAULTS overlaid with the JSON file."""
    path = path if path is not None else os.environ.get("RANDLA_CONFIG")
    if not path:
        return dict(DEFAULTS)
    key = (path, os.path.getmtime(path))
    if key not in _cache:
        with open(path) as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(DEFAULTS)
        merged.update(overrides)
        _cache[key] = merged
    return dict(_cache[key])


def get(name):
    return load()[name]
