"""``randla`` command line: generators, solvers, diagnostics and benchmark suites.

Results go out as JSON lines (``--json PATH`` or stdout), vectors as CSV
and matrices as Matrix Market.  Whenever ``--json`` names a file, a
``PATH.manifest.json`` sidecar records the command line, seed, input
digests, effective constants, library versions and timings; re-running
its ``argv`` reproduces the result body byte for byte.

Exit status: 0 on success, 2 on a usage error, 1 on a numeric failure
(including a failed acceptance criterion).
"""

import argparse
import hashlib
import json
import os
import sys
import time

from . import __version__

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not a 64-bit unsigned integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=_u64, default=0, help="64-bit seed (default 0)")
    g.add_argument("--json", metavar="PATH", help="write JSON-lines results here")
    g.add_argument("--csv", metavar="PATH", help="write a vector/score table as CSV")
    g.add_argument("--input", metavar="PATH", help="input matrix (.mtx/.mm or CSV)")
    g.add_argument("--repeats", type=_positive, default=1,
                   help="independent repetitions (best-of for lstsq, trials for amm)")
    g.add_argument("--threads", type=_positive, default=None,
                   help="BLAS thread count (effective only before numpy loads)")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="randla", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"randla {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    g = sub.add_parser("gen", parents=[common], help="generate a test matrix")
    g.add_argument("--spec", help="GenSpec as a JSON file path or inline JSON object")
    g.add_argument("--kind", help="generator kind (when --spec is absent)")
    g.add_argument("--m", type=_positive)
    g.add_argument("--n", type=_positive)
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter; VALUE is parsed as JSON when possible")
    g.add_argument("--out", metavar="PATH", help="matrix output (.mtx/.mm or CSV)")

    lv = sub.add_parser("lev", parents=[common], help="leverage scores")
    src = lv.add_mutually_exclusive_group()
    src.add_argument("--edges", metavar="PATH", help="edge list 'u v [weight]' per line")
    src.add_argument("--graph", help="bundled graph name")
    lv.add_argument("--mode", choices=("exact", "rank-k", "fast"), default="exact")
    lv.add_argument("--k", type=_positive)
    lv.add_argument("--eps", type=float, default=0.5)
    lv.add_argument("--columns", action="store_true", help="score the columns instead")
    lv.add_argument("--multiplier", type=float, default=2.0, help="outlier threshold factor")

    am = sub.add_parser("amm", parents=[common], help="approximate matrix multiply")
    am.add_argument("--input-b", metavar="PATH", help="right factor B (default A.T)")
    am.add_argument("--c", type=_positive, action="append", help="sample count (repeatable)")
    am.add_argument("--probs", choices=("optimal", "onesided", "uniform"), default="optimal")

    ls = sub.add_parser("lstsq", parents=[common], help="least-squares solvers")
    ls.add_argument("--algo", required=True,
                    choices=("exact", "sampled", "srht", "projected", "precond", "minnorm"))
    ls.add_argument("--rhs", metavar="PATH", help="right-hand side vector (CSV)")
    ls.add_argument("--gamma", type=float, default=0.9,
                    help="mass fraction of a generated right-hand side when --rhs is absent")
    ls.add_argument("--r", type=_positive, help="sampled rows / columns")
    ls.add_argument("--l", type=_positive, help="projection size")
    ls.add_argument("--eps", type=float, default=None)
    ls.add_argument("--tol", type=float, default=None)
    ls.add_argument("--max-iter", type=_positive, default=None)
    ls.add_argument("--mode", choices=("sample", "project"), default="sample",
                    help="column sketch for minnorm")
    ls.add_argument("--no-baseline", action="store_true", help="skip the exact comparison")

    lr = sub.add_parser("lowrank", parents=[common], help="low-rank approximation")
    lr.add_argument("--algo", required=True,
                    choices=("addsample", "addproject", "cx", "cur", "cssp", "range"))
    lr.add_argument("--k", type=_positive, required=True)
    lr.add_argument("--c", type=_positive)
    lr.add_argument("--r", type=_positive)
    lr.add_argument("--l", type=_positive)
    lr.add_argument("--p", type=int, default=5)
    lr.add_argument("--q", type=int, default=0)
    lr.add_argument("--eps", type=float, default=0.5)
    lr.add_argument("--method", choices=("basic", "oversampled", "power"), default=None)
    lr.add_argument("--probes", type=_positive, default=10)
    lr.add_argument("--adaptive-tol", type=float, default=None,
                    help="range: grow p until the probe estimate falls below this")

    bn = sub.add_parser("bench", parents=[common], help="acceptance or scaling suite")
    bn.add_argument("--suite", required=True)
    bn.add_argument("--single", action="store_true",
                    help="acceptance: one pass, without the determinism re-run")
    return parser


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_matrix(path):
    from .mmio import read_matrix

    if not path:
        raise UsageError("--input is required")
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return read_matrix(path)


def _parse_param(item):
    if "=" not in item:
        raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
    key, value = item.split("=", 1)
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_gen(args, seed):
    from .gen import GenSpec, generate
    from .mmio import write_csv, write_matrix

    if args.spec:
        text = open(args.spec).read() if os.path.exists(args.spec) else args.spec
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--spec is neither a file nor JSON: {exc}") from None
        d.setdefault("seed", seed.to_dict())
        spec = GenSpec.from_dict(d)
    else:
        if not (args.kind and args.m and args.n):
            raise UsageError("gen needs --spec or all of --kind, --m, --n")
        spec = GenSpec(args.m, args.n, args.kind, dict(map(_parse_param, args.param)), seed)
    A = generate(spec)
    if args.out:
        write_matrix(args.out, A)
    if args.csv:
        write_csv(args.csv, A)
    return [{"command": "gen", "spec": spec.to_dict(), "shape": list(A.shape),
             "frobenius_norm": float((A**2).sum() ** 0.5), "out": args.out}]


def cmd_lev(args, seed):
    import numpy as np

    from .gen import builtin_graph
    from .leverage import (exact_leverage, fast_leverage, flag_outliers, graph_edge_leverage,
                           rank_k_leverage, read_edge_list)
    from .mmio import write_csv

    if args.edges or args.graph:
        G = read_edge_list(args.edges) if args.edges else builtin_graph(args.graph)
        prof = graph_edge_leverage(G)
    else:
        A = _load_matrix(args.input)
        if args.columns:
            A = A.T
        if args.mode == "exact":
            prof = exact_leverage(A)
        elif args.mode == "rank-k":
            if not args.k:
                raise UsageError("--mode rank-k needs --k")
            prof = rank_k_leverage(A, args.k)
        else:
            prof = fast_leverage(A, args.eps, seed)
    if args.csv:
        write_csv(args.csv, prof.scores)
    flagged = flag_outliers(prof, multiplier=args.multiplier)
    return [{"command": "lev", "mode": "graph" if (args.edges or args.graph) else args.mode,
             "coherence": prof.coherence, "rank": prof.rank_context,
             "sum": float(np.sum(prof.scores)), "flagged_indices": flagged}]


def cmd_amm(args, seed):
    import numpy as np

    from .matmul import amm_probs_onesided, amm_probs_optimal, approx_matmul
    from .sketch import ProbabilityVector

    A = _load_matrix(args.input)
    B = _load_matrix(args.input_b) if args.input_b else A.T
    if A.shape[1] != B.shape[0]:
        raise UsageError(f"inner dimensions differ: {A.shape} x {B.shape}")
    p = {"optimal": lambda: amm_probs_optimal(A, B), "onesided": lambda: amm_probs_onesided(A),
         "uniform": lambda: ProbabilityVector.uniform(A.shape[1])}[args.probs]()
    scale = float(np.linalg.norm(A) * np.linalg.norm(B))
    rows = []
    for c in args.c or [100]:
        for t in range(args.repeats):
            s = seed.child(c, t)
            res = approx_matmul(A, B, c, p, s)
            rows.append({"command": "amm", "c": c, "trial": t, "seed": s.to_dict(),
                         "frob_error": res.frobenius_error_vs,
                         "bound_rhs": 10.0 / c**0.5 * scale})
    return rows


def cmd_lstsq(args, seed):
    from . import lstsq
    from .gen import ls_rhs
    from .mmio import read_matrix, write_csv

    A = _load_matrix(args.input)
    if args.rhs:
        b = read_matrix(args.rhs).ravel()
    else:
        if args.algo == "minnorm":
            b = seed.child(99).rng().standard_normal(A.shape[0])
        else:
            b = ls_rhs(A, args.gamma, seed.child(99))
    P = lstsq.LsProblem(A, b)
    if args.algo == "minnorm":
        c = args.r or 8 * A.shape[0]
        rep = lstsq.solve_min_norm(P, c, args.mode, seed)
        x_opt = lstsq.min_norm_exact(P)
        out = rep.to_dict(timing=False)
        err = float(((rep.x - x_opt) ** 2).sum() ** 0.5 / max((x_opt**2).sum() ** 0.5, 1e-300))
        out["relative_x_error"] = err
    else:
        baseline = None if args.no_baseline else lstsq.solve_exact(P)
        kw = {}
        if args.algo in ("sampled", "srht"):
            kw = {"r": args.r, "eps": args.eps}
        elif args.algo == "projected":
            kw = {"l": args.l, "eps": args.eps}
        elif args.algo == "precond":
            kw = {"l": args.l, "tol": args.tol, "max_iter": args.max_iter}
        if args.algo == "exact":
            rep = lstsq.solve_exact(P)
        else:
            kw["baseline"] = baseline
            solver = lstsq.SOLVERS[args.algo]
            rep = lstsq.best_of(solver, P, args.repeats, seed, **kw)
        out = rep.to_dict(timing=False)
    if args.csv:
        write_csv(args.csv, rep.x)
    out["command"] = "lstsq"
    out["timing"] = {"wall_time": rep.wall_time}
    return [out]


def cmd_lowrank(args, seed):
    from . import lowrank

    A = _load_matrix(args.input)
    k = args.k
    row = {"command": "lowrank", "algo": args.algo, "k": k}
    if args.algo in ("addsample", "cx"):
        c = args.c or 4 * k
        fn = lowrank.additive_sample if args.algo == "addsample" else lowrank.relative_cx
        sel, err = fn(A, k, c, seed)
        row.update(c=c, **sel.to_dict())
    elif args.algo == "addproject":
        l = args.l or lowrank.additive_project_size(A.shape[0], k, args.eps)
        _, err = lowrank.additive_project(A, k, l, seed)
        row["l"] = l
    elif args.algo == "cur":
        c, r = args.c or 4 * k, args.r or 4 * k
        C, M, R, err = lowrank.cur(A, k, c, r, seed)
        row.update(c=c, r=r)
    elif args.algo == "cssp":
        sel, err = lowrank.cssp(A, k, args.c, seed)
        row["indices"] = [int(i) for i in sel.indices]
    else:
        method = args.method or ("power" if args.q else "oversampled")
        params = {"eps": args.eps} if method == "basic" else {"p": args.p, "q": args.q}
        while True:
            basis, err = lowrank.range_find(A, k, method, params, seed)
            est = lowrank.posterior_error_estimate(A, basis, args.probes, seed.child(7))
            if args.adaptive_tol is None or est <= args.adaptive_tol or method == "basic" \
                    or k + params["p"] >= min(A.shape):
                break
            params["p"] = min(2 * params["p"], min(A.shape) - k)
        row.update(method=method, width=basis.width, posterior_estimate=est, **params)
    row["error"] = err.to_dict()
    return [row]


def cmd_bench(args, seed):
    from . import bench

    if args.suite not in bench.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {bench.SUITES}")
    if args.suite == "scaling":
        return bench.run_scaling(seed.seed)
    rows = bench.run_acceptance(seed.seed)
    if not args.single:
        again = bench.run_acceptance(seed.seed)
        rows.append(bench.determinism_record(bench.dumps(rows), bench.dumps(again)))
    return rows


COMMANDS = {"gen": cmd_gen, "lev": cmd_lev, "amm": cmd_amm, "lstsq": cmd_lstsq,
            "lowrank": cmd_lowrank, "bench": cmd_bench}


def _split_timing(rows):
    body, timing = [], []
    for i, r in enumerate(rows):
        r = dict(r)
        t = r.pop("timing", None)
        if t is not None:
            timing.append({"row": i, **t})
        body.append(r)
    return body, timing


def _manifest(argv, args, seed, timing, started, elapsed):
    import numpy
    import scipy

    from . import config

    inputs = {}
    for attr in ("input", "input_b", "rhs", "edges"):
        path = getattr(args, attr, None)
        if path and os.path.exists(path):
            inputs[path] = _digest(path)
    spec = getattr(args, "spec", None)
    if spec and os.path.exists(spec):
        inputs[spec] = _digest(spec)
    return {"argv": list(argv), "command_line": " ".join(["randla", *argv]),
            "seed": seed.to_dict(), "input_digests": inputs, "config": config.load(),
            "version": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "timing": {"started": started, "elapsed": elapsed, "rows": timing}}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .bench import dumps
    from .errors import RandLAError, ShapeError, SpecError
    from .numcore import SeedSpec

    seed = SeedSpec(args.seed)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    t0 = time.perf_counter()
    try:
        rows = COMMANDS[args.command](args, seed)
    except (UsageError, ShapeError, SpecError, LookupError, FileNotFoundError) as exc:
        print(f"randla {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RandLAError, ArithmeticError) as exc:
        print(f"randla {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"randla {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.perf_counter() - t0
    body, timing = _split_timing(rows)
    text = dumps(body)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text)
        with open(args.json + ".manifest.json", "w") as fh:
            json.dump(_manifest(argv, args, seed, timing, started, elapsed), fh, indent=2,
                      sort_keys=True)
            fh.write("\n")
    else:
        sys.stdout.write(text)
    if args.command == "bench" and args.suite == "acceptance":
        for r in body:
            status = "PASS" if r["passed"] else "FAIL"
            print(f"criterion {r['criterion']:2d} {r['name']:<28} {status}", file=sys.stderr)
        if not all(r["passed"] for r in body):
            return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
