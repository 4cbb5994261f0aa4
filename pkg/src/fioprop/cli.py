"""Command-line interface.

    fioprop run --config cfg.json [--suite id] [--out dir]
    fioprop audit --model scaled_bump --params '{"epsilon": 0.5}'
    fioprop bench-backend [--batches 1,64,4096] [--span 30]
    fioprop version

Exit codes: 0 all selected suites passed, 1 suite failure, 2 configuration
error, 3 numerical precondition failure (contraction / series divergence /
boundary leak: the threshold time was too small for the asymptotic
construction).  FIOPROP_THREADS caps the linear-algebra thread pools;
FIOPROP_BACKEND selects the trajectory core (core / python / auto).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_PASS = 0
EXIT_SUITE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_PRECONDITION = 3


def _apply_thread_override():
    n = os.environ.get("FIOPROP_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _build_parser():
    p = argparse.ArgumentParser(prog="fioprop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run estimate suites from a JSON config")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--suite", action="append", default=None,
                     help="override the config's suite selection (repeatable)")
    run.add_argument("--out", default=None, help="override the output directory")

    audit = sub.add_parser("audit", help="audit a potential model's derivative decay")
    audit.add_argument("--model", required=True)
    audit.add_argument("--params", default="{}", help="JSON parameter map for the factory")
    audit.add_argument("--max-order", type=int, default=None)

    bench = sub.add_parser("bench-backend", help="time the compiled vs python trajectory core")
    bench.add_argument("--batches", default="1,64,4096",
                       help="comma-separated batch sizes")
    bench.add_argument("--span", type=float, default=30.0, help="integration span")
    bench.add_argument("--repeat", type=int, default=3)

    sub.add_parser("version", help="print version and active backend")
    return p


def _cmd_run(args):
    from .config import load_config
    from .errors import ConfigError, NumericalPrecondition
    from .report import write_csv, write_summary
    from .suites import run_suites

    try:
        cfg = load_config(args.config)
        if args.suite:
            cfg.suites = args.suite
        if args.out:
            cfg.out_dir = args.out
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    try:
        reports = run_suites(cfg)
    except NumericalPrecondition as exc:
        payload = {
            "passed": False,
            "error": {"type": type(exc).__name__, "message": str(exc)},
        }
        with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        _write_metadata(cfg, t0, error=payload["error"])
        print(f"numerical precondition failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_PRECONDITION

    write_csv(os.path.join(cfg.out_dir, "results.csv"), reports)
    write_summary(os.path.join(cfg.out_dir, "summary.json"), reports)
    _write_metadata(cfg, t0)
    ok = all(r.passed for r in reports)
    for rep in reports:
        for row in rep.rows:
            status = "pass" if row.passed else "FAIL"
            print(f"[{rep.suite}] {row.check_id}: {status}")
    return EXIT_PASS if ok else EXIT_SUITE_FAILURE


def _write_metadata(cfg, t0, error=None):
    import numpy

    from . import __version__, backend

    meta = {
        "config": cfg.to_dict(),
        "fioprop_version": __version__,
        "numpy_version": numpy.__version__,
        "backend": backend.backend_name(),
        "python": sys.version,
        "wall_seconds": time.perf_counter() - t0,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if error:
        meta["error"] = error
    with open(os.path.join(cfg.out_dir, "run_metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def _cmd_audit(args):
    from .errors import FiopropError
    from .potential import audit_assumption, model_from_spec

    try:
        params = json.loads(args.params)
        model = model_from_spec(args.model, params)
    except (json.JSONDecodeError, FiopropError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    rep = audit_assumption(model, max_order=args.max_order)
    payload = {
        "model": rep.model_name,
        "epsilon": rep.epsilon,
        "passed": rep.passed,
        "orders": {
            str(a): {
                "measured_sup": rep.measured_sup[a],
                "fitted_exponent": rep.fitted_exponent[a],
                "required_exponent": rep.required_exponent[a],
                "passed": rep.passed_order[a],
            }
            for a in rep.orders
        },
    }
    print(json.dumps(payload, indent=2))
    return EXIT_PASS if rep.passed else EXIT_SUITE_FAILURE


def _cmd_bench(args):
    import numpy as np

    from . import backend
    from .potential import make_scaled_bump

    model = make_scaled_bump(0.5)
    rng = np.random.default_rng(0)
    names = ["python"] + (["core"] if backend.backend_name() == "core" else [])
    batches = [int(b) for b in args.batches.split(",")]
    print(f"active backend: {backend.backend_name()}")
    print(f"{'batch':>8} | " + " | ".join(f"{n:>10}" for n in names) + " | speedup")
    for m in batches:
        x = rng.uniform(-4, 4, m)
        xi = rng.uniform(-2, 2, m)
        timings = {}
        for name in names:
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                backend.flow_final(model, 10.0, 10.0 + args.span, x, xi, 1e-10, 1e-10,
                                   impl_name=name)
                best = min(best, time.perf_counter() - t0)
            timings[name] = best
        ratio = timings["python"] / timings[names[-1]]
        print(
            f"{m:>8} | "
            + " | ".join(f"{timings[n] * 1e3:>8.2f}ms" for n in names)
            + f" | {ratio:>6.1f}x"
        )
    return EXIT_PASS


def main(argv=None):
    _apply_thread_override()
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "audit":
        return _cmd_audit(args)
    if args.command == "bench-backend":
        return _cmd_bench(args)
    if args.command == "version":
        from . import __version__, backend

        print(f"fioprop {__version__} (backend: {backend.backend_name()})")
        return EXIT_PASS
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
