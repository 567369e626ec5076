"""Command-line harness.

Subcommands::

    velproj solve              seeded strongly convex QP, velocity schemes
    velproj bench illustrative scalar phase-space experiment
    velproj bench cs           compressed-sensing experiment

Options can also come from a plain ``key = value`` config file passed with
``--config``; explicit flags override file entries.  Exit status is 0 when
the run converged or hit the iteration cap, 2 on an invalid configuration,
and 3 when a velocity cone turned out to be empty.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    ExperimentConfig,
    run_compressed_sensing,
    run_custom_qp,
    run_illustrative,
)
from .polyproj import InfeasibleCone
from .solvers import STATUS_INFEASIBLE

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def load_config(path) -> dict[str, str]:
    """Parse a ``key = value`` file; '#' starts a comment."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="velproj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value file; flags override its entries")
        p.add_argument("--method", help="iteration scheme")
        p.add_argument("--T", type=float, help="step size (default: experiment specific)")
        p.add_argument("--iters", type=int, help="iteration budget")
        p.add_argument("--seed", type=int, help="instance seed")
        p.add_argument("--out", help="output directory for trace CSVs")

    solve = sub.add_parser("solve", help="seeded strongly convex QP")
    common(solve)
    solve.add_argument("--n", type=int, help="decision dimension (default 20)")
    solve.add_argument("--rows", type=int, help="inequality row count (default 30)")

    bench = sub.add_parser("bench", help="stock experiments")
    bench_sub = bench.add_subparsers(dest="experiment", required=True)

    illus = bench_sub.add_parser("illustrative", help="scalar phase-space traces")
    common(illus)

    cs = bench_sub.add_parser("cs", help="compressed sensing")
    common(cs)
    cs.add_argument("--p", type=float, help="ball exponent in (0, 1]")
    cs.add_argument("--nu", type=float, help="ball radius")
    cs.add_argument("--delta", type=float, help="smoothing threshold")
    cs.add_argument("--m", type=int, help="measurement count")
    cs.add_argument("--dim", type=int, help="signal dimension")
    cs.add_argument("--spikes", type=int, help="support size of the planted signal")
    cs.add_argument("--stride", type=int, help="trace row stride")
    return parser


_CAST = {
    "T": float, "iters": int, "seed": int, "n": int, "rows": int, "p": float,
    "nu": float, "delta": float, "m": int, "dim": int, "spikes": int, "stride": int,
    "method": str, "out": str,
}


def _merged(args: argparse.Namespace) -> dict:
    """Config-file values overridden by explicit flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            if key not in _CAST:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = _CAST[key](value)
    for key in _CAST:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _pick(merged: dict, key: str, default):
    return merged.get(key, default)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        merged = _merged(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "solve":
            cfg = ExperimentConfig(
                experiment="custom_qp",
                method=_pick(merged, "method", "cgd"),
                n=_pick(merged, "n", 20),
                qp_rows=_pick(merged, "rows", 30),
                seed=_pick(merged, "seed", 1),
                iters=_pick(merged, "iters", 5000),
                T=_pick(merged, "T", None),
                out_dir=_pick(merged, "out", "."),
            )
            trace, path = run_custom_qp(cfg)
            last = trace.records[-1]
            print(
                f"{cfg.method}: status={trace.status} iters={last.k} "
                f"fx={last.fx:.6g} kkt={last.kkt:.3g} trace={path}"
            )
            return EXIT_INFEASIBLE if trace.status == STATUS_INFEASIBLE else EXIT_OK

        if args.experiment == "illustrative":
            cfg = ExperimentConfig(
                experiment="illustrative",
                method=_pick(merged, "method", "agd_local"),
                seed=_pick(merged, "seed", 1),
                iters=_pick(merged, "iters", 2000),
                T=_pick(merged, "T", None),
                out_dir=_pick(merged, "out", "."),
            )
            paths = run_illustrative(cfg)
            print(f"wrote {len(paths)} files under {cfg.out_dir}")
            return EXIT_OK

        cfg = ExperimentConfig(
            experiment="compressed_sensing",
            method=_pick(merged, "method", "alg4"),
            seed=_pick(merged, "seed", 1),
            iters=_pick(merged, "iters", 1000),
            T=_pick(merged, "T", None),
            out_dir=_pick(merged, "out", "."),
            m=_pick(merged, "m", 100),
            n=_pick(merged, "dim", 1000),
            spikes=_pick(merged, "spikes", 13),
            nu=_pick(merged, "nu", 13.0),
            p=_pick(merged, "p", 1.0),
            delta_smooth=_pick(merged, "delta", None),
            trace_stride=_pick(merged, "stride", 1),
        )
        result = run_compressed_sensing(cfg)
        print(
            f"{cfg.method}: k={int(result.ks[-1])} fx={result.objective[-1]:.6g} "
            f"ball slack={result.constraint[-1]:.3g} trace={result.path}"
        )
        return EXIT_OK
    except InfeasibleCone as exc:
        print(f"infeasible cone: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
