"""Command line interface.

    csflab run <config-file> [--out DIR] [--resume CHECKPOINT]
    csflab export <run-dir> --what snapshots|timeseries [--dest DIR]
    csflab verify-exact [--kind circle|reaper|oval]
    csflab sweep <config-file> --R 4,5,6 [--out DIR]
"""

from __future__ import annotations

import argparse
import sys

from . import regressions
from .scenario import ScenarioError, export_plotdata, parse_scenario, run_scenario, run_sweep


def _load_config(path):
    with open(path) as f:
        return parse_scenario(f.read())


def cmd_run(args):
    cfg = _load_config(args.config)
    status, out = run_scenario(cfg, out_dir=args.out, resume=args.resume)
    with open(f"{out}/verdict.txt") as f:
        sys.stdout.write(f.read())
    print(f"artifacts: {out}")
    return status


def cmd_export(args):
    written = export_plotdata(args.run_dir, args.what, dest=args.dest)
    for path in written:
        print(path)
    return 0


def cmd_verify_exact(args):
    kinds = [args.kind] if args.kind else list(regressions.ALL_KINDS)
    status = 0
    for kind in kinds:
        result = regressions.run_regression(kind)
        print(result.summary())
        if not result.passed:
            status = 1
    return status


def cmd_sweep(args):
    cfg = _load_config(args.config)
    r_values = [float(tok) for tok in args.R.split(",") if tok.strip()]
    if not r_values:
        raise ScenarioError("--R needs a comma-separated list, e.g. 4,5,6")
    status, summary = run_sweep(cfg, r_values, out_base=args.out)
    with open(summary) as f:
        sys.stdout.write(f.read())
    print(f"summary: {summary}")
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="csflab",
                                description="Curve shortening flow laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run one scenario from a config file")
    pr.add_argument("config")
    pr.add_argument("--out", default=None, help="artifact directory")
    pr.add_argument("--resume", default=None,
                    help="checkpoint base path (without .curve/.meta) to resume from")
    pr.set_defaults(fn=cmd_run)

    pe = sub.add_parser("export", help="export run artifacts")
    pe.add_argument("run_dir")
    pe.add_argument("--what", required=True, choices=("snapshots", "timeseries"))
    pe.add_argument("--dest", default=None)
    pe.set_defaults(fn=cmd_export)

    pv = sub.add_parser("verify-exact", help="exact-solution regression suite")
    pv.add_argument("--kind", choices=regressions.ALL_KINDS, default=None)
    pv.set_defaults(fn=cmd_verify_exact)

    ps = sub.add_parser("sweep", help="run a schedule of R values")
    ps.add_argument("config")
    ps.add_argument("--R", required=True, help="comma-separated R values")
    ps.add_argument("--out", default=None)
    ps.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, FileNotFoundError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
