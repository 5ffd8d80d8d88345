"""Command-line entry point: ``orlicz-mp check|run|norms``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

from .errors import ConfigParse, OrliczError
from .experiment import check, load_config, norms, run


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6g}"
    return str(v)


def _print_check(rep, out) -> None:
    idx = rep.index
    print(f"profile {rep.profile}: {'holds' if rep.holds else 'FAILS'}", file=out)
    print("indices:", file=out)
    for key in ("l", "m", "m_check", "ell", "l_star"):
        print(f"  {key:8s} {_fmt(getattr(idx, key))}", file=out)
    print(f"  delta2(Phi)  {idx.delta2_Phi}  (sup ratio {_fmt(idx.delta2_Phi_ratio)})", file=out)
    print(f"  delta2(Phi~) {idx.delta2_tilde}  (sup ratio {_fmt(idx.delta2_tilde_ratio)})", file=out)
    if not idx.delta2_Phi:
        print("  note: Phi fails the Delta2 condition; the Orlicz-Sobolev space is not reflexive", file=out)
    print("conditions:", file=out)
    for key, val in rep.phi_checks.items():
        print(f"  {key:15s} {val}", file=out)
    unused = {"T1": "f3", "T2": "f0"}[rep.profile]
    lines = {
        "f0": f"holds={rep.f0.holds} m_A={_fmt(rep.f0.m_A)} l={_fmt(rep.f0.l)}",
        "f1": f"holds={rep.f1.holds} delta={_fmt(rep.f1.delta)}",
        "f2": f"holds={rep.f2.holds} t1={_fmt(rep.f2.t1)} F(t1)={_fmt(rep.f2.F_at_t1)}",
        "f3": f"holds={rep.f3.holds} alpha={_fmt(rep.f3.alpha)} C={_fmt(rep.f3.C_est)}",
    }
    for key, text in lines.items():
        note = f"  (not part of {rep.profile})" if key == unused else ""
        print(f"  {key}  {text}{note}", file=out)
    for reason in rep.reasons:
        print(f"reason: {reason}", file=out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orlicz-mp", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="TOML experiment config")
    common.add_argument("--workers", type=int, default=None, help="parallel lambda rows")
    common.add_argument("--tol", type=float, default=None, help="residual sup-norm tolerance")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("check", parents=[common], help="verify hypotheses only")
    sub.add_parser("run", parents=[common], help="solve every lambda row")
    p = sub.add_parser("norms", parents=[common], help="modulars and norms of an expression")
    p.add_argument("expr", help="numpy expression in x (and y)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.tol is not None:
            cfg = replace(cfg, tolerances=replace(cfg.tolerances, residual=args.tol))
        if args.verb == "check":
            rep = check(cfg)
            _print_check(rep, sys.stdout)
            return 0 if rep.holds else 1
        if args.verb == "norms":
            print(json.dumps(norms(cfg, args.expr), indent=2))
            return 0
        status, rows = run(cfg, workers=args.workers, log=lambda m: print(m, file=sys.stderr))
        print(f"{'row':>3}  {'lambda':>12}  {'lam/lam*':>9}  {'status':<18}  {'I(u1)':>12}  {'c':>12}")
        for r in rows:
            print(f"{r.row:>3}  {r.lam:12.6g}  {r.lam_rel:9.4g}  {r.status:<18}  {r.I_u1:12.6g}  {r.c:12.6g}")
        print(f"wrote {cfg.output_dir}/summary.csv")
        return status
    except ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OrliczError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
