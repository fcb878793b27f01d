"""``regretlab`` command line: run, certify, compare, check-lemmas, grad-check."""
from __future__ import annotations

import argparse
import sys

from ..core import STREAM_THETA0, Rng, read_trace
from ..errors import ConfigError
from ..problems import check_gradient
from .campaign import run_lemma_campaign
from .config import load_config
from .experiment import build_problem, certify_trace, compare_optimizers, run_experiment

GRAD_CHECK_POINTS = 20
GRAD_CHECK_H = 1e-5
GRAD_CHECK_TOL = 1e-6

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory (default: config 'out' or .)")
    common.add_argument("--seed", type=int, metavar="S", help="root seed, overrides the config")
    p = argparse.ArgumentParser(prog="regretlab", description="Regret certificates for first-order optimizers.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "compare"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} the optimizers in a config")
        sp.add_argument("config")
        sp.add_argument("--plot", action="store_true", default=None, help="write SVG regret plots")
    sp = sub.add_parser("certify", parents=[common], help="certify a stored trace")
    sp.add_argument("trace")
    sp.add_argument("config")
    sp = sub.add_parser("check-lemmas", parents=[common], help="seeded lemma campaign")
    sp.add_argument("--trials", type=int, default=1000, metavar="N")
    sp.add_argument("--lipschitz-scale", type=float, default=1.0,
                    help="multiply the L handed to checkers (below 1 understates it)")
    sp = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient check")
    sp.add_argument("config")
    return p

def _print_rows(rows) -> None:
    for r in rows:
        print(f"{r['label']}: algo={r['algo']} eta={r['eta']} final_loss={r['final_loss']} "
              f"final_regret={r['final_regret']} steps_to_tol={r['steps_to_tol']} "
              f"certificate={r['certificate']}")

def _grad_check(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    obj = build_problem(cfg, seed)
    rng = Rng(seed, (STREAM_THETA0, 1))
    worst = 0.0
    for k in range(GRAD_CHECK_POINTS):
        err = check_gradient(obj, rng.child(k).normal(obj.dim), GRAD_CHECK_H)
        worst = max(worst, err)
        print(f"point {k}: max_error={err:.3e}")
    ok = worst <= GRAD_CHECK_TOL
    print(f"grad-check {'ok' if ok else 'FAILED'}: worst={worst:.3e} (tolerance {GRAD_CHECK_TOL:g})")
    return 0 if ok else 1

def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command in ("run", "compare"):
            cfg = load_config(args.config)
            fn = run_experiment if args.command == "run" else compare_optimizers
            result = fn(cfg, out_dir=args.out, seed=args.seed, plot=args.plot)
            _print_rows(result.rows)
            return result.exit_code
        if args.command == "certify":
            cfg = load_config(args.config)
            cert, err, code = certify_trace(read_trace(args.trace), cfg, args.out, args.seed)
            if err:
                print(f"precondition error: {err}", file=sys.stderr)
            else:
                print(f"{cert.algorithm}: T={cert.T} regret={cert.regret_final:.6g} "
                      f"bound={cert.bound_final} holds={cert.holds} {cert.note}".rstrip())
            return code
        if args.command == "check-lemmas":
            result = run_lemma_campaign(args.seed or 0, args.trials, args.out or ".",
                                        args.lipschitz_scale)
            for name, (n, bad, errs) in result.counts().items():
                print(f"{name}: trials={n} violations={bad} errors={errs}")
            return result.exit_code
        return _grad_check(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

if __name__ == "__main__":
    sys.exit(main())
