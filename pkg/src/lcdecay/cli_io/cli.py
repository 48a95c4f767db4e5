"""Command-line entry point ``lcdecay``.

Subcommands: ``run``, ``flow``, ``oracle``, ``verify`` and ``resume``.
Exit status is 0 on success, 1 on invalid input (configuration, checkpoint,
initial data, or a failed verification check) and 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def _kv(out, key, value):
    if isinstance(value, (bool, np.bool_)):
        value = "true" if value else "false"
    elif isinstance(value, float):
        value = "%.17g" % value
    out.write(f"{key}={value}\n")


def cmd_run(args, cfg, out):
    from .simulate import run
    res = run(cfg, csv_path=args.csv)
    path = args.csv or cfg.output.csv_path
    _kv(out, "csv", path)
    _kv(out, "records", len(res.reports))
    _kv(out, "steps", res.steps)
    _kv(out, "theorem_scope", res.metadata["theorem_scope"])
    return EXIT_OK


def cmd_resume(args, cfg, out):
    from .simulate import resume
    res = resume(args.checkpoint, cfg, csv_path=args.csv)
    _kv(out, "csv", args.csv or cfg.output.csv_path)
    _kv(out, "records", len(res.reports))
    _kv(out, "resumed_step", res.metadata["resumed_step"])
    return EXIT_OK


def cmd_flow(args, cfg, out):
    from .config import synthesize_initial_data
    from ..potentials import verify_hypotheses
    from ..stationary import FlowConfig, gradient_flow
    grid = cfg.make_grid()
    pot = cfg.potential()
    rep = verify_hypotheses(pot)
    state = synthesize_initial_data(cfg, grid, rep)
    r2 = rep.r2 if np.isfinite(rep.r2) else None
    fc = FlowConfig(dt=cfg.flow.dt, max_iter=cfg.flow.max_iter, tol=cfg.flow.tol)
    _, srep = gradient_flow(state.q, pot, fc, r2=r2)
    out.write(srep.to_text())
    return EXIT_OK


def cmd_oracle(args, cfg, out):
    from ..bootstrap import bootstrap_cascade, oracle_suite
    a = cfg.analysis
    for k, v in oracle_suite(a.epsilon, a.oracle_horizon).items():
        _kv(out, k, v)
    out.write(bootstrap_cascade(epsilon=a.epsilon, T=a.oracle_horizon).table())
    return EXIT_OK


def cmd_verify(args, cfg, out):
    from .verify import verify_suite
    results = verify_suite(cfg, seed=cfg.init.seed)
    ok = True
    for k, v in results.items():
        _kv(out, k, v)
        if k.endswith("_ok") and not v:
            ok = False
    return EXIT_OK if ok else EXIT_INVALID


COMMANDS = {
    "run": cmd_run,
    "flow": cmd_flow,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
    "resume": cmd_resume,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lcdecay", description="Simulate and check decay of the Q-tensor liquid-crystal flow.")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for transforms (overrides THREADS)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "flow", "oracle", "verify"):
        s = sub.add_parser(name)
        s.add_argument("config")
        if name == "run":
            s.add_argument("--csv", default=None, help="override output.csv_path")
    s = sub.add_parser("resume")
    s.add_argument("checkpoint")
    s.add_argument("config")
    s.add_argument("--csv", default=None, help="override output.csv_path")
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            sys.stderr.write("error: --threads must be >= 1\n")
            return EXIT_INVALID
        os.environ["THREADS"] = str(args.threads)

    from .config import ConfigError, load_config
    from ..dynamics import NumericalFailure
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        for v in exc.violations:
            sys.stderr.write(f"error: {v}\n")
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except NumericalFailure as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
