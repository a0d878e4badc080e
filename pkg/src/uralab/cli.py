"""Command-line entry points.

Every config field is a flag of the same name (``--Ka 8``, ``--ebn0_db 10``).
Exit status is 0 on success and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .codebook import build_codebook, save_codebook
from .collision import collision_analytics, simulate_collisions
from .config import InvalidConfig, SystemConfig, load_config, parse_overrides, validate
from .harness import SWEEP_AXES, aggregate, run_sweep, run_trial, write_csv
from .ldpc import ConstructionFailed, build_ldpc, write_alist


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file applied before the flags")
    for f in dataclasses.fields(SystemConfig):
        p.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", metavar=f.name.upper())


def _config(args) -> SystemConfig:
    base = load_config(args.config) if args.config else SystemConfig()
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return validate(base.replace(**parse_overrides(flags)))


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> None:
    cfg = _config(args)
    records = [run_trial(cfg, t) for t in range(args.trials)]
    _emit(write_csv([aggregate("none", "", records, cfg.seed)]), args.out)


def cmd_sweep(args) -> None:
    cfg = _config(args)
    values = [v for v in args.values.split(",") if v]
    _emit(write_csv(run_sweep(cfg, args.axis, values, args.trials)), args.out)


def cmd_collision_analytics(args) -> None:
    cfg = _config(args)
    Mp = 2 ** cfg.Bp
    a = collision_analytics(cfg.Ka, Mp, cfg.slide, cfg.Bp, args.rounds)
    sim = simulate_collisions(cfg.Ka, cfg.Bp, cfg.slide, cfg.B, args.rounds, args.trials,
                              np.random.default_rng(cfg.seed))
    lines = ["round,analytic_expected,bound,mc_mean,mc_stderr"]
    for r in range(args.rounds + 1):
        col = sim[:, r]
        lines.append(f"{r},{a['expected_collided'][r]:.6g},{a['bound'][r]:.6g},"
                     f"{col.mean():.6g},{col.std(ddof=1) / np.sqrt(len(col)):.6g}")
    p_emp = float((sim[:, 0] == 0).mean())
    lines.append(f"# p_no_colli analytic={a['p_no_colli']:.6g} mc={p_emp:.6g}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_ldpc_gen(args) -> None:
    cfg = _config(args)
    _emit(write_alist(build_ldpc(cfg.seed, cfg.Bc).h), args.out)


def cmd_codebook_gen(args) -> None:
    cfg = _config(args)
    if not args.out:
        raise SystemExit("codebook-gen needs --out")
    save_codebook(build_codebook(cfg.seed, cfg.Lp, cfg.Bp), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uralab")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _add_config_flags(p)
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "Monte Carlo run of a single config")
    p.add_argument("--trials", type=int, default=20)
    p = add("sweep", cmd_sweep, "sweep one config axis")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--trials", type=int, default=20)
    p = add("collision-analytics", cmd_collision_analytics, "closed forms next to Monte Carlo")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--trials", type=int, default=2000)
    add("ldpc-gen", cmd_ldpc_gen, "write the parity-check matrix as alist")
    add("codebook-gen", cmd_codebook_gen, "write the CS codebook as binary")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InvalidConfig, ConstructionFailed) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
