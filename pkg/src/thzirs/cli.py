"""Command-line entry point: ``thzirs {sweep,train,solve,complexity,selftest}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness, metrics
from .ddpg import policy_phases, save_checkpoint, train, write_reward_csv
from .errors import ThzIrsError
from .linkbudget import build_link_budget


def _experiment(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.parse_config("")
    scenario, train_cfg, sweep = cfg.scenario, cfg.train, cfg.sweep
    if getattr(args, "seed", None) is not None:
        scenario = scenario.replace(seed=args.seed)
        train_cfg = train_cfg.replace(seed=args.seed)
        sweep = sweep.replace(seed=args.seed)
    if getattr(args, "objective", None):
        train_cfg = train_cfg.replace(objective=args.objective)
        sweep = sweep.replace(objective=args.objective)
    return harness.ExperimentConfig(scenario, train_cfg, sweep)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args) -> int:
    exp = _experiment(args)
    spec = exp.sweep
    if args.solver:
        spec = spec.replace(solvers=tuple(s for item in args.solver for s in item.split(",")))
    if args.trials is not None:
        spec = spec.replace(trials=args.trials)
    result = harness.run_sweep(spec, exp.scenario, exp.train, workers=args.workers)
    _write(result.to_csv(), args.out)
    if args.summary:
        Path(args.summary).write_text(result.summary_csv())
    for solver, rho, ratio, msg in result.errors:
        print(f"warning: {solver} skipped at rho={rho} ratio={ratio}: {msg}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    exp = _experiment(args)
    cfg = exp.train if args.episodes is None else exp.train.replace(episodes=args.episodes)
    lb = build_link_budget(exp.scenario)
    result = train(cfg, lb)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.npz", result, cfg)
    write_reward_csv(out / "rewards.csv", result.rewards)
    print(f"trained {cfg.episodes} episodes; final reward {result.rewards[-1]:.6g}; wrote {out}")
    return 0


def cmd_solve(args) -> int:
    exp = _experiment(args)
    spec = exp.sweep
    lb = build_link_budget(exp.scenario)
    ch = lb.channel.draw_trial(exp.scenario.seed, args.trial)
    if args.solver == "ddpg":
        cfg = exp.train if args.episodes is None else exp.train.replace(episodes=args.episodes)
        phases = policy_phases(train(cfg, lb).agent.actor, lb, ch, cfg, exp.scenario.seed, args.trial)
    else:
        spec = spec.replace(seed=exp.scenario.seed)
        phases = harness.solve_one(args.solver, spec, lb, ch, args.trial, None, exp.train)
    pt = metrics.evaluate(ch, phases, lb.losses, lb.tx_power, lb.noise, lb.alpha)
    np.set_printoptions(precision=6, floatmode="fixed", linewidth=100)
    print(f"solver: {args.solver}")
    print(f"eta: {np.array2string(phases.eta, separator=', ')}")
    print(f"psi: {np.array2string(phases.psi, separator=', ')}")
    print(f"rate1: {pt.rate[0]:.10g}")
    print(f"rate2: {pt.rate[1]:.10g}")
    print(f"sum_rate: {pt.sum_rate:.10g}")
    print(f"upper_bound: {pt.upper_bound:.10g}")
    return 0


def cmd_complexity(args) -> int:
    report = harness.complexity_report(m=args.m, n=args.n, k=args.k, xi=args.xi, s=args.s, ui=args.ui,
                                       uj=args.uj, n_hidden=args.nh, a=args.a, n_blk=args.nblk)
    sys.stdout.write(harness.format_complexity(report))
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thzirs", description="Cascaded-IRS THz uplink simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, objective=True):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seed", type=int)
        if objective:
            sp.add_argument("--objective", choices=["sum_rate", "desired_user"])

    sp = sub.add_parser("sweep", help="Monte-Carlo sweep over rho and distance ratio -> CSV")
    common(sp)
    sp.add_argument("--solver", action="append", help="solver name(s), comma separated or repeated")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.add_argument("--summary", help="write mean / 95%% CI table to this path")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("train", help="one DDPG run -> checkpoint.npz + rewards.csv")
    common(sp)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("solve", help="one realization, one solver")
    common(sp)
    sp.add_argument("--solver", default="pinv", choices=list(harness.SOLVERS))
    sp.add_argument("--trial", type=int, default=0)
    sp.add_argument("--episodes", type=int, help="training episodes for --solver ddpg")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("complexity", help="operation counts of the strategies")
    for flag, default in (("m", 18), ("n", 18), ("k", 2), ("xi", 72), ("s", 3), ("ui", 128),
                          ("uj", 128), ("nh", 2), ("nblk", 6)):
        sp.add_argument(f"--{flag}", type=int, default=default)
    sp.add_argument("--a", type=int, help="action size (default M+N)")
    sp.set_defaults(func=cmd_complexity)

    sp = sub.add_parser("selftest", help="quick invariant checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (ThzIrsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
