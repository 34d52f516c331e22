"""Configuration files, Monte-Carlo sweeps and complexity counts.

Config files are YAML with three optional sections, ``scenario``, ``train``
and ``sweep``, whose keys are the field names of :class:`ScenarioConfig`,
:class:`TrainConfig` and :class:`SweepSpec`. Absent keys keep their defaults,
so an empty file describes the reference 18 x 18 setup.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import metrics, solvers
from .channel import RngStream
from .ddpg import TrainConfig, policy_phases, train
from .errors import (
    BudgetError,
    ConfigError,
    ConfigNotFoundError,
    ConfigParseError,
    ConfigValueError,
)
from .linkbudget import LinkBudget, ScenarioConfig, build_link_budget
from .metrics import PhaseConfig

SOLVERS = ("pinv", "block", "grid", "coord", "random", "ddpg")
CSV_VERSION = "thzirs-sweep v1"
CSV_HEADER = ["solver", "rho", "ratio", "trial", "rate1", "rate2", "sum_rate", "upper_bound", "p_rx1_mw", "wall_s"]
SUMMARY_HEADER = ["solver", "rho", "ratio", "n", "metric", "mean", "ci95"]
_LINK_RANDOM = 14  # per-trial stream for the random-phase baseline


@dataclass
class SweepSpec:
    objective: str = "sum_rate"  # "sum_rate" | "desired_user"
    solvers: tuple = ("pinv", "block", "random")
    ratios: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    rhos: tuple = (0.25, 0.5, 0.75, 0.9, 1.0)
    trials: int = 1000
    seed: int = 0
    n_blk: int = 6
    grid_step: float = 2 * math.pi / 72
    grid_budget: int = 10_000_000
    coord_step: float = 2 * math.pi / 72
    coord_sweeps: int = 10
    record_timing: bool = False  # wall_s is written as nan unless set, keeping CSVs reproducible

    def __post_init__(self):
        self.solvers = tuple(str(s) for s in self.solvers)
        self.ratios = tuple(float(r) for r in self.ratios)
        self.rhos = tuple(float(r) for r in self.rhos)
        self.validate()

    def validate(self) -> None:
        if self.objective not in ("sum_rate", "desired_user"):
            raise ConfigValueError("objective", f"must be 'sum_rate' or 'desired_user', got {self.objective!r}")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown or not self.solvers:
            raise ConfigValueError("solvers", f"must be a non-empty subset of {SOLVERS}, got {list(self.solvers)}")
        if not self.ratios or any(not 0 < r <= 1 for r in self.ratios):
            raise ConfigValueError("ratios", f"every ratio must lie in (0, 1], got {list(self.ratios)}")
        if not self.rhos or any(not 0 <= r <= 1 for r in self.rhos):
            raise ConfigValueError("rhos", f"every rho must lie in [0, 1], got {list(self.rhos)}")
        if int(self.trials) < 1:
            raise ConfigValueError("trials", f"must be >= 1, got {self.trials}")
        if int(self.n_blk) < 1:
            raise ConfigValueError("n_blk", f"must be >= 1, got {self.n_blk}")
        for name in ("grid_step", "coord_step"):
            if not getattr(self, name) > 0:
                raise ConfigValueError(name, "must be > 0")
        if int(self.coord_sweeps) < 1:
            raise ConfigValueError("coord_sweeps", "must be >= 1")

    def replace(self, **changes) -> "SweepSpec":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SweepSpec(**values)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    train: TrainConfig
    sweep: SweepSpec


# --- config files ------------------------------------------------------------------


def _build(cls, section: str, raw) -> object:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigValueError(section, f"section must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigValueError(f"{section}.{key}", "unknown key")
    try:
        return cls(**raw)
    except ConfigValueError as exc:
        raise ConfigValueError(f"{section}.{exc.key}", str(exc).split(": ", 1)[-1]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigValueError(section, str(exc)) from None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{source}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{source}: top level must be a mapping")
    for key in raw:
        if key not in ("scenario", "train", "sweep"):
            raise ConfigValueError(key, "unknown section (expected scenario, train or sweep)")
    return ExperimentConfig(
        _build(ScenarioConfig, "scenario", raw.get("scenario")),
        _build(TrainConfig, "train", raw.get("train")),
        _build(SweepSpec, "sweep", raw.get("sweep")),
    )


def load_config(path) -> ExperimentConfig:
    """Read a YAML config; missing file, bad syntax and bad values raise distinct errors."""
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ConfigNotFoundError(f"config file not found: {p}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from None
    return parse_config(text, str(p))


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def serialize_config(cfg: ExperimentConfig) -> str:
    data = {
        "scenario": {k: _plain(v) for k, v in asdict(cfg.scenario).items()},
        "train": asdict(cfg.train),
        "sweep": {k: _plain(v) for k, v in asdict(cfg.sweep).items()},
    }
    return yaml.safe_dump(data, sort_keys=False)


# --- sweeps ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    solver: str
    rho: float
    ratio: float
    trial: int
    rate1: float
    rate2: float
    sum_rate: float
    upper_bound: float
    p_rx1_mw: float
    wall_s: float
    phases: PhaseConfig = field(repr=False, compare=False, default=None)

    def csv_fields(self) -> list[str]:
        return [self.solver, repr(self.rho), repr(self.ratio), str(self.trial)] + [
            repr(float(getattr(self, k)))
            for k in ("rate1", "rate2", "sum_rate", "upper_bound", "p_rx1_mw", "wall_s")
        ]


@dataclass
class SweepResult:
    rows: list[SweepRow]
    errors: list[tuple[str, float, float, str]]  # (solver, rho, ratio, message)

    def select(self, solver: str, rho: float | None = None, ratio: float | None = None) -> list[SweepRow]:
        return [
            r for r in self.rows
            if r.solver == solver and (rho is None or r.rho == rho) and (ratio is None or r.ratio == ratio)
        ]

    def aggregates(self) -> list[list]:
        """Mean and 95% normal-approximation half-width per (solver, rho, ratio, metric)."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.solver, r.rho, r.ratio), []).append(r)
        out = []
        for (solver, rho, ratio), rows in groups.items():
            for metric in ("rate1", "rate2", "sum_rate", "upper_bound", "p_rx1_mw"):
                x = np.array([getattr(r, metric) for r in rows])
                half = 1.96 * x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else float("nan")
                out.append([solver, rho, ratio, x.size, metric, float(x.mean()), float(half)])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_VERSION} summary\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for solver, rho, ratio, n, metric, mean, half in self.aggregates():
            w.writerow([solver, repr(rho), repr(ratio), n, metric, repr(mean), repr(half)])
        return buf.getvalue()


def cell_seed(master: int, rho_idx: int, ratio_idx: int) -> int:
    """Training seed for one (rho, ratio) cell, independent of execution order."""
    return int(np.random.SeedSequence([master, rho_idx, ratio_idx]).generate_state(1, np.uint64)[0] >> 1)


def _objective_evaluator(spec: SweepSpec, lb: LinkBudget, ch):
    if spec.objective == "sum_rate":
        return solvers.sum_rate_evaluator(ch, lb.losses, lb.tx_power, lb.noise, lb.alpha)
    return solvers.power_evaluator(ch, lb.losses, lb.tx_power, 0, lb.alpha)


def solve_one(solver: str, spec: SweepSpec, lb: LinkBudget, ch, trial: int, actor, train_cfg) -> PhaseConfig:
    m, n = lb.cfg.m, lb.cfg.n
    if solver == "pinv":
        return solvers.solve_pinv(solvers.assemble_system(ch, 0))
    if solver == "block":
        return solvers.solve_block(ch, spec.n_blk, 0)
    if solver == "random":
        return solvers.solve_random(RngStream.for_trial(spec.seed, trial, _LINK_RANDOM), m, n)
    if solver == "grid":
        return solvers.solve_grid(_objective_evaluator(spec, lb, ch), m + n, spec.grid_step,
                                  spec.grid_budget, m=m).phases
    if solver == "coord":
        init = solvers.solve_pinv(solvers.assemble_system(ch, 0))
        return solvers.solve_coordinate_ascent(_objective_evaluator(spec, lb, ch), init,
                                               spec.coord_step, spec.coord_sweeps).phases
    if solver == "ddpg":
        return policy_phases(actor, lb, ch, train_cfg, spec.seed, trial)
    raise ConfigValueError("solvers", f"unknown solver {solver!r}")


def make_row(solver: str, rho: float, ratio: float, trial: int, lb: LinkBudget, ch,
             phases: PhaseConfig, wall: float) -> SweepRow:
    pt = metrics.evaluate(ch, phases, lb.losses, lb.tx_power, lb.noise, lb.alpha)
    return SweepRow(solver, rho, ratio, trial, float(pt.rate[0]), float(pt.rate[1]), pt.sum_rate,
                    pt.upper_bound, float(pt.p_rx[0]) * 1e3, wall, phases)


def _run_cell(args):
    """All solvers and trials of one (rho, ratio) cell."""
    spec, scenario, train_cfg, rho_idx, ratio_idx = args
    rho, ratio = spec.rhos[rho_idx], spec.ratios[ratio_idx]
    lb = build_link_budget(scenario.replace(rho=rho).with_ratio(ratio))
    channels = [lb.channel.draw_trial(spec.seed, t) for t in range(spec.trials)]
    rows, errors = [], []
    actor, cell_cfg = None, train_cfg
    for solver in spec.solvers:
        try:
            if solver == "ddpg" and actor is None:
                cell_cfg = train_cfg.replace(objective=spec.objective, seed=cell_seed(spec.seed, rho_idx, ratio_idx))
                actor = train(cell_cfg, lb).agent.actor
            cell_rows = []
            for t, ch in enumerate(channels):
                t0 = time.perf_counter()
                phases = solve_one(solver, spec, lb, ch, t, actor, cell_cfg)
                wall = time.perf_counter() - t0 if spec.record_timing else float("nan")
                cell_rows.append(make_row(solver, rho, ratio, t, lb, ch, phases, wall))
            rows.extend(cell_rows)
        except BudgetError as exc:
            errors.append((solver, rho, ratio, str(exc)))
    return rows, errors


def run_sweep(spec: SweepSpec, scenario: ScenarioConfig, train_cfg: TrainConfig | None = None,
              workers: int = 1) -> SweepResult:
    """Evaluate every solver on every (rho, ratio) cell.

    Trials share channel realizations across solvers within a cell. Cells run
    in separate processes when ``workers > 1``; rows are reassembled in cell
    order, so the output does not depend on ``workers``.
    """
    train_cfg = train_cfg or TrainConfig()
    jobs = [
        (spec, scenario, train_cfg, i, j)
        for i in range(len(spec.rhos))
        for j in range(len(spec.ratios))
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_cell, jobs))
    else:
        parts = [_run_cell(job) for job in jobs]
    rows, errors = [], []
    for r, e in parts:
        rows.extend(r)
        errors.extend(e)
    return SweepResult(rows, errors)


# --- complexity -----------------------------------------------------------------------------


def complexity_report(m: int = 18, n: int = 18, k: int = 2, xi: int = 72, s: int = 3, ui: int = 128,
                      uj: int = 128, n_hidden: int = 2, a: int | None = None, n_blk: int = 6) -> dict:
    """Operation counts of the four strategies.

    * ``ddpg``: one actor forward pass, ``S Ui + n Ui Uj + Uj A + A``
    * ``pinv``: ``(MN)^2 (M+N)``
    * ``block``: ``(MN / N_blk^2)^2 (M+N) / N_blk``
    * ``exhaustive``: ``K (Xi+1)^(M+N)``
    """
    a = m + n if a is None else a
    for name, v in dict(m=m, n=n, k=k, xi=xi, s=s, ui=ui, uj=uj, n_hidden=n_hidden, a=a, n_blk=n_blk).items():
        if int(v) < 1:
            raise ConfigValueError(name, f"must be >= 1, got {v}")
    mn = m * n
    return {
        "ddpg": s * ui + n_hidden * ui * uj + uj * a + a,
        "pinv": mn**2 * (m + n),
        "block": (mn / n_blk**2) ** 2 * ((m + n) / n_blk),
        "exhaustive": k * (xi + 1) ** (m + n),
    }


def format_complexity(report: dict) -> str:
    lines = ["scheme,operations"]
    for name, v in report.items():
        lines.append(f"{name},{v:.6g}" if isinstance(v, float) else f"{name},{v}")
    return "\n".join(lines) + "\n"
