"""Classical IRS phase-selection strategies.

Search-based solvers take a *vectorised* evaluator: a callable mapping a
``(B, M+N)`` array of phase vectors to a ``(B,)`` array of objective values.
:func:`sum_rate_evaluator` and friends build such callables for a channel.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import metrics
from .channel import ChannelRealization
from .errors import BudgetError, DomainError
from .metrics import PhaseConfig
from .numerics import least_squares_min_norm, matrix_rank, wrap_to_pi

Evaluator = Callable[[np.ndarray], np.ndarray]

_GRID_CHUNK = 1 << 16


@dataclass(frozen=True)
class PhaseSystem:
    """Alignment equations ``eta_m + psi_n = c_(m,n)``.

    Row ``n * M + m`` holds the pair (m, n), i.e. m runs fastest.
    """

    a: np.ndarray  # (M*N, M+N) 0/1
    c: np.ndarray  # (M*N,) rad, wrapped to (-pi, pi]
    m: int
    n: int

    def row(self, m: int, n: int) -> int:
        return n * self.m + m

    @property
    def rank(self) -> int:
        return matrix_rank(self.a)


@dataclass
class SolverResult:
    phases: PhaseConfig
    objective: float
    evaluations: int
    wall_time: float
    trace: list = field(default_factory=list)


def incidence_matrix(m: int, n: int) -> np.ndarray:
    a = np.zeros((m * n, m + n))
    for j in range(n):
        for i in range(m):
            a[j * m + i, i] = 1.0
            a[j * m + i, m + j] = 1.0
    return a


def assemble_system(ch: ChannelRealization, user: int) -> PhaseSystem:
    """Build the over-determined system that aligns every (m, n) phasor of ``user`` at zero."""
    m, n = ch.m, ch.n
    total = (
        np.angle(ch.h_t[user])[:, None]
        + np.angle(ch.h_mn)
        + np.angle(ch.h_r)[None, :]
        + ch.omega_k[user]
        + ch.omega_3
    )
    # row n*M + m  <->  column-major flattening of the (M, N) grid
    c = wrap_to_pi(-total.reshape(-1, order="F"))
    return PhaseSystem(incidence_matrix(m, n), np.atleast_1d(c), m, n)


def solve_pinv(system: PhaseSystem) -> PhaseConfig:
    """Minimum-norm least-squares phases ``A^+ C``, wrapped into [0, 2 pi)."""
    theta = least_squares_min_norm(system.a, system.c)
    return PhaseConfig.from_vector(theta, system.m)


def _block_system(ch: ChannelRealization, user: int, n_blk: int) -> PhaseSystem:
    """Reduced V*W x (V+W) system built from the first element of each block."""
    reps_m = np.arange(0, ch.m, n_blk)
    reps_n = np.arange(0, ch.n, n_blk)
    reduced = ChannelRealization(
        ch.h_t[:, reps_m], ch.h_mn[np.ix_(reps_m, reps_n)], ch.h_r[reps_n], ch.omega_k, ch.omega_3
    )
    return assemble_system(reduced, user)


def solve_block(ch: ChannelRealization, n_blk: int, user: int) -> PhaseConfig:
    """Block solution: one representative phase per ``n_blk``-sized group, replicated.

    Follows the block framework's branches: when ``M + N <= M N`` and
    ``M + N >= n_blk`` the reduced system is solved; otherwise the full
    pseudo-inverse solution is returned.
    """
    m, n = ch.m, ch.n
    if n_blk < 1 or m % n_blk or n % n_blk:
        raise DomainError(f"n_blk={n_blk} must be >= 1 and divide M={m} and N={n}")
    if m + n <= m * n and m + n >= n_blk:
        reduced = solve_pinv(_block_system(ch, user, n_blk))
        return PhaseConfig(np.repeat(reduced.eta, n_blk), np.repeat(reduced.psi, n_blk))
    return solve_pinv(assemble_system(ch, user))


def grid_points(step: float) -> np.ndarray:
    """``{0, step, ..., Xi*step}`` with ``Xi = floor(2 pi / step)``."""
    if not step > 0:
        raise DomainError(f"step must be > 0, got {step}")
    xi = math.floor(2 * math.pi / step + 1e-9)
    return np.arange(xi + 1) * step


def grid_size(m_plus_n: int, step: float) -> int:
    return len(grid_points(step)) ** m_plus_n


def _eval_block(evaluator: Evaluator, pts: np.ndarray, dims: int, start: int, stop: int):
    """Evaluate flat grid indices [start, stop) and return (best_index, best_value)."""
    idx = np.arange(start, stop)
    base = len(pts)
    digits = np.empty((idx.size, dims), dtype=np.int64)
    rem = idx
    for d in range(dims - 1, -1, -1):
        digits[:, d] = rem % base
        rem = rem // base
    vals = np.asarray(evaluator(pts[digits]), dtype=float).reshape(-1)
    best = int(np.argmax(vals))
    return start + best, float(vals[best])


def solve_grid(
    evaluator: Evaluator,
    m_plus_n: int,
    step: float,
    budget: int,
    m: int | None = None,
    workers: int = 1,
) -> SolverResult:
    """Exhaustive search over the phase grid.

    Points are enumerated in lexicographic order and the first maximiser is
    kept, so ties go to the lexicographically smallest phase vector. With
    ``workers > 1`` contiguous slices are evaluated concurrently and reduced in
    order, which gives the same answer as the sequential scan.
    """
    pts = grid_points(step)
    total = len(pts) ** m_plus_n
    if total > budget:
        raise BudgetError(
            f"grid has {total} points (> budget {budget}); reduce the number of "
            f"elements or enlarge the step"
        )
    t0 = time.perf_counter()
    bounds = list(range(0, total, _GRID_CHUNK)) + [total]
    slices = list(zip(bounds[:-1], bounds[1:]))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda s: _eval_block(evaluator, pts, m_plus_n, *s), slices))
    else:
        parts = [_eval_block(evaluator, pts, m_plus_n, *s) for s in slices]
    best_idx, best_val = parts[0]
    for i, v in parts[1:]:
        if v > best_val:
            best_idx, best_val = i, v
    digits = np.unravel_index(best_idx, (len(pts),) * m_plus_n)
    theta = pts[np.array(digits)]
    return SolverResult(
        phases=PhaseConfig.from_vector(theta, m_plus_n if m is None else m),
        objective=best_val,
        evaluations=total,
        wall_time=time.perf_counter() - t0,
    )


def solve_coordinate_ascent(
    evaluator: Evaluator,
    init: PhaseConfig,
    step: float,
    sweeps: int,
    rtol: float = 1e-9,
) -> SolverResult:
    """Cyclic coordinate ascent on the phase grid.

    Each coordinate in turn is set to its best grid value with the others held
    fixed; a move is taken only if it strictly improves the objective, so the
    trace is non-decreasing.
    """
    if sweeps < 1:
        raise DomainError(f"sweeps must be >= 1, got {sweeps}")
    pts = grid_points(step)
    theta = init.as_vector().copy()
    t0 = time.perf_counter()
    current = float(np.asarray(evaluator(theta[None, :])).reshape(-1)[0])
    evals = 1
    trace = [current]
    for _ in range(sweeps):
        start = current
        for d in range(theta.size):
            cand = np.repeat(theta[None, :], len(pts), axis=0)
            cand[:, d] = pts
            vals = np.asarray(evaluator(cand), dtype=float).reshape(-1)
            evals += len(pts)
            j = int(np.argmax(vals))
            if vals[j] > current:
                theta[d] = pts[j]
                current = float(vals[j])
            trace.append(current)
        if current - start <= rtol * abs(start):
            break
    return SolverResult(
        phases=PhaseConfig.from_vector(theta, init.m),
        objective=current,
        evaluations=evals,
        wall_time=time.perf_counter() - t0,
        trace=trace,
    )


def solve_random(rng, m: int, n: int) -> PhaseConfig:
    """iid uniform phases on [0, 2 pi)."""
    from .channel import RngStream

    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return PhaseConfig(gen.uniform(0.0, 2 * np.pi, m), gen.uniform(0.0, 2 * np.pi, n))


# --- evaluators -------------------------------------------------------------


def _split(theta: np.ndarray, m: int):
    theta = np.atleast_2d(theta)
    return theta[:, :m], theta[:, m:]


def power_evaluator(ch, losses, tx_power, user: int = 0, alpha: float = 1.0) -> Evaluator:
    """Received power of ``user`` [W]."""
    def f(theta):
        eta, psi = _split(theta, ch.m)
        return metrics.batch_received_powers(ch, losses, tx_power, eta, psi, alpha)[:, user]
    return f


def user_rate_evaluator(ch, losses, tx_power, noise, user: int = 0, alpha: float = 1.0) -> Evaluator:
    def f(theta):
        eta, psi = _split(theta, ch.m)
        p = metrics.batch_received_powers(ch, losses, tx_power, eta, psi, alpha)
        return np.log2(1.0 + metrics.sinr(p, user, noise))
    return f


def sum_rate_evaluator(ch, losses, tx_power, noise, alpha: float = 1.0) -> Evaluator:
    def f(theta):
        eta, psi = _split(theta, ch.m)
        p = metrics.batch_received_powers(ch, losses, tx_power, eta, psi, alpha)
        return metrics.sum_rate(metrics.sinrs(p, noise))
    return f

