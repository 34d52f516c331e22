"""Fast invariant checks behind ``thzirs selftest``."""
from __future__ import annotations

import numpy as np

from . import metrics, solvers
from .channel import ChannelRealization, complex_gaussian
from .linkbudget import noise_power
from .metrics import PhaseConfig
from .numerics import matrix_rank


def _random_channel(gen, m, n, k=2) -> ChannelRealization:
    return ChannelRealization(
        complex_gaussian(gen, (k, m)), complex_gaussian(gen, (m, n)), complex_gaussian(gen, n),
        gen.uniform(0, 2 * np.pi, k), float(gen.uniform(0, 2 * np.pi)),
    )


def _random_phases(gen, m, n) -> PhaseConfig:
    return PhaseConfig(gen.uniform(0, 2 * np.pi, m), gen.uniform(0, 2 * np.pi, n))


def check_noise() -> bool:
    return abs(noise_power(-174.0, 2e9, 10.0) / 7.9621e-11 - 1) < 1e-3


def check_matrix_form(gen) -> bool:
    for _ in range(20):
        m, n = gen.integers(1, 7, 2)
        ch = _random_channel(gen, m, n)
        ph = _random_phases(gen, m, n)
        a = metrics.received_power_matrix(ch, ph, 1.0, 1.0, 0)
        b = metrics.received_power_double_sum(ch, ph, 1.0, 1.0, 0)
        if abs(a - b) > 1e-10 * max(a, b):
            return False
    return True


def check_rank() -> bool:
    return all(
        matrix_rank(solvers.incidence_matrix(m, n)) == m + n - 1
        for m in range(2, 7) for n in range(2, 7)
    )


def check_dominance(gen) -> bool:
    for _ in range(200):
        ch = _random_channel(gen, 3, 3)
        ub = metrics.upper_bound_sum_rate(ch, [1.0, 0.5], 1.0, 0.1)
        if metrics.evaluate(ch, _random_phases(gen, 3, 3), [1.0, 0.5], 1.0, 0.1).sum_rate > ub + 1e-9:
            return False
    return True


def check_coherent_recovery(gen) -> bool:
    for _ in range(20):
        ch = _random_channel(gen, 4, 1)
        ph = solvers.solve_pinv(solvers.assemble_system(ch, 0))
        p = metrics.received_power(ch, ph, 1.0, 1.0, 0)
        if abs(p / metrics.coherent_power(ch, 1.0, 1.0, 0) - 1) > 1e-6:
            return False
    return True


def run_selftest(verbose: bool = False) -> bool:
    gen = np.random.default_rng(12345)
    checks = {
        "noise constant": check_noise(),
        "matrix form == double sum": check_matrix_form(gen),
        "rank(A) == M+N-1": check_rank(),
        "sum rate <= upper bound": check_dominance(gen),
        "coherent recovery when consistent": check_coherent_recovery(gen),
    }
    if verbose:
        for name, ok in checks.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return all(checks.values())
