import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_channel, random_phases
from thzirs import metrics
from thzirs.channel import ChannelRealization
from thzirs.errors import DomainError, NumericalError, ShapeError
from thzirs.metrics import PhaseConfig


def unit_channel(m, n, k=2):
    return ChannelRealization(np.ones((k, m), complex), np.ones((m, n), complex), np.ones(n, complex),
                              np.zeros(k), 0.0)


def test_phase_config_wraps():
    p = PhaseConfig([-0.5, 7.0], [2 * math.pi])
    assert np.all((p.eta >= 0) & (p.eta < 2 * math.pi))
    assert p.psi[0] == 0.0
    np.testing.assert_allclose(PhaseConfig.from_vector(p.as_vector(), 2).eta, p.eta)
    assert (p.m, p.n) == (2, 1)


def test_coherent_unit_channel():
    ch = unit_channel(3, 4)
    p = metrics.received_power(ch, PhaseConfig(np.zeros(3), np.zeros(4)), 2.0, 5.0, 0, verify=True)
    assert p == pytest.approx(2.0 * (12**2) * 5.0, rel=1e-14)


def test_coherent_sum_with_channel_phases_cancelled(gen):
    m, n = 3, 2
    phi_t, phi_mn, phi_r = gen.uniform(-3, 3, m), gen.uniform(-3, 3, (m, n)), gen.uniform(-3, 3, n)
    # separable H so that eta/psi can cancel every exponent
    a, b = gen.uniform(-3, 3, m), gen.uniform(-3, 3, n)
    phi_mn = a[:, None] + b[None, :]
    ch = ChannelRealization(np.exp(1j * phi_t)[None, :].repeat(2, 0), np.exp(1j * phi_mn), np.exp(1j * phi_r),
                            np.array([0.7, 0.1]), 1.3)
    eta = -(phi_t + a) - 0.7 - 1.3
    psi = -(phi_r + b)
    p = metrics.received_power(ch, PhaseConfig(eta, psi), 1.0, 1.0, 0, verify=True)
    assert p == pytest.approx((m * n) ** 2, rel=1e-12)


def test_alternating_phasors_cancel():
    ch = unit_channel(4, 3)
    eta = np.array([0.0, math.pi, 0.0, math.pi])
    p = metrics.received_power(ch, PhaseConfig(eta, np.zeros(3)), 1.0, 1.0, 0, verify=True)
    assert p < 1e-25


def test_double_sum_equals_matrix_form_m3(gen):
    ch = random_channel(gen, 3, 3)
    ph = random_phases(gen, 3, 3)
    a = metrics.received_power_matrix(ch, ph, 0.3, 2.0, 1, 0.8)
    b = metrics.received_power_double_sum(ch, ph, 0.3, 2.0, 1, 0.8)
    assert abs(a - b) <= 1e-10 * a


def test_batch_matches_scalar(gen):
    ch = random_channel(gen, 4, 3)
    phs = [random_phases(gen, 4, 3) for _ in range(5)]
    batch = metrics.batch_received_powers(ch, [1.0, 0.5], 2.0, np.stack([p.eta for p in phs]),
                                          np.stack([p.psi for p in phs]), 0.9)
    for i, p in enumerate(phs):
        np.testing.assert_allclose(batch[i], metrics.received_powers(ch, p, [1.0, 0.5], 2.0, 0.9), rtol=1e-12)


def test_received_power_errors(gen):
    ch = random_channel(gen, 2, 2)
    with pytest.raises(ShapeError):
        metrics.received_power(ch, PhaseConfig(np.zeros(3), np.zeros(2)), 1.0, 1.0, 0)
    with pytest.raises(DomainError):
        metrics.received_power(ch, PhaseConfig(np.zeros(2), np.zeros(2)), 0.0, 1.0, 0)


def test_verify_detects_disagreement(gen, monkeypatch):
    ch = random_channel(gen, 2, 2)
    monkeypatch.setattr(metrics, "received_power_double_sum", lambda *a, **k: 1e9)
    with pytest.raises(NumericalError):
        metrics.received_power(ch, PhaseConfig(np.zeros(2), np.zeros(2)), 1.0, 1.0, 0, verify=True)


def test_sinr_examples():
    s2 = 7.9621e-11
    assert metrics.sinr([s2, s2], 0, s2) == pytest.approx(0.5)
    assert metrics.sinr([3.0, 0.0], 0, 2.0) == pytest.approx(1.5)
    assert metrics.sinr([4e-10, 1e-10], 0, s2) == pytest.approx(4e-10 / (1e-10 + s2), rel=1e-14)
    assert metrics.sinr([4e-10, 1e-10], 0, s2) == pytest.approx(2.22691, abs=1e-5)
    with pytest.raises(DomainError):
        metrics.sinr([1.0, 1.0], 0, 0.0)


def test_sinr_general_k():
    assert metrics.sinr([1.0, 2.0, 3.0], 1, 1.0) == pytest.approx(2.0 / 5.0)


def test_rate_examples():
    assert metrics.rate(0.0) == 0.0
    assert metrics.rate(1.0) == 1.0
    assert metrics.rate(3.0) == 2.0
    with pytest.raises(DomainError):
        metrics.rate(-0.1)


def test_sum_rate_examples():
    assert metrics.sum_rate([0.0, 0.0]) == 0.0
    assert metrics.sum_rate([1.0, 3.0]) == 3.0
    assert metrics.sum_rate([2.2259, 0.4]) == pytest.approx(math.log2(3.2259) + math.log2(1.4), rel=1e-14)


def test_upper_bound_single_element():
    ch = unit_channel(1, 1)
    ub = metrics.upper_bound_sinrs(ch, [0.5, 0.25], 3.0, 0.1)
    np.testing.assert_allclose(ub, [0.5 * 3.0 / 0.1, 0.25 * 3.0 / 0.1])


def test_upper_bound_scales_64_with_doubled_magnitudes(gen):
    ch = random_channel(gen, 3, 2)
    ch2 = ChannelRealization(2 * ch.h_t, 2 * ch.h_mn, 2 * ch.h_r, ch.omega_k, ch.omega_3)
    np.testing.assert_allclose(metrics.upper_bound_sinrs(ch2, [1, 1], 1.0, 1.0),
                               64 * metrics.upper_bound_sinrs(ch, [1, 1], 1.0, 1.0), rtol=1e-12)


def test_upper_bound_dominates_1000_random_phases(gen):
    ch = random_channel(gen, 4, 4)
    ub = metrics.upper_bound_sum_rate(ch, [1.0, 0.3], 1.0, 0.05)
    eta = gen.uniform(0, 2 * math.pi, (1000, 4))
    psi = gen.uniform(0, 2 * math.pi, (1000, 4))
    p = metrics.batch_received_powers(ch, [1.0, 0.3], 1.0, eta, psi)
    sr = metrics.sum_rate(metrics.sinrs(p, 0.05))
    assert np.all(sr <= ub + 1e-9)


def test_evaluate_fields(gen):
    ch = random_channel(gen, 3, 3)
    pt = metrics.evaluate(ch, random_phases(gen, 3, 3), [1.0, 0.5], 2.0, 0.1)
    assert pt.sum_rate == pytest.approx(pt.rate.sum())
    assert pt.sum_rate <= pt.upper_bound + 1e-9
    assert np.all(pt.p_rx >= 0) and np.all(pt.sinr >= 0)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_prop_matrix_form_equivalence(m, n, seed):
    g = np.random.default_rng(seed)
    ch, ph = random_channel(g, m, n), random_phases(g, m, n)
    a = metrics.received_power_matrix(ch, ph, 1.0, 1.0, 0)
    b = metrics.received_power_double_sum(ch, ph, 1.0, 1.0, 0)
    assert abs(a - b) <= 1e-10 * max(a, b, 1e-300)


@given(st.integers(1, 5), st.integers(1, 5), st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_prop_global_phase_invariance(m, n, nu, seed):
    g = np.random.default_rng(seed)
    ch, ph = random_channel(g, m, n), random_phases(g, m, n)
    p0 = metrics.received_power(ch, ph, 1.0, 1.0, 0)
    p1 = metrics.received_power(ch, PhaseConfig(ph.eta + nu, ph.psi), 1.0, 1.0, 0)
    p2 = metrics.received_power(ch, PhaseConfig(ph.eta, ph.psi + nu), 1.0, 1.0, 0)
    assert abs(p1 - p0) <= 1e-10 * max(p0, 1e-300) + 1e-300
    assert abs(p2 - p0) <= 1e-10 * max(p0, 1e-300) + 1e-300


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_prop_summation_order(m, n, seed):
    g = np.random.default_rng(seed)
    ch, ph = random_channel(g, m, n), random_phases(g, m, n)
    terms = metrics.cascade_terms(ch, 0) * np.exp(-1j * ph.eta)[:, None] * np.exp(-1j * ph.psi)[None, :]
    by_rows = sum(terms[i, j] for i in range(m) for j in range(n))
    by_cols = sum(terms[i, j] for j in range(n) for i in range(m))
    p = metrics.received_power(ch, ph, 1.0, 1.0, 0)
    assert abs(abs(by_rows) ** 2 - p) <= 1e-10 * max(p, 1e-300)
    assert abs(abs(by_cols) ** 2 - p) <= 1e-10 * max(p, 1e-300)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_prop_dominance(m, n, seed):
    g = np.random.default_rng(seed)
    ch = random_channel(g, m, n)
    pt = metrics.evaluate(ch, random_phases(g, m, n), [1.0, 0.2], 10.0, 0.01)
    assert pt.sum_rate <= pt.upper_bound + 1e-9
