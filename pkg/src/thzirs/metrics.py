"""Received power, SINR, rates and the null-interference upper bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import DomainError, NumericalError, ShapeError
from .numerics import wrap_to_2pi

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhaseConfig:
    """IRS1 phases ``eta`` (M,) and IRS2 phases ``psi`` (N,), reduced mod 2 pi."""

    eta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", wrap_to_2pi(np.atleast_1d(np.asarray(self.eta, dtype=float))))
        object.__setattr__(self, "psi", wrap_to_2pi(np.atleast_1d(np.asarray(self.psi, dtype=float))))

    @classmethod
    def from_vector(cls, theta, m: int) -> "PhaseConfig":
        theta = np.asarray(theta, dtype=float).ravel()
        return cls(theta[:m], theta[m:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.eta, self.psi])

    @property
    def m(self) -> int:
        return self.eta.size

    @property
    def n(self) -> int:
        return self.psi.size


@dataclass(frozen=True)
class RatePoint:
    p_rx: np.ndarray  # W per user
    sinr: np.ndarray
    rate: np.ndarray  # bit/s/Hz per user
    sum_rate: float
    upper_bound: float


def _check_dims(ch: ChannelRealization, phases: PhaseConfig) -> None:
    if phases.m != ch.m or phases.n != ch.n:
        raise ShapeError(f"phases are ({phases.m}, {phases.n}) but channel is ({ch.m}, {ch.n})")


def cascade_terms(ch: ChannelRealization, user: int) -> np.ndarray:
    """(M, N) complex terms ``|h_t||H||h_r| e^{-j(phi_t + phi_mn + phi_r + Omega_k + Omega_3)}``."""
    common = np.exp(-1j * (ch.omega_k[user] + ch.omega_3))
    return np.conj(ch.h_t[user])[:, None] * np.conj(ch.h_mn) * np.conj(ch.h_r)[None, :] * common


def received_power_double_sum(ch, phases, loss, tx_power, user, alpha=1.0) -> float:
    """Received power by the explicit element-pair sum over (m, n)."""
    _check_dims(ch, phases)
    acc = 0j
    for m in range(ch.m):
        for n in range(ch.n):
            ht, hmn, hr = ch.h_t[user, m], ch.h_mn[m, n], ch.h_r[n]
            mag = abs(ht) * alpha * abs(hmn) * alpha * abs(hr)
            phase = (
                np.angle(ht) + phases.eta[m] + np.angle(hmn) + phases.psi[n] + np.angle(hr)
                + ch.omega_k[user] + ch.omega_3
            )
            acc += mag * np.exp(-1j * phase)
    return float(abs(np.sqrt(loss) * acc) ** 2 * tx_power)


def received_power_matrix(ch, phases, loss, tx_power, user, alpha=1.0) -> float:
    """Received power as ``|sqrt(L) e^{-jO3} h_r^H Phi_N H^H Phi_M h_t^H e^{-jOk}|^2 P_t``."""
    _check_dims(ch, phases)
    phi_m = np.diag(alpha * np.exp(-1j * phases.eta))
    phi_n = np.diag(alpha * np.exp(-1j * phases.psi))
    h_t = ch.h_t[user][None, :]  # 1 x M
    h_r = ch.h_r[:, None]  # N x 1
    g = (h_r.conj().T @ phi_n @ ch.h_mn.conj().T @ phi_m @ h_t.conj().T)[0, 0]
    g *= np.exp(-1j * (ch.omega_3 + ch.omega_k[user]))
    return float(abs(np.sqrt(loss) * g) ** 2 * tx_power)


def received_power(ch, phases, loss, tx_power, user, alpha=1.0, verify=False) -> float:
    """Received power of ``user`` [W] for the given IRS phases.

    With ``verify=True`` the element-pair sum is evaluated as well and the two
    must agree to 1e-10 relative.
    """
    if not (loss > 0 and tx_power > 0):
        raise DomainError("loss and tx_power must be > 0")
    p = received_power_matrix(ch, phases, loss, tx_power, user, alpha)
    if verify:
        q = received_power_double_sum(ch, phases, loss, tx_power, user, alpha)
        if abs(p - q) > 1e-10 * max(abs(p), abs(q), 1e-300):
            raise NumericalError(f"matrix form {p!r} disagrees with double sum {q!r}")
    return p


def received_powers(ch, phases, losses, tx_power, alpha=1.0) -> np.ndarray:
    return np.array(
        [received_power_matrix(ch, phases, losses[k], tx_power, k, alpha) for k in range(ch.n_users)]
    )


def batch_received_powers(ch, losses, tx_power, eta, psi, alpha=1.0) -> np.ndarray:
    """Received powers for a batch of configurations.

    ``eta`` is (B, M), ``psi`` is (B, N); returns (B, K).
    """
    terms = np.stack([cascade_terms(ch, k) for k in range(ch.n_users)])  # K, M, N
    a = np.exp(-1j * np.asarray(eta))
    b = np.exp(-1j * np.asarray(psi))
    g = np.einsum("bm,kmn,bn->bk", a, terms, b, optimize=True)
    return (alpha**4) * np.abs(g) ** 2 * np.asarray(losses)[None, :] * tx_power


def sinr(p_rx_all, user: int, noise: float):
    """``P_k / (sum_{i != k} P_i + sigma^2)``; ``p_rx_all`` may carry a leading batch axis."""
    if not noise > 0:
        raise DomainError(f"noise power must be > 0, got {noise}")
    p = np.asarray(p_rx_all, dtype=float)
    interference = p.sum(axis=-1) - p[..., user]
    out = p[..., user] / (interference + noise)
    return float(out) if np.ndim(out) == 0 else out


def sinrs(p_rx_all, noise: float):
    p = np.asarray(p_rx_all, dtype=float)
    return np.stack([sinr(p, k, noise) for k in range(p.shape[-1])], axis=-1)


def rate(sinr_value):
    s = np.asarray(sinr_value, dtype=float)
    if np.any(s < 0):
        raise DomainError("SINR must be >= 0")
    out = np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


def sum_rate(sinr_values):
    """Sum over the last axis of ``log2(1 + gamma_k)``."""
    out = np.sum(rate(np.asarray(sinr_values, dtype=float)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def coherent_power(ch, loss, tx_power, user, alpha=1.0) -> float:
    """Received power with every (m, n) phasor aligned: ``L (sum |h_t||H||h_r|)^2 a^4 P_t``."""
    amp = np.sum(np.abs(ch.h_t[user])[:, None] * np.abs(ch.h_mn) * np.abs(ch.h_r)[None, :])
    return float(loss * (alpha**2 * amp) ** 2 * tx_power)


def upper_bound_sinrs(ch, losses, tx_power, noise, alpha=1.0) -> np.ndarray:
    return np.array(
        [coherent_power(ch, losses[k], tx_power, k, alpha) / noise for k in range(ch.n_users)]
    )


def upper_bound_sum_rate(ch, losses, tx_power, noise, alpha=1.0) -> float:
    """Sum rate with zero interference and perfectly aligned phasors."""
    if not noise > 0:
        raise DomainError(f"noise power must be > 0, got {noise}")
    return sum_rate(upper_bound_sinrs(ch, losses, tx_power, noise, alpha))


def evaluate(ch, phases, losses, tx_power, noise, alpha=1.0) -> RatePoint:
    p = received_powers(ch, phases, losses, tx_power, alpha)
    g = sinrs(p, noise)
    r = rate(g)
    return RatePoint(
        p_rx=p,
        sinr=g,
        rate=r,
        sum_rate=float(np.sum(r)),
        upper_bound=upper_bound_sum_rate(ch, losses, tx_power, noise, alpha),
    )
