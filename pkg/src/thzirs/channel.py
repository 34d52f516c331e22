"""Stochastic small-scale fading for the three hops.

* user k -> IRS1 and IRS2 -> Rx: Rician, LOS part plus CN(0, 1) scatter.
* IRS1 -> IRS2: spatially correlated Rayleigh, Kronecker-separable
  ``H = S_M G S_N^T`` with exponential correlation on both sides.

Randomness comes from :class:`RngStream`, a (seed, stream_id) pair mapped to
an independent counter-based Philox generator, so each Monte-Carlo trial and
each link can be drawn in any order (or in parallel) with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DomainError, ShapeError
from .numerics import psd_sqrt


class Link(IntEnum):
    IRS_IRS = 0
    IRS_RX = 1
    USER = 2  # user k draws from stream USER + k


_LINKS_PER_TRIAL = 16


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) & (2**64 - 1),
            spawn_key=(int(self.stream_id) & (2**64 - 1),),
        )
        return np.random.Generator(np.random.Philox(ss))

    @classmethod
    def for_trial(cls, seed: int, trial: int, link: int) -> "RngStream":
        return cls(seed, trial * _LINKS_PER_TRIAL + int(link))


@dataclass(frozen=True)
class CorrelationSpec:
    rho: float
    theta: float
    size: int

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [0, 1], got {self.rho}")
        if self.size < 1:
            raise DomainError(f"size must be >= 1, got {self.size}")


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all small-scale channels.

    h_t     : (K, M) complex, row k is h_{t,k}
    h_mn    : (M, N) complex
    h_r     : (N,) complex
    omega_k : (K,) propagation phase of the first hop per user [rad]
    omega_3 : propagation phase of the third hop [rad]
    """

    h_t: np.ndarray
    h_mn: np.ndarray
    h_r: np.ndarray
    omega_k: np.ndarray
    omega_3: float

    def __post_init__(self):
        k, m = self.h_t.shape
        if self.h_mn.shape[0] != m or self.h_r.shape != (self.h_mn.shape[1],):
            raise ShapeError(
                f"inconsistent shapes h_t={self.h_t.shape} h_mn={self.h_mn.shape} h_r={self.h_r.shape}"
            )
        if np.shape(self.omega_k) != (k,):
            raise ShapeError(f"omega_k must have one entry per user ({k})")

    @property
    def n_users(self) -> int:
        return self.h_t.shape[0]

    @property
    def m(self) -> int:
        return self.h_mn.shape[0]

    @property
    def n(self) -> int:
        return self.h_mn.shape[1]


def correlation_matrix(spec: CorrelationSpec) -> np.ndarray:
    """Exponential correlation ``[R]_{a,b} = rho^|a-b| e^{i (b-a) theta}``.

    The phase factor is the unit-modulus progression e^{i|a-b|theta} above the
    diagonal and its conjugate below it, which keeps R Hermitian PSD.
    """
    idx = np.arange(spec.size)
    diff = idx[None, :] - idx[:, None]
    dist = np.abs(diff)
    # 0 ** 0 == 1 keeps the diagonal at one when rho == 0
    mag = np.power(float(spec.rho), dist)
    return mag * np.exp(1j * diff * spec.theta)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """iid CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_rician(length: int, k_factor: float, los, rng) -> np.ndarray:
    """``sqrt(K/(K+1)) los + sqrt(1/(K+1)) g`` with ``g ~ CN(0, I)``."""
    if k_factor < 0:
        raise DomainError(f"Rician factor must be >= 0, got {k_factor}")
    los = np.asarray(los, dtype=complex)
    if los.shape != (length,):
        raise ShapeError(f"LOS vector has shape {los.shape}, expected ({length},)")
    if not np.allclose(np.abs(los), 1.0, atol=1e-9):
        raise DomainError("LOS entries must have unit modulus")
    rng = _generator(rng)
    g = complex_gaussian(rng, length)
    return np.sqrt(k_factor / (k_factor + 1.0)) * los + np.sqrt(1.0 / (k_factor + 1.0)) * g


def sample_correlated_rayleigh(
    m: int, n: int, row_spec: CorrelationSpec, col_spec: CorrelationSpec, rng
) -> np.ndarray:
    """Kronecker-correlated Rayleigh matrix, unit variance per entry."""
    if row_spec.size != m or col_spec.size != n:
        raise ShapeError(f"correlation sizes ({row_spec.size}, {col_spec.size}) != ({m}, {n})")
    s_m = psd_sqrt(correlation_matrix(row_spec))
    s_n = psd_sqrt(correlation_matrix(col_spec))
    return kronecker_draw(s_m, s_n, _generator(rng))


def kronecker_draw(s_m: np.ndarray, s_n: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # cov(vec H) = R_N (x) R_M with R_M = S_M S_M^H, R_N = S_N S_N^H
    g = complex_gaussian(rng, (s_m.shape[1], s_n.shape[1]))
    return s_m @ g @ s_n.T


def path_phase(distance: float, wavelength: float) -> float:
    """Deterministic propagation phase ``2 pi d / lambda`` [rad]."""
    if not wavelength > 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength}")
    if distance < 0:
        raise DomainError(f"distance must be >= 0, got {distance}")
    return 2.0 * np.pi * distance / wavelength


def steering_vector(size: int, angle: float, spacing_wl: float = 0.5) -> np.ndarray:
    """Unit-modulus linear-array response ``e^{i 2 pi d i sin(angle) / lambda}``.

    ``spacing_wl`` is the element spacing in wavelengths.
    """
    return np.exp(1j * 2.0 * np.pi * spacing_wl * np.arange(size) * np.sin(angle))


class ChannelModel:
    """Pre-factored channel statistics for one scenario.

    Holds the LOS vectors, Rician factors, correlation square roots and the
    deterministic phases so that each draw costs a handful of small matmuls.
    """

    def __init__(
        self,
        m: int,
        n: int,
        k1: float,
        k2: float,
        rho: float,
        theta: float,
        los_t: np.ndarray,
        los_r: np.ndarray,
        omega_k,
        omega_3: float,
    ):
        if k1 < 0 or k2 < 0:
            raise DomainError("Rician factors must be >= 0")
        self.m, self.n = m, n
        self.k1, self.k2 = float(k1), float(k2)
        self.rho, self.theta = float(rho), float(theta)
        self.los_t = np.atleast_2d(np.asarray(los_t, dtype=complex))
        self.los_r = np.asarray(los_r, dtype=complex)
        if self.los_t.shape[1] != m or self.los_r.shape != (n,):
            raise ShapeError("LOS vectors do not match (M, N)")
        self.omega_k = np.asarray(omega_k, dtype=float)
        self.omega_3 = float(omega_3)
        self.s_m = psd_sqrt(correlation_matrix(CorrelationSpec(rho, theta, m)))
        self.s_n = psd_sqrt(correlation_matrix(CorrelationSpec(rho, theta, n)))

    @property
    def n_users(self) -> int:
        return self.los_t.shape[0]

    def draw(self, rngs) -> ChannelRealization:
        """Draw one realization.

        ``rngs`` is either one ``numpy`` generator used for every link, or a
        mapping from link code (``Link.IRS_IRS``, ``Link.IRS_RX``,
        ``Link.USER + k``) to generator.
        """
        if isinstance(rngs, np.random.Generator):
            pick = lambda link: rngs  # noqa: E731
        else:
            pick = lambda link: rngs[link]  # noqa: E731
        h_t = np.stack(
            [
                sample_rician(self.m, self.k1, self.los_t[k], pick(Link.USER + k))
                for k in range(self.n_users)
            ]
        )
        h_mn = kronecker_draw(self.s_m, self.s_n, pick(Link.IRS_IRS))
        h_r = sample_rician(self.n, self.k2, self.los_r, pick(Link.IRS_RX))
        return ChannelRealization(h_t, h_mn, h_r, self.omega_k.copy(), self.omega_3)

    def draw_trial(self, seed: int, trial: int) -> ChannelRealization:
        """The realization of Monte-Carlo ``trial`` under master ``seed``."""
        links = [Link.IRS_IRS, Link.IRS_RX] + [Link.USER + k for k in range(self.n_users)]
        return self.draw({link: RngStream.for_trial(seed, trial, link).generator() for link in links})


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng
