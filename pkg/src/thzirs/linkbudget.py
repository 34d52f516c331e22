"""Deterministic part of the three-hop THz link: geometry, antenna and RU
gains, free-space path loss, absorption and thermal noise.

Power is carried in watts throughout; configuration values given in dBm are
converted on the way in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelModel, path_phase, steering_vector
from .errors import ConfigValueError, DomainError, GeometryError
from .numerics import bessel_j1

Vec3 = tuple[float, float, float]


@dataclass
class ScenarioConfig:
    """Everything needed to build one cascaded-IRS scenario.

    Defaults describe the reference 18 x 18 setup. Quantities it leaves
    open (transmit power, receive antenna, efficiencies,
    IRS orientation, user placement) have documented defaults; see README.
    """

    frequency: float = 300e9  # Hz
    speed_of_light: float = 3e8  # m/s
    bandwidth: float = 2e9  # Hz
    tx_power_dbm: float = 80.0  # per user
    n_users: int = 2
    irs1_size: int = 18  # M
    irs2_size: int = 18  # N
    irs1_pos: Vec3 = (5.0, 10.0, 12.0)
    irs2_pos: Vec3 = (10.0, 10.0, 12.0)
    rx_pos: Vec3 = (20.0, 0.0, 5.0)
    r_t1: float = 3.0  # m, user 1 -> IRS1
    r_t2: float = 15.0  # m, user 2 -> IRS1
    user_height: float = 5.0
    # unit vectors IRS1 -> user k; None places users below IRS1 on the -y side
    user_directions: Optional[list] = None
    d_t: float = 0.12  # m, user dish diameter
    d_r: float = 0.12  # m, receiver dish diameter
    e_t: float = 1.0
    e_r: float = 1.0
    tx_offboresight: float = 0.0  # rad
    rx_offboresight: float = 0.0  # rad
    alpha: float = 1.0  # RU reflection magnitude
    k1: float = 10.0
    k2: float = 10.0
    rho: float = 0.9
    theta: Optional[float] = None  # correlation phase step; None -> IRS2 incidence angle
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 10.0
    absorption_coeff: float = 0.0  # 1/m
    los_mode: str = "ones"  # "ones" | "steering"
    element_spacing_wl: float = 0.5
    irs1_normal: Optional[Vec3] = None  # None -> bisector of the in/out rays
    irs2_normal: Optional[Vec3] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("irs1_pos", "irs2_pos", "rx_pos", "irs1_normal", "irs2_normal"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, tuple(float(x) for x in v))
        if self.user_directions is not None:
            self.user_directions = [[float(x) for x in d] for d in self.user_directions]
        self.validate()

    @property
    def wavelength(self) -> float:
        return self.speed_of_light / self.frequency

    @property
    def m(self) -> int:
        return self.irs1_size

    @property
    def n(self) -> int:
        return self.irs2_size

    @property
    def tx_power(self) -> float:
        """Per-user transmit power in watts."""
        return dbm_to_watt(self.tx_power_dbm)

    @property
    def user_distances(self) -> tuple[float, ...]:
        return (self.r_t1, self.r_t2)

    def validate(self) -> None:
        positive = (
            "frequency", "speed_of_light", "bandwidth", "r_t1", "r_t2",
            "d_t", "d_r", "irs1_size", "irs2_size",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigValueError(name, f"must be > 0, got {getattr(self, name)}")
        for name in ("e_t", "e_r", "alpha"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigValueError(name, f"must lie in (0, 1], got {v}")
        for name in ("k1", "k2", "absorption_coeff"):
            if getattr(self, name) < 0:
                raise ConfigValueError(name, f"must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.rho <= 1:
            raise ConfigValueError("rho", f"must lie in [0, 1], got {self.rho}")
        if self.n_users != 2:
            raise ConfigValueError("n_users", "only the two-user uplink is supported")
        if self.los_mode not in ("ones", "steering"):
            raise ConfigValueError("los_mode", f"must be 'ones' or 'steering', got {self.los_mode!r}")
        if self.user_directions is not None and len(self.user_directions) != self.n_users:
            raise ConfigValueError("user_directions", f"need one vector per user ({self.n_users})")
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigValueError("tx_power_dbm", "must be finite")

    def with_ratio(self, ratio: float) -> "ScenarioConfig":
        """Copy with ``r_t1 = ratio * r_t2``."""
        if not 0 < ratio <= 1:
            raise DomainError(f"distance ratio must lie in (0, 1], got {ratio}")
        return self.replace(r_t1=ratio * self.r_t2)

    def replace(self, **changes) -> "ScenarioConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ScenarioConfig(**values)


@dataclass(frozen=True)
class Geometry:
    r_t: tuple[float, ...]  # per user
    r_2: float
    r_3: float
    theta_i1: tuple[float, ...]  # per user, incidence at IRS1
    theta_r1: float
    theta_i2: float
    theta_r2: float


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise GeometryError(f"{what} has zero length")
    return v / norm


def _angle(ray: np.ndarray, normal: np.ndarray) -> float:
    c = float(np.clip(np.dot(ray, normal), -1.0, 1.0))
    # rays arriving from behind the surface are clamped to grazing incidence
    return min(math.acos(c), math.pi / 2)


def default_user_directions(cfg: ScenarioConfig) -> list[np.ndarray]:
    """IRS1 -> user unit vectors when none are configured.

    Users sit on the -y side of IRS1; the elevation is chosen so that a user at
    distance ``r_t2`` stands at ``user_height`` (falls back to straight down
    when ``r_t2`` is shorter than the height difference).
    """
    dz = cfg.irs1_pos[2] - cfg.user_height
    horiz = math.sqrt(max(cfg.r_t2**2 - dz**2, 0.0))
    d = _unit((0.0, -horiz, -dz) if (horiz or dz) else (0.0, -1.0, 0.0), "user direction")
    return [d] * cfg.n_users


def derive_geometry(cfg: ScenarioConfig) -> Geometry:
    """Distances and incidence/reflection angles for the configured layout."""
    p1 = np.asarray(cfg.irs1_pos)
    p2 = np.asarray(cfg.irs2_pos)
    prx = np.asarray(cfg.rx_pos)
    r_2 = float(np.linalg.norm(p2 - p1))
    r_3 = float(np.linalg.norm(prx - p2))
    if r_2 == 0 or r_3 == 0:
        raise GeometryError("IRS1, IRS2 and Rx must be distinct points")
    to_users = (
        [_unit(d, "user direction") for d in cfg.user_directions]
        if cfg.user_directions is not None
        else default_user_directions(cfg)
    )
    to_irs2 = (p2 - p1) / r_2
    to_irs1 = -to_irs2
    to_rx = (prx - p2) / r_3

    if cfg.irs1_normal is not None:
        n1 = _unit(cfg.irs1_normal, "irs1_normal")
    else:
        n1 = _unit(_unit(sum(to_users), "mean user direction") + to_irs2, "IRS1 bisector")
    if cfg.irs2_normal is not None:
        n2 = _unit(cfg.irs2_normal, "irs2_normal")
    else:
        n2 = _unit(to_irs1 + to_rx, "IRS2 bisector")

    return Geometry(
        r_t=tuple(float(r) for r in cfg.user_distances),
        r_2=r_2,
        r_3=r_3,
        theta_i1=tuple(_angle(u, n1) for u in to_users),
        theta_r1=_angle(to_irs2, n1),
        theta_i2=_angle(to_irs1, n2),
        theta_r2=_angle(to_rx, n2),
    )


def antenna_gain(angle_off_boresight: float, diameter: float, efficiency: float, wavelength: float) -> float:
    """Parabolic-dish power gain ``e (pi D / lambda)^2 [2 J1(x) / x]^2``.

    ``x = pi D sin(o) / lambda``. The pattern is the squared, boresight-normalised
    Airy response, so it is never negative and equals ``e (pi D / lambda)^2``
    at ``o = 0``.
    """
    if not math.isfinite(angle_off_boresight):
        raise DomainError(f"angle must be finite, got {angle_off_boresight}")
    if not (diameter > 0 and wavelength > 0):
        raise DomainError("diameter and wavelength must be > 0")
    if not 0 < efficiency <= 1:
        raise DomainError(f"efficiency must lie in (0, 1], got {efficiency}")
    peak = efficiency * (math.pi * diameter / wavelength) ** 2
    x = math.pi * diameter * math.sin(angle_off_boresight) / wavelength
    if abs(x) < 1e-8:
        return peak
    return peak * (2.0 * bessel_j1(x) / x) ** 2


def ru_gain(theta: float) -> float:
    """Gain of one reflecting unit, ``4 cos(theta)`` for theta in [0, pi/2]."""
    if not (-1e-12 <= theta <= math.pi / 2 + 1e-12):
        raise DomainError(f"RU angle must lie in [0, pi/2], got {theta}")
    return max(4.0 * math.cos(theta), 0.0)


def fspl_product(wavelength: float, gains: Sequence[float], distances: Sequence[float]) -> float:
    """``(lambda/4pi)^(2 hops) * prod(gains) / prod(d^2)`` over the given hops."""
    out = (wavelength / (4 * math.pi)) ** (2 * len(distances))
    for g in gains:
        out *= g
    for d in distances:
        if not d > 0:
            raise DomainError(f"distance must be > 0, got {d}")
        out /= d * d
    return out


def fspl_total(geom: Geometry, cfg: ScenarioConfig, user: int) -> float:
    """Three-hop free-space factor including both dish gains and four RU gains."""
    lam = cfg.wavelength
    g_t = antenna_gain(cfg.tx_offboresight, cfg.d_t, cfg.e_t, lam)
    g_r = antenna_gain(cfg.rx_offboresight, cfg.d_r, cfg.e_r, lam)
    gains = (
        g_t,
        ru_gain(geom.theta_i1[user]),
        ru_gain(geom.theta_r1),
        ru_gain(geom.theta_i2),
        ru_gain(geom.theta_r2),
        g_r,
    )
    return fspl_product(lam, gains, (geom.r_t[user], geom.r_2, geom.r_3))


def absorption_loss(kappa: float, total_path: float) -> float:
    """Molecular absorption factor ``exp(-kappa d)``."""
    if kappa < 0 or total_path < 0:
        raise DomainError("kappa and path length must be >= 0")
    return math.exp(-kappa * total_path)


def total_loss(geom: Geometry, cfg: ScenarioConfig, user: int) -> float:
    path = geom.r_t[user] + geom.r_2 + geom.r_3
    return fspl_total(geom, cfg, user) * absorption_loss(cfg.absorption_coeff, path)


def noise_power(noise_psd: float, bandwidth: float, noise_figure: float) -> float:
    """Thermal noise power in watts from a PSD in dBm/Hz and a noise figure in dB.

    For -174 dBm/Hz over 2 GHz with a 10 dB noise figure this is 7.9621e-11 W.
    """
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be > 0, got {bandwidth}")
    return dbm_to_watt(noise_psd + 10.0 * math.log10(bandwidth) + noise_figure)


@dataclass
class LinkBudget:
    """Per-scenario deterministic quantities, computed once."""

    cfg: ScenarioConfig
    geometry: Geometry
    losses: np.ndarray  # (K,) linear L_tau,k
    noise: float  # W
    tx_power: float  # W
    omega_k: np.ndarray
    omega_3: float
    corr_theta: float
    channel: ChannelModel = field(repr=False)

    @property
    def alpha(self) -> float:
        return self.cfg.alpha


def build_link_budget(cfg: ScenarioConfig) -> LinkBudget:
    geom = derive_geometry(cfg)
    lam = cfg.wavelength
    losses = np.array([total_loss(geom, cfg, k) for k in range(cfg.n_users)])
    omega_k = np.array([path_phase(r, lam) for r in geom.r_t])
    omega_3 = path_phase(geom.r_3, lam)
    corr_theta = geom.theta_i2 if cfg.theta is None else float(cfg.theta)
    if cfg.los_mode == "ones":
        los_t = np.ones((cfg.n_users, cfg.m), dtype=complex)
        los_r = np.ones(cfg.n, dtype=complex)
    else:
        los_t = np.stack([steering_vector(cfg.m, a, cfg.element_spacing_wl) for a in geom.theta_i1])
        los_r = steering_vector(cfg.n, geom.theta_r2, cfg.element_spacing_wl)
    model = ChannelModel(
        cfg.m, cfg.n, cfg.k1, cfg.k2, cfg.rho, corr_theta, los_t, los_r, omega_k, omega_3
    )
    return LinkBudget(
        cfg=cfg,
        geometry=geom,
        losses=losses,
        noise=noise_power(cfg.noise_psd_dbm_hz, cfg.bandwidth, cfg.noise_figure_db),
        tx_power=cfg.tx_power,
        omega_k=omega_k,
        omega_3=omega_3,
        corr_theta=corr_theta,
        channel=model,
    )
