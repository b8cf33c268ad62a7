"""Geometry, large-scale gain, Rician fading and imperfect CSI for all links.

Link naming follows the downlink: ``h`` satellite -> user (I x N),
``g`` UAV/RIS -> user (I x M), ``H_u`` satellite -> RIS (M x N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.random import Generator

from .bessel import besselj_scaled
from .errors import DomainError
from .config import ScenarioConfig

HALF_POWER_CONSTANT = 2.07123
RICIAN_LOS_ONLY = 1e12


@dataclass
class ChannelSet:
    h: np.ndarray
    g: np.ndarray
    H_u: np.ndarray
    h_hat: np.ndarray
    g_hat: np.ndarray
    H_u_hat: np.ndarray
    # large-scale amplitudes, kept for diagnostics and observation scaling
    amp_h: np.ndarray
    amp_g: np.ndarray
    amp_u: float

    def estimated(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.h_hat, self.g_hat, self.H_u_hat


def satellite_gain(theta: float, theta_3db: float, g_max: float) -> float:
    """Satellite antenna gain toward a direction ``theta`` rad off boresight."""
    for v in (theta, theta_3db, g_max):
        if not math.isfinite(v):
            raise DomainError(f"satellite_gain inputs must be finite, got {v}")
    if theta_3db <= 0:
        raise DomainError("theta_3db must be positive")
    if g_max < 0:
        raise DomainError("g_max must be non-negative")
    if not 0 <= theta < math.pi / 2:
        raise DomainError(f"theta must lie in [0, pi/2), got {theta}")
    x = HALF_POWER_CONSTANT * math.sin(theta) / math.sin(theta_3db)
    # J1(x)/(2x) + 36 J3(x)/x^3 via the scaled forms, finite at x = 0
    pattern = 0.5 * besselj_scaled(1, x) + 36.0 * besselj_scaled(3, x)
    return g_max * pattern * pattern


def amplitude_path_gain(d: float, cfg: ScenarioConfig, g_tx: float, g_rx: float) -> float:
    """LoS amplitude ``sqrt(g_tx g_rx) (c / (4 pi f_c d))**l`` without the random phase."""
    if not (math.isfinite(d) and d > 0):
        raise DomainError(f"distance must be positive, got {d}")
    ratio = cfg.speed_of_light / (4.0 * math.pi * cfg.carrier_frequency * d)
    return math.sqrt(g_tx * g_rx) * ratio ** cfg.path_loss_exponent


def cscg(shape, rng: Generator, var: float = 1.0) -> np.ndarray:
    """Zero-mean circularly-symmetric complex Gaussian samples of variance ``var``."""
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_rician(los: np.ndarray, k: float, rng: Generator) -> np.ndarray:
    """Rician composite ``sqrt(K/(K+1)) los + sqrt(1/(K+1)) W`` with unit-variance W.

    The scatter term is always drawn so the stream position does not depend on K.
    """
    if not k >= 0:
        raise DomainError(f"Rician K must be non-negative, got {k}")
    los = np.asarray(los, dtype=complex)
    if not np.all(np.isfinite(los)):
        raise DomainError("LoS component must be finite")
    w = cscg(los.shape, rng)
    if k >= RICIAN_LOS_ONLY:
        return los.copy()
    return math.sqrt(k / (k + 1.0)) * los + math.sqrt(1.0 / (k + 1.0)) * w


def apply_csi_error(x: np.ndarray, var: float, rng: Generator) -> np.ndarray:
    """Channel estimate ``x_hat = x - dx`` with ``dx ~ CN(0, var)`` per entry."""
    if var < 0:
        raise DomainError(f"CSI error variance must be non-negative, got {var}")
    x = np.asarray(x, dtype=complex)
    return x - cscg(x.shape, rng, var)


def ura_shape(n: int) -> Tuple[int, int]:
    """Rows x columns of the most nearly square rectangular array with ``n`` elements."""
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def steering(n: int, direction: np.ndarray) -> np.ndarray:
    """Half-wavelength URA response in the horizontal plane toward a unit ``direction``."""
    rows, cols = ura_shape(n)
    my, mx = np.divmod(np.arange(n), cols)
    return np.exp(1j * math.pi * (mx * direction[0] + my * direction[1]))


def _unit(v: np.ndarray) -> Tuple[np.ndarray, float]:
    d = float(np.linalg.norm(v))
    return v / d, d


def positions(cfg: ScenarioConfig, uav_xy, users) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    sat = np.array([cfg.sat_ground_track[0], cfg.sat_ground_track[1], cfg.sat_altitude])
    uav = np.array([uav_xy[0], uav_xy[1], cfg.uav_altitude], dtype=float)
    usr = np.column_stack([np.asarray(users, dtype=float), np.zeros(len(users))])
    return sat, uav, usr


def off_boresight(sat: np.ndarray, target: np.ndarray) -> float:
    """Angle between the satellite's nadir boresight and the direction to ``target``."""
    u, _ = _unit(target - sat)
    return math.acos(min(1.0, max(-1.0, -u[2])))


def large_scale(cfg: ScenarioConfig, uav_xy, users) -> dict:
    """Distances, off-boresight angles and amplitudes of every link."""
    sat, uav, usr = positions(cfg, uav_xy, users)
    off = {k: 10.0 ** (v / 20.0) for k, v in cfg.link_gain_db.items()}
    out = {"dir_h": [], "dir_g": [], "amp_h": [], "amp_g": [], "d_h": [], "d_g": []}
    for p in usr:
        u, d = _unit(p - sat)
        gs = satellite_gain(off_boresight(sat, p), cfg.theta_3db, cfg.g_max)
        out["dir_h"].append(u)
        out["d_h"].append(d)
        out["amp_h"].append(amplitude_path_gain(d, cfg, gs, cfg.user_gain) * off["sat_user"])
        u, d = _unit(p - uav)
        out["dir_g"].append(u)
        out["d_g"].append(d)
        out["amp_g"].append(amplitude_path_gain(d, cfg, 1.0, cfg.user_gain) * off["uav_user"])
    u, d = _unit(uav - sat)
    gs = satellite_gain(off_boresight(sat, uav), cfg.theta_3db, cfg.g_max)
    out["dir_u"] = u
    out["d_u"] = d
    out["amp_u"] = amplitude_path_gain(d, cfg, gs, 1.0) * off["sat_uav"]
    for key in ("amp_h", "amp_g", "d_h", "d_g"):
        out[key] = np.array(out[key])
    return out


def check_uav_xy(cfg: ScenarioConfig, uav_xy) -> None:
    x, y = float(uav_xy[0]), float(uav_xy[1])
    if not (0.0 <= x <= cfg.x_max and 0.0 <= y <= cfg.y_max):
        raise DomainError(f"UAV position ({x}, {y}) outside [0, {cfg.x_max}] x [0, {cfg.y_max}]")


def build_channels(cfg: ScenarioConfig, uav_xy, rng: Generator, users=None) -> ChannelSet:
    """True and estimated channels for one coherence interval.

    Draw order is fixed (LoS phases, scatter for h, H_u, g, then CSI errors),
    so identical ``(cfg, uav_xy, users, rng state)`` give identical output and
    the true channels do not depend on the CSI error variance.
    """
    check_uav_xy(cfg, uav_xy)
    users = cfg.user_positions if users is None else users
    if users is None:
        raise DomainError("user positions must be given when the scenario draws them at random")
    n_u, n, m = cfg.num_users, cfg.num_sat_antennas, cfg.num_ris_elements
    ls = large_scale(cfg, uav_xy, users)

    phase = np.exp(1j * math.pi * rng.uniform(0.0, 2.0, size=2 * n_u + 1))
    los_h = np.stack([phase[i] * steering(n, ls["dir_h"][i]) for i in range(n_u)])
    los_u = phase[n_u] * np.outer(steering(m, ls["dir_u"]), steering(n, ls["dir_u"]).conj())
    los_g = np.stack([phase[n_u + 1 + i] * steering(m, ls["dir_g"][i]) for i in range(n_u)])

    amp_h, amp_g, amp_u = ls["amp_h"], ls["amp_g"], ls["amp_u"]
    var = cfg.csi_error_variance
    if cfg.scale_nlos_by_pathloss:
        s_h = sample_rician(los_h, cfg.k_sat_user, rng)
        s_u = sample_rician(los_u, cfg.k_sat_uav, rng)
        s_g = sample_rician(los_g, cfg.k_uav_user, rng)
        h, H_u, g = amp_h[:, None] * s_h, amp_u * s_u, amp_g[:, None] * s_g
        h_hat = amp_h[:, None] * apply_csi_error(s_h, var, rng)
        H_u_hat = amp_u * apply_csi_error(s_u, var, rng)
        g_hat = amp_g[:, None] * apply_csi_error(s_g, var, rng)
    else:
        h = sample_rician(amp_h[:, None] * los_h, cfg.k_sat_user, rng)
        H_u = sample_rician(amp_u * los_u, cfg.k_sat_uav, rng)
        g = sample_rician(amp_g[:, None] * los_g, cfg.k_uav_user, rng)
        h_hat = apply_csi_error(h, var, rng)
        H_u_hat = apply_csi_error(H_u, var, rng)
        g_hat = apply_csi_error(g, var, rng)
    return ChannelSet(h=h, g=g, H_u=H_u, h_hat=h_hat, g_hat=g_hat, H_u_hat=H_u_hat,
                      amp_h=amp_h, amp_g=amp_g, amp_u=amp_u)
