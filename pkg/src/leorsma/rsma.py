"""RSMA equivalent channels, SINRs, achievable rates and energy efficiency."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .bdris import BdRisMatrix
from .errors import DomainError, StructuralError

UNIT_NORM_TOL = 1e-9


@dataclass
class RsmaAction:
    """Decoded decision variables for one transmission interval."""

    a_c: float
    a: np.ndarray
    w_c: np.ndarray
    w: List[np.ndarray]
    phi: BdRisMatrix
    uav_xy: Tuple[float, float]
    delta: np.ndarray

    def check(self) -> List[str]:
        """Return human-readable invariant violations (empty when valid)."""
        problems = []
        coeffs = np.concatenate([[self.a_c], self.a])
        if np.any(coeffs < 0) or np.any(coeffs > 1):
            problems.append("power coefficient outside [0, 1]")
        if coeffs.sum() > 1 + 1e-12:
            problems.append("power coefficients sum above 1")
        for v in [self.w_c] + list(self.w):
            if not abs(np.linalg.norm(v) - 1) <= UNIT_NORM_TOL:
                problems.append("beamformer is not unit norm")
                break
        if abs(np.sum(self.delta) - 1) > 1e-9 or np.any(self.delta < 0):
            problems.append("common-rate split is not on the simplex")
        return problems

    @property
    def beams(self) -> np.ndarray:
        """N x (I+1) matrix with columns ``[w_c, w_1, ..., w_I]``."""
        return np.column_stack([self.w_c] + list(self.w))


@dataclass
class LinkReport:
    sinr_common: np.ndarray
    sinr_private: np.ndarray
    r_c: float
    r_private: np.ndarray
    r_total: np.ndarray
    sum_rate: float
    ee: float = 0.0
    ee_scaled: float = 0.0

    def as_dict(self) -> dict:
        return {
            "sinr_common": self.sinr_common.tolist(),
            "sinr_private": self.sinr_private.tolist(),
            "r_c": self.r_c,
            "r_private": self.r_private.tolist(),
            "r_total": self.r_total.tolist(),
            "sum_rate": self.sum_rate,
            "ee": self.ee,
            "ee_scaled": self.ee_scaled,
        }


def equivalent_channel(h_i: np.ndarray, g_i: np.ndarray, phi: np.ndarray, h_u: np.ndarray) -> np.ndarray:
    """Row vector ``h_i^H + g_i^H Phi H_u`` seen by one user."""
    h_i, g_i = np.asarray(h_i), np.asarray(g_i)
    m, n = h_u.shape
    if h_i.shape != (n,) or g_i.shape != (m,) or phi.shape != (m, m):
        raise StructuralError(
            f"inconsistent shapes h {h_i.shape}, g {g_i.shape}, Phi {phi.shape}, H_u {h_u.shape}"
        )
    return h_i.conj() + g_i.conj() @ phi @ h_u


def equivalent_channels(h: np.ndarray, g: np.ndarray, phi: np.ndarray, h_u: np.ndarray) -> np.ndarray:
    """All users at once: I x N matrix whose rows are the equivalent channels."""
    if h.shape[0] != g.shape[0] or phi.shape != (h_u.shape[0],) * 2 or h.shape[1] != h_u.shape[1]:
        raise StructuralError("inconsistent channel dimensions")
    return h.conj() + g.conj() @ phi @ h_u


def _gains(heq: np.ndarray, action: RsmaAction) -> np.ndarray:
    # |H_eq,i w_k|^2 for every user i and stream k = (common, 1..I)
    return np.abs(heq @ action.beams) ** 2


def _check_noise(p_s: float, sigma2: float) -> None:
    if not sigma2 > 0:
        raise DomainError(f"noise power must be positive, got {sigma2}")
    if p_s < 0:
        raise DomainError(f"transmit power must be non-negative, got {p_s}")


def sinr_common(i: int, heq: np.ndarray, action: RsmaAction, p_s: float, sigma2: float) -> float:
    """Common-stream SINR at user ``i``; every private stream is interference."""
    _check_noise(p_s, sigma2)
    gains = _gains(heq[i:i + 1], action)[0]
    interference = p_s * float(np.dot(action.a, gains[1:]))
    return p_s * action.a_c * gains[0] / (interference + sigma2)


def sinr_private(i: int, heq: np.ndarray, action: RsmaAction, p_s: float, sigma2: float) -> float:
    """Private-stream SINR at user ``i`` after the common stream is cancelled."""
    _check_noise(p_s, sigma2)
    gains = _gains(heq[i:i + 1], action)[0, 1:]
    a = np.asarray(action.a, dtype=float)
    own = p_s * a[i] * gains[i]
    interference = p_s * float(np.dot(a, gains)) - own
    return own / (max(interference, 0.0) + sigma2)


def sinrs(heq: np.ndarray, action: RsmaAction, p_s: float, sigma2: float) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized common and private SINRs for all users."""
    _check_noise(p_s, sigma2)
    gains = _gains(heq, action)
    a = np.asarray(action.a, dtype=float)
    private_rx = p_s * gains[:, 1:] * a[None, :]
    total_private = private_rx.sum(axis=1)
    common = p_s * action.a_c * gains[:, 0] / (total_private + sigma2)
    own = np.diag(private_rx)
    private = own / (np.maximum(total_private - own, 0.0) + sigma2)
    return common, private


def rates_from_sinr(sinr_c: np.ndarray, sinr_p: np.ndarray, delta: np.ndarray) -> LinkReport:
    r_ci = np.log2(1.0 + np.asarray(sinr_c, dtype=float))
    r_c = float(r_ci.min())
    r_p = np.log2(1.0 + np.asarray(sinr_p, dtype=float))
    r_total = r_p + np.asarray(delta, dtype=float) * r_c
    return LinkReport(
        sinr_common=np.asarray(sinr_c, dtype=float),
        sinr_private=np.asarray(sinr_p, dtype=float),
        r_c=r_c,
        r_private=r_p,
        r_total=r_total,
        sum_rate=float(r_c + r_p.sum()),
    )


def rates(heq: np.ndarray, action: RsmaAction, p_s: float, sigma2: float) -> LinkReport:
    """Common rate limited by the worst user; per-user totals include the common share."""
    c, p = sinrs(heq, action, p_s, sigma2)
    return rates_from_sinr(c, p, action.delta)


def energy_efficiency(report: LinkReport, p_total: float, bandwidth: float = 1.0, scaled: bool = False) -> float:
    """Sum rate over total power: bit/J/Hz, or bit/J when ``scaled``."""
    if not p_total > 0:
        raise DomainError(f"total power must be positive, got {p_total}")
    ee = report.sum_rate / p_total
    return ee * bandwidth if scaled else ee
