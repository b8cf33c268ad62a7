"""Power-consumption models: satellite allocation, RIS hardware, UAV hover, total."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

from .errors import DomainError, StructuralError
from .units import dbm_to_watt


@dataclass(frozen=True)
class HoverParams:
    """Rotary-wing hover model parameters.

    Numeric defaults for ``rotor_solidity``, ``air_density`` and
    ``drag_coefficient`` are bound by symbol as printed in the parameter table
    (s = 0.05, rho = 0.02, delta = 0.05) even though the table's row labels
    disagree with the equation's symbol roles. ``weight`` and
    ``induced_correction`` have no published value; 20 N and 0.1 are local
    defaults.
    """

    rotor_solidity: float = 0.05
    air_density: float = 0.02
    drag_coefficient: float = 0.05
    disc_area: float = 0.503
    angular_velocity: float = 300.0
    rotor_radius: float = 0.4
    weight: float = 20.0
    induced_correction: float = 0.1

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"hover parameter {name} must be positive, got {value}")
        area = math.pi * self.rotor_radius ** 2
        if abs(self.disc_area - area) > 0.01 * area:
            warnings.warn(
                f"disc_area {self.disc_area} differs from pi*R^2 = {area:.4f} by more than 1%",
                stacklevel=2,
            )


@dataclass(frozen=True)
class PowerBreakdown:
    p_sat_alloc: float
    p_bdaris: float
    p_proc: float
    p_uav_hover: float

    @property
    def p_total(self) -> float:
        return self.p_sat_alloc + self.p_bdaris + self.p_proc + self.p_uav_hover

    def as_dict(self) -> dict:
        d = asdict(self)
        d["p_total"] = self.p_total
        return d


def bdaris_power(p_out: float, m: int, theta_ris: float, p_d: float, p_dc: float) -> float:
    """Group-connected active RIS consumption: amplifier output plus one
    phase-shift/bias stage per two-element group."""
    if m % 2:
        raise StructuralError(f"number of RIS elements must be even, got {m}")
    if min(p_out, p_d, p_dc) < 0:
        raise DomainError("powers must be non-negative")
    if theta_ris < 1:
        raise DomainError(f"theta_ris is a reciprocal efficiency and must be >= 1, got {theta_ris}")
    return theta_ris * p_out + 0.5 * m * (p_d + p_dc)


def ris_power(mode: str, p_out: float, m: int, theta_ris: float, p_d: float, p_dc: float) -> float:
    """Hardware consumption for each supported surface type.

    ``diag_active`` needs one amplifier chain per element; ``diag_passive``
    only pays for its phase shifters.
    """
    if mode == "bd_active":
        return bdaris_power(p_out, m, theta_ris, p_d, p_dc)
    if mode == "diag_active":
        return theta_ris * p_out + m * (p_d + p_dc)
    if mode == "diag_passive":
        return m * p_d
    raise DomainError(f"unknown RIS mode {mode!r}")


def hover_power(hp: HoverParams) -> float:
    blade = hp.drag_coefficient / 8.0 * hp.air_density * hp.rotor_solidity * hp.disc_area \
        * hp.angular_velocity ** 3 * hp.rotor_radius ** 3
    induced = (1.0 + hp.induced_correction) * hp.weight ** 1.5 / math.sqrt(2.0 * hp.air_density * hp.disc_area)
    return blade + induced


def total_power(action, p_s: float, p_out: float, cfg) -> PowerBreakdown:
    """Total consumption for one decoded action.

    Satellite power is the allocated share ``p_s * (a_c + sum a_i)``, not the cap.
    """
    alloc = p_s * (action.a_c + float(sum(action.a)))
    p_ris = ris_power(
        action.phi.mode,
        p_out,
        cfg.num_ris_elements,
        cfg.theta_ris,
        dbm_to_watt(cfg.p_circuit_dbm),
        dbm_to_watt(cfg.p_dc_dbm),
    )
    return PowerBreakdown(
        p_sat_alloc=alloc,
        p_bdaris=p_ris,
        p_proc=cfg.p_proc,
        p_uav_hover=hover_power(cfg.hover),
    )
