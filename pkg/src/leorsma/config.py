"""Scenario configuration.

Defaults reproduce the published simulation table. :func:`desk_scenario`
returns the scaled-down calibrated scenario used for training experiments.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .errors import SchemaError
from .power import HoverParams
from .units import db_to_linear, dbm_to_watt

RIS_MODES = ("bd_active", "diag_active", "diag_passive")
LINK_CLASSES = ("sat_user", "sat_uav", "uav_user")


@dataclass(frozen=True)
class ScenarioConfig:
    # propagation
    carrier_frequency: float = 8e9
    speed_of_light: float = 3e8
    path_loss_exponent: float = 2.0
    sat_altitude: float = 520e3
    uav_altitude: float = 10e3
    sat_ground_track: tuple = (0.0, 0.0)
    # None -> users drawn uniformly in the service box at every reset
    user_positions: Optional[tuple] = None
    num_users: int = 3
    num_sat_antennas: int = 32
    num_ris_elements: int = 64
    k_sat_user: float = 10.0
    k_sat_uav: float = 10.0
    k_uav_user: float = 5.0
    g_max_dbi: float = 6.6
    theta_3db: float = math.radians(1.0)
    user_gain_dbi: float = 0.0
    # extra per-link-class gain (antenna apertures, calibration); 0 dB = plain free space
    link_gain_db: dict = field(default_factory=lambda: {k: 0.0 for k in LINK_CLASSES})
    # True: large-scale amplitude multiplies the whole Rician composite and the
    # CSI error is relative to it. False: unit-variance scatter added to a
    # path-loss-scaled LoS term, CSI error absolute.
    scale_nlos_by_pathloss: bool = True
    noise_power: float = 1e-10
    csi_error_variance: float = 1e-2
    bandwidth: float = 5e6
    x_max: float = 5e3
    y_max: float = 5e3
    # power budget and QoS
    p_sat_max_dbm: float = 56.0
    p_s_dbm: Optional[float] = None
    p_ris_max_dbm: float = 33.0
    gamma_min_common: float = 0.01
    gamma_min_private: float = 0.01
    theta_ris: float = 1.25
    p_circuit_dbm: float = -10.0
    p_dc_dbm: float = -5.0
    p_proc: float = 3.0
    hover: HoverParams = field(default_factory=HoverParams)
    # surface
    ris_mode: str = "bd_active"
    a_max: float = 4.0
    complex_coupling: bool = True
    # decision process
    penalty_lambda: float = 1.0
    reward_scale: float = 1.0
    horizon: int = 200
    block_fading: bool = True
    learn_delta: bool = False
    obs_include_uav: bool = False

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise SchemaError("invalid scenario: " + "; ".join(errors))

    def validate(self) -> list:
        errs = []
        if self.num_ris_elements % 2 or self.num_ris_elements < 2:
            errs.append(f"num_ris_elements must be a positive even number, got {self.num_ris_elements}")
        if self.num_users < 1:
            errs.append("num_users must be >= 1")
        if self.num_sat_antennas < 1:
            errs.append("num_sat_antennas must be >= 1")
        for name in ("carrier_frequency", "speed_of_light", "sat_altitude", "uav_altitude",
                     "noise_power", "bandwidth", "x_max", "y_max", "theta_3db", "a_max",
                     "gamma_min_common", "gamma_min_private"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                errs.append(f"{name} must be positive and finite, got {v}")
        for name in ("path_loss_exponent", "csi_error_variance", "k_sat_user", "k_sat_uav",
                     "k_uav_user", "penalty_lambda", "p_proc"):
            v = getattr(self, name)
            if not (v >= 0):
                errs.append(f"{name} must be non-negative, got {v}")
        if self.uav_altitude >= self.sat_altitude:
            errs.append("uav_altitude must be below sat_altitude")
        if self.ris_mode not in RIS_MODES:
            errs.append(f"ris_mode must be one of {RIS_MODES}, got {self.ris_mode!r}")
        if set(self.link_gain_db) != set(LINK_CLASSES):
            errs.append(f"link_gain_db keys must be {LINK_CLASSES}")
        if self.user_positions is not None and len(self.user_positions) != self.num_users:
            errs.append("user_positions length must equal num_users")
        if self.horizon < 1:
            errs.append("horizon must be >= 1")
        return errs

    @property
    def p_s(self) -> float:
        """Satellite transmit power scaling the allocation coefficients (W)."""
        return dbm_to_watt(self.p_sat_max_dbm if self.p_s_dbm is None else self.p_s_dbm)

    @property
    def p_sat_max(self) -> float:
        return dbm_to_watt(self.p_sat_max_dbm)

    @property
    def p_ris_max(self) -> float:
        return dbm_to_watt(self.p_ris_max_dbm)

    @property
    def g_max(self) -> float:
        return db_to_linear(self.g_max_dbi)

    @property
    def user_gain(self) -> float:
        return db_to_linear(self.user_gain_dbi)

    @property
    def wavelength(self) -> float:
        return self.speed_of_light / self.carrier_frequency

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sat_ground_track"] = list(self.sat_ground_track)
        if self.user_positions is not None:
            d["user_positions"] = [list(p) for p in self.user_positions]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaError(f"unknown scenario keys: {unknown}")
        data = dict(data)
        if "hover" in data and isinstance(data["hover"], dict):
            data["hover"] = HoverParams(**data["hover"])
        if "sat_ground_track" in data:
            data["sat_ground_track"] = tuple(data["sat_ground_track"])
        if data.get("user_positions") is not None:
            data["user_positions"] = tuple(tuple(p) for p in data["user_positions"])
        if "link_gain_db" in data:
            base = {k: 0.0 for k in LINK_CLASSES}
            base.update(data["link_gain_db"])
            data["link_gain_db"] = base
        return cls(**data)


def desk_scenario(**overrides) -> ScenarioConfig:
    """Scaled-down scenario that trains in minutes on one CPU core.

    Free-space amplitude law (exponent 1) plus per-link aperture gains place
    the direct link near 0 dB SNR at 40 dBm and make the amplified RIS path
    comparable to the direct one while the 33 dBm output cap binds.
    """
    base = dict(
        num_users=2,
        num_sat_antennas=8,
        num_ris_elements=8,
        user_positions=((1500.0, 3000.0), (3500.0, 1500.0)),
        path_loss_exponent=1.0,
        link_gain_db={"sat_user": 40.0, "sat_uav": 110.0, "uav_user": 48.0},
        reward_scale=1000.0,
        horizon=200,
    )
    base.update(overrides)
    return ScenarioConfig(**base)
