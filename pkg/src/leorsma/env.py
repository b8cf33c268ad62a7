"""Constrained MDP around the RSMA link: observation encoding, action decoding,
constraint violations, penalized reward and the reset/step lifecycle.

Seeding: ``reset(seed)`` builds ``SeedSequence(seed)``; user positions come
from spawn key ``(0,)`` and the channel draws of interval ``t`` from spawn key
``(1, t)`` (``(1, 0)`` for every step when block fading is off).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bdris import (BdRisMatrix, max_singular_value, project_block, project_diag,
                    ris_output_power, symmetry_defect)
from .channel import ChannelSet, build_channels, large_scale
from .config import ScenarioConfig
from .errors import DomainError, LifecycleError, StructuralError
from .power import total_power
from .rsma import RsmaAction, energy_efficiency, equivalent_channels, rates_from_sinr, sinrs

ZERO_TOL = 1e-12


@dataclass
class ViolationVector:
    """Normalized non-negative gap for every constraint of the EE problem."""

    common_sinr: float
    private_sinr: np.ndarray
    sat_power: float
    ris_power: float
    simplex: float
    coeff_range: float
    symmetry: float
    spectral: float
    uav_x: float
    uav_y: float

    def names(self) -> List[str]:
        priv = [f"private_sinr_{i}" for i in range(len(self.private_sinr))]
        return ["common_sinr"] + priv + ["sat_power", "ris_power", "simplex", "coeff_range",
                                         "symmetry", "spectral", "uav_x", "uav_y"]

    def values(self) -> np.ndarray:
        return np.concatenate([[self.common_sinr], self.private_sinr,
                               [self.sat_power, self.ris_power, self.simplex, self.coeff_range,
                                self.symmetry, self.spectral, self.uav_x, self.uav_y]])

    def total(self) -> float:
        return float(self.values().sum())

    def satisfied(self) -> bool:
        return not np.any(self.values() > 0)

    def as_dict(self) -> dict:
        return dict(zip(self.names(), self.values().tolist()))


@dataclass
class Transition:
    obs: np.ndarray
    raw_action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool
    info: dict = field(default_factory=dict)


def _gap(x: float) -> float:
    return x if x > ZERO_TOL else 0.0


def action_dim(cfg: ScenarioConfig) -> int:
    i, n, m = cfg.num_users, cfg.num_sat_antennas, cfg.num_ris_elements
    return (i + 1) + 2 * n * (i + 1) + 6 * (m // 2) + 2 + (i if cfg.learn_delta else 0)


def obs_dim(cfg: ScenarioConfig) -> int:
    i, n, m = cfg.num_users, cfg.num_sat_antennas, cfg.num_ris_elements
    return 2 * (i * n + m * n + i * m) + (2 if cfg.obs_include_uav else 0)


def decode_action(raw: np.ndarray, cfg: ScenarioConfig) -> RsmaAction:
    """Map a raw vector in ``[-1, 1]^d`` onto the feasible decision set.

    Layout: ``I+1`` power entries, ``I+1`` beamformers as (real N, imag N)
    pairs, six reals per RIS group ``(re phi1, im phi1, re phi2, im phi2,
    re b, im b)``, UAV ``(x, y)``, then ``I`` split logits when learned.
    Diagonal surface modes read the two ``phi`` entries of each group and
    ignore the coupling pair, so all modes share one action space.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (action_dim(cfg),):
        raise StructuralError(f"expected action of length {action_dim(cfg)}, got shape {raw.shape}")
    raw = np.clip(raw, -1.0, 1.0)
    n_u, n, m = cfg.num_users, cfg.num_sat_antennas, cfg.num_ris_elements
    pos = 0

    v = 0.5 * (raw[pos:pos + n_u + 1] + 1.0)
    pos += n_u + 1
    total = v.sum()
    if total > 1.0:
        v = v / total

    beams = []
    for _ in range(n_u + 1):
        w = raw[pos:pos + n] + 1j * raw[pos + n:pos + 2 * n]
        pos += 2 * n
        peak = np.max(np.abs(w))
        if peak == 0.0:
            w = np.zeros(n, dtype=complex)
            w[0] = 1.0
        else:
            # exact power-of-two rescale first, so tiny entries do not underflow when squared
            shift = int(np.frexp(peak)[1])
            w = np.ldexp(w.real, -shift) + 1j * np.ldexp(w.imag, -shift)
            w = w / np.linalg.norm(w)
        beams.append(w)

    groups = raw[pos:pos + 3 * m].reshape(m // 2, 6)
    pos += 3 * m
    phi1 = groups[:, 0] + 1j * groups[:, 1]
    phi2 = groups[:, 2] + 1j * groups[:, 3]
    if cfg.ris_mode == "bd_active":
        b = groups[:, 4] + 1j * groups[:, 5] if cfg.complex_coupling else groups[:, 4] + 0j
        blocks = np.empty((m // 2, 2, 2), dtype=complex)
        blocks[:, 0, 0], blocks[:, 1, 1] = phi1, phi2
        blocks[:, 0, 1] = blocks[:, 1, 0] = b
        blocks = np.stack([project_block(cfg.a_max * blk, cfg.a_max) for blk in blocks])
        phi = BdRisMatrix("bd_active", blocks, cfg.a_max)
    else:
        bound = 1.0 if cfg.ris_mode == "diag_passive" else cfg.a_max
        diag = np.empty(m, dtype=complex)
        diag[0::2], diag[1::2] = phi1, phi2
        phi = BdRisMatrix(cfg.ris_mode, project_diag(bound * diag, bound), cfg.a_max)

    x = 0.5 * (raw[pos] + 1.0) * cfg.x_max
    y = 0.5 * (raw[pos + 1] + 1.0) * cfg.y_max
    pos += 2

    if cfg.learn_delta:
        logits = raw[pos:pos + n_u]
        e = np.exp(logits - logits.max())
        delta = e / e.sum()
    else:
        delta = np.full(n_u, 1.0 / n_u)

    return RsmaAction(a_c=float(v[0]), a=v[1:].copy(), w_c=beams[0], w=beams[1:], phi=phi,
                      uav_xy=(float(x), float(y)), delta=delta)


def violations(action: RsmaAction, channels: ChannelSet, cfg: ScenarioConfig,
               sinr_c: Optional[np.ndarray] = None, sinr_p: Optional[np.ndarray] = None,
               p_out: Optional[float] = None) -> ViolationVector:
    """Constraint gaps measured on the true channels, each relative to its threshold."""
    if sinr_c is None or sinr_p is None:
        heq = equivalent_channels(channels.h, channels.g, action.phi.matrix(), channels.H_u)
        sinr_c, sinr_p = sinrs(heq, action, cfg.p_s, cfg.noise_power)
    if p_out is None:
        p_out = ris_output_power(action.phi, channels.H_u, action, cfg.p_s)
    coeffs = np.concatenate([[action.a_c], action.a])
    gc, gp = cfg.gamma_min_common, cfg.gamma_min_private
    bound = action.phi.bound()
    x, y = action.uav_xy
    return ViolationVector(
        common_sinr=_gap((gc - float(np.min(sinr_c))) / gc),
        private_sinr=np.array([_gap((gp - s) / gp) for s in sinr_p]),
        sat_power=_gap((cfg.p_s * coeffs.sum() - cfg.p_sat_max) / cfg.p_sat_max),
        ris_power=_gap((p_out - cfg.p_ris_max) / cfg.p_ris_max),
        simplex=_gap(coeffs.sum() - 1.0),
        coeff_range=_gap(float(np.sum(np.maximum(0.0, -coeffs) + np.maximum(0.0, coeffs - 1.0)))),
        symmetry=_gap(symmetry_defect(action.phi) / bound),
        spectral=_gap((max_singular_value(action.phi) - bound) / bound),
        uav_x=_gap(max(-x, x - cfg.x_max) / cfg.x_max),
        uav_y=_gap(max(-y, y - cfg.y_max) / cfg.y_max),
    )


def reward(ee: float, psi: ViolationVector, lam: float, scale: float = 1.0) -> float:
    """Penalized reward ``scale * ee / (1 + lam * sum(psi))``."""
    if lam < 0:
        raise DomainError(f"penalty factor must be non-negative, got {lam}")
    return scale * ee / (1.0 + lam * psi.total())


def encode_observation(channels: ChannelSet, scales=(1.0, 1.0, 1.0), uav_xy=None, cfg=None) -> np.ndarray:
    """Flatten estimated ``h``, ``H_u``, ``g`` into interleaved real/imag parts."""
    parts = [channels.h_hat / scales[0], channels.H_u_hat / scales[1], channels.g_hat / scales[2]]
    flat = np.concatenate([p.ravel() for p in parts])
    out = np.empty(2 * flat.size)
    out[0::2], out[1::2] = flat.real, flat.imag
    if uav_xy is not None:
        out = np.concatenate([out, [2 * uav_xy[0] / cfg.x_max - 1, 2 * uav_xy[1] / cfg.y_max - 1]])
    return out


def evaluate_action(action: RsmaAction, channels: ChannelSet, cfg: ScenarioConfig) -> dict:
    """Rates, power, EE, violations and reward of a decoded action on true channels."""
    heq = equivalent_channels(channels.h, channels.g, action.phi.matrix(), channels.H_u)
    sc, sp = sinrs(heq, action, cfg.p_s, cfg.noise_power)
    report = rates_from_sinr(sc, sp, action.delta)
    p_out = ris_output_power(action.phi, channels.H_u, action, cfg.p_s)
    power = total_power(action, cfg.p_s, p_out, cfg)
    report.ee = energy_efficiency(report, power.p_total)
    report.ee_scaled = energy_efficiency(report, power.p_total, cfg.bandwidth, scaled=True)
    psi = violations(action, channels, cfg, sc, sp, p_out)
    r = reward(report.ee, psi, cfg.penalty_lambda, cfg.reward_scale)
    return {"report": report, "power": power, "psi": psi, "p_out": p_out, "reward": r}


class RsmaEnv:
    """Episodic environment; one instance per caller."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.obs_dim = obs_dim(cfg)
        self.act_dim = action_dim(cfg)
        self._seq: Optional[np.random.SeedSequence] = None
        self.t = 0
        self.done = True
        self.users = None
        self.uav_xy = (0.5 * cfg.x_max, 0.5 * cfg.y_max)
        self._obs: Optional[np.ndarray] = None
        self._scales = (1.0, 1.0, 1.0)

    def _rng(self, t: int) -> np.random.Generator:
        key = (1, t if self.cfg.block_fading else 0)
        return np.random.default_rng(np.random.SeedSequence(self._seq.entropy, spawn_key=key))

    def _reference_scales(self):
        if not self.cfg.scale_nlos_by_pathloss:
            return (1.0, 1.0, 1.0)
        center = (0.5 * self.cfg.x_max, 0.5 * self.cfg.y_max)
        ls = large_scale(self.cfg, center, [center])
        return (float(ls["amp_h"][0]), float(ls["amp_u"]), float(ls["amp_g"][0]))

    def channels(self, uav_xy=None, t=None) -> ChannelSet:
        """Channels of interval ``t`` (default: current) with the UAV at ``uav_xy``."""
        if self._seq is None:
            raise LifecycleError("environment must be reset first")
        uav_xy = self.uav_xy if uav_xy is None else uav_xy
        return build_channels(self.cfg, uav_xy, self._rng(self.t if t is None else t), self.users)

    def _observe(self) -> np.ndarray:
        ch = self.channels()
        return encode_observation(ch, self._scales, self.uav_xy if self.cfg.obs_include_uav else None, self.cfg)

    def reset(self, seed: int) -> np.ndarray:
        cfg = self.cfg
        self._seq = np.random.SeedSequence(int(seed))
        if cfg.user_positions is None:
            urng = np.random.default_rng(np.random.SeedSequence(self._seq.entropy, spawn_key=(0,)))
            self.users = np.column_stack([urng.uniform(0, cfg.x_max, cfg.num_users),
                                          urng.uniform(0, cfg.y_max, cfg.num_users)])
        else:
            self.users = np.asarray(cfg.user_positions, dtype=float)
        self.uav_xy = (0.5 * cfg.x_max, 0.5 * cfg.y_max)
        self._scales = self._reference_scales()
        self.t = 0
        self.done = False
        self._obs = self._observe()
        return self._obs.copy()

    def step(self, raw_action: np.ndarray) -> Transition:
        if self._seq is None:
            raise LifecycleError("step() called before reset()")
        if self.done:
            raise LifecycleError("episode finished; call reset()")
        raw = np.clip(np.asarray(raw_action, dtype=float), -1.0, 1.0)
        action = decode_action(raw, self.cfg)
        ch = self.channels(uav_xy=action.uav_xy)
        out = evaluate_action(action, ch, self.cfg)
        self.uav_xy = action.uav_xy
        self.t += 1
        self.done = self.t >= self.cfg.horizon
        obs = self._obs
        self._obs = self._observe()
        info = {"report": out["report"], "power": out["power"], "psi": out["psi"],
                "p_out": out["p_out"], "action": action}
        return Transition(obs=obs, raw_action=raw, reward=out["reward"], next_obs=self._obs.copy(),
                          done=self.done, info=info)
