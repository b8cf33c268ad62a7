from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leorsma import power
from leorsma.bdris import BdRisMatrix
from leorsma.config import ScenarioConfig
from leorsma.errors import DomainError, StructuralError
from leorsma.rsma import RsmaAction
from leorsma.units import dbm_to_watt


def test_bdaris_paper_values():
    p_d, p_dc = dbm_to_watt(-10), dbm_to_watt(-5)
    assert p_d == pytest.approx(1e-4) and p_dc == pytest.approx(3.162e-4, rel=1e-3)
    assert power.bdaris_power(1.0, 64, 1.25, p_d, p_dc) == pytest.approx(1.25 + 32 * (p_d + p_dc))
    assert power.bdaris_power(1.0, 64, 1.25, p_d, p_dc) == pytest.approx(1.2633, abs=1e-4)


def test_bdaris_trivial_and_linear():
    assert power.bdaris_power(0.0, 8, 1.25, 0.0, 0.0) == 0.0
    a = power.bdaris_power(0.3, 8, 1.25, 1e-3, 2e-3)
    b = power.bdaris_power(0.3, 16, 1.25, 1e-3, 2e-3)
    assert b - a == pytest.approx(4 * 3e-3)


def test_bdaris_errors():
    with pytest.raises(StructuralError):
        power.bdaris_power(1.0, 7, 1.25, 0, 0)
    with pytest.raises(DomainError):
        power.bdaris_power(-1.0, 8, 1.25, 0, 0)
    with pytest.raises(DomainError):
        power.bdaris_power(1.0, 8, 0.5, 0, 0)


def test_ris_power_modes():
    assert power.ris_power("diag_passive", 5.0, 8, 1.25, 1e-3, 2e-3) == pytest.approx(8e-3)
    assert power.ris_power("diag_active", 1.0, 8, 1.25, 1e-3, 2e-3) == pytest.approx(1.25 + 8 * 3e-3)
    assert power.ris_power("bd_active", 1.0, 8, 1.25, 1e-3, 2e-3) == pytest.approx(1.25 + 4 * 3e-3)
    with pytest.raises(DomainError):
        power.ris_power("other", 1.0, 8, 1.25, 0, 0)


def hover_oracle(s, rho, delta, area, omega, r, w, k):
    return delta / 8 * rho * s * area * omega ** 3 * r ** 3 + (1 + k) * w ** 1.5 / math.sqrt(2 * rho * area)


def test_hover_components():
    hp = power.HoverParams()
    p0 = hover_oracle(0.05, 0.02, 0.05, 0.503, 300, 0.4, 1e-300, 0.1)
    assert p0 == pytest.approx(5.43, abs=0.01)
    assert power.hover_power(hp) - p0 == pytest.approx(693.6, abs=0.1)


def test_hover_limits():
    light = power.HoverParams(weight=1e-12)
    p0 = hover_oracle(0.05, 0.02, 0.05, 0.503, 300, 0.4, 0.0, 0.1)
    assert power.hover_power(light) == pytest.approx(p0, rel=1e-9)
    fast = power.HoverParams(weight=1e-12, angular_velocity=600.0)
    assert power.hover_power(fast) == pytest.approx(8 * p0, rel=1e-9)


def test_hover_random_sets():
    rng = np.random.default_rng(0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(100):
            v = rng.uniform(0.01, 2.0, 8) * np.array([1, 1, 1, 1, 300, 1, 20, 1])
            hp = power.HoverParams(*v)
            assert power.hover_power(hp) == pytest.approx(hover_oracle(*v), rel=1e-9)


def test_hover_validation():
    with pytest.raises(DomainError):
        power.HoverParams(air_density=0.0)
    with pytest.warns(UserWarning):
        power.HoverParams(disc_area=1.0)


def _action(coeffs, mode="bd_active", m=8):
    w = np.eye(2, dtype=complex)[0]
    return RsmaAction(a_c=coeffs[0], a=np.array(coeffs[1:]), w_c=w, w=[w] * (len(coeffs) - 1),
                      phi=BdRisMatrix.zeros(mode, m, 4.0), uav_xy=(0, 0),
                      delta=np.full(len(coeffs) - 1, 1 / (len(coeffs) - 1)))


def test_total_power_cases():
    cfg = ScenarioConfig(num_ris_elements=8)
    br = power.total_power(_action([0.4, 0.3, 0.2, 0.1]), cfg.p_s, 0.0, cfg)
    assert br.p_sat_alloc == pytest.approx(398.107, rel=1e-5)
    assert br.p_proc == 3.0
    cfg0 = cfg.replace(p_circuit_dbm=-300.0, p_dc_dbm=-300.0)
    br = power.total_power(_action([0.0, 0.0, 0.0, 0.0]), cfg0.p_s, 0.0, cfg0)
    assert br.p_total == pytest.approx(cfg0.p_proc + power.hover_power(cfg0.hover))
    d = br.as_dict()
    assert d["p_total"] == pytest.approx(sum(d[k] for k in ("p_sat_alloc", "p_bdaris", "p_proc", "p_uav_hover")),
                                         abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 10), st.floats(1e-6, 1.0))
def test_total_power_monotone(share, p_out, bump):
    cfg = ScenarioConfig(num_ris_elements=8)
    base = power.total_power(_action([share / 2, share / 2, 0, 0]), cfg.p_s, p_out, cfg).p_total
    more_out = power.total_power(_action([share / 2, share / 2, 0, 0]), cfg.p_s, p_out + bump, cfg).p_total
    more_proc = power.total_power(_action([share / 2, share / 2, 0, 0]), cfg.p_s, p_out,
                                  cfg.replace(p_proc=cfg.p_proc + bump)).p_total
    assert more_out > base and more_proc > base
