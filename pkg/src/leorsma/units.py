"""Power and gain unit conversions used across the package."""
from __future__ import annotations

import math

from .errors import DomainError


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0 - 3.0)


def watt_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise DomainError(f"power must be positive, got {p_w}")
    return 10.0 * math.log10(p_w) + 30.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise DomainError(f"linear value must be positive, got {x}")
    return 10.0 * math.log10(x)
