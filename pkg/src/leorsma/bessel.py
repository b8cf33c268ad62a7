"""Bessel functions of the first kind for small integer orders.

Ascending power series for ``|x| <= 12`` and the Hankel asymptotic expansion
beyond. Absolute error stays below 1e-10 on the real line.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

SERIES_LIMIT = 12.0


def _series(n: int, x: float) -> float:
    # sum_k (-1)^k (x/2)^(2k) / (k! (k+n)!), i.e. J_n(x) / (x/2)^n
    half_sq = 0.25 * x * x
    term = 1.0 / math.factorial(n)
    total = term
    k = 0
    while True:
        k += 1
        term *= -half_sq / (k * (k + n))
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and k > 2:
            break
    return total


def _hankel(n: int, x: float) -> float:
    mu = 4.0 * n * n
    chi = x - 0.5 * n * math.pi - 0.25 * math.pi
    p, q = 1.0, 0.0
    a = 1.0
    k = 0
    prev = math.inf
    while k < 60:
        k += 1
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(a) >= prev or abs(a) < 1e-18:
            break
        prev = abs(a)
        # a_k / x^k pattern: even k feed P, odd k feed Q, signs alternate in pairs
        if k % 2 == 0:
            p += a if (k // 2) % 2 == 0 else -a
        else:
            q += a if ((k - 1) // 2) % 2 == 0 else -a
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def besselj(n: int, x: float) -> float:
    """J_n(x) for integer ``n >= 0`` and finite real ``x``."""
    if n < 0:
        raise DomainError("order must be non-negative")
    if not math.isfinite(x):
        raise DomainError(f"argument must be finite, got {x}")
    sign = 1.0
    if x < 0:
        x = -x
        sign = -1.0 if n % 2 else 1.0
    if x <= SERIES_LIMIT:
        return sign * (0.5 * x) ** n * _series(n, x)
    return sign * _hankel(n, x)


def besselj_scaled(n: int, x: float) -> float:
    """J_n(x) / x**n, continuous through ``x = 0``."""
    if not math.isfinite(x):
        raise DomainError(f"argument must be finite, got {x}")
    if abs(x) <= SERIES_LIMIT:
        return 0.5 ** n * _series(n, x)
    return besselj(n, x) / x ** n


besselj_vec = np.vectorize(besselj, otypes=[float])
