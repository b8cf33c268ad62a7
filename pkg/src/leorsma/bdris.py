"""Group-connected beyond-diagonal active RIS and its diagonal variants.

The reflection matrix is block diagonal with ``G = M/2`` complex symmetric
2x2 blocks. Feasibility requires every block's singular values to stay
below ``a_max`` (``a_max = 1`` is the lossless bound ``Phi Phi^H <= I``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DomainError, StructuralError

SYMMETRY_TOL = 1e-12
# relative slack below which a block counts as already feasible
FEASIBLE_RTOL = 1e-12


@dataclass
class BdRisMatrix:
    """Reflection configuration.

    ``blocks`` holds a ``(G, 2, 2)`` array in ``bd_active`` mode and an
    ``(M,)`` complex vector in the diagonal modes. ``a_max`` is the singular
    value (or magnitude) bound; passive surfaces always use 1.
    """

    mode: str
    blocks: np.ndarray
    a_max: float

    @property
    def num_elements(self) -> int:
        if self.mode == "bd_active":
            return 2 * len(self.blocks)
        return len(self.blocks)

    def matrix(self) -> np.ndarray:
        if self.mode == "bd_active":
            return assemble(self.blocks)
        return np.diag(np.asarray(self.blocks, dtype=complex))

    def bound(self) -> float:
        return 1.0 if self.mode == "diag_passive" else self.a_max

    @classmethod
    def zeros(cls, mode: str, m: int, a_max: float) -> "BdRisMatrix":
        if mode == "bd_active":
            return cls(mode, np.zeros((m // 2, 2, 2), dtype=complex), a_max)
        return cls(mode, np.zeros(m, dtype=complex), a_max)


def _check_symmetric(block: np.ndarray) -> None:
    if block.shape != (2, 2):
        raise StructuralError(f"RIS group blocks must be 2x2, got {block.shape}")
    if abs(block[0, 1] - block[1, 0]) > SYMMETRY_TOL * max(1.0, np.abs(block).max()):
        raise StructuralError("RIS group block is not symmetric")


def assemble(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Embed symmetric 2x2 blocks on the diagonal of an M x M matrix."""
    blocks = np.asarray(blocks, dtype=complex)
    if blocks.ndim != 3 or len(blocks) == 0:
        raise StructuralError("need a non-empty sequence of 2x2 blocks")
    m = 2 * len(blocks)
    phi = np.zeros((m, m), dtype=complex)
    for g, block in enumerate(blocks):
        _check_symmetric(block)
        phi[2 * g:2 * g + 2, 2 * g:2 * g + 2] = block
    return phi


def singular_values_2x2(a: np.ndarray) -> Tuple[float, float]:
    """Closed-form singular values (descending) of a 2x2 complex matrix."""
    b = a.conj().T @ a
    p, r = b[0, 0].real, b[1, 1].real
    q = b[0, 1]
    mid = 0.5 * (p + r)
    rad = math.sqrt(max(0.0, 0.25 * (p - r) ** 2 + abs(q) ** 2))
    return math.sqrt(max(0.0, mid + rad)), math.sqrt(max(0.0, mid - rad))


def _hermitian_eig_2x2(b: np.ndarray):
    p, r = b[0, 0].real, b[1, 1].real
    q = b[0, 1]
    mid = 0.5 * (p + r)
    rad = math.sqrt(max(0.0, 0.25 * (p - r) ** 2 + abs(q) ** 2))
    lam1, lam2 = mid + rad, mid - rad
    # eigenvector of lam1 from whichever row is better conditioned
    c1 = np.array([q, lam1 - p])
    c2 = np.array([lam1 - r, np.conj(q)])
    v1 = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
    nv = np.linalg.norm(v1)
    v1 = np.array([1.0 + 0j, 0.0]) if nv == 0 else v1 / nv
    v2 = np.array([-np.conj(v1[1]), np.conj(v1[0])])
    return (lam1, lam2), (v1, v2)


def takagi_2x2(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Takagi factorization ``a = U diag(s) U^T`` of a complex symmetric 2x2 matrix.

    Eigenvectors ``v`` of ``a^H a`` give ``U`` columns ``exp(j beta) conj(v)``
    with ``beta = arg(v^T a v) / 2``. Degenerate singular values are handled
    through the real-orthogonal diagonalization of the symmetric unitary factor.
    """
    a = np.asarray(a, dtype=complex)
    _check_symmetric(a)
    s1, s2 = singular_values_2x2(a)
    if s1 == 0.0:
        return np.eye(2, dtype=complex), np.zeros(2)
    if s1 - s2 > 1e-8 * s1:
        _, vecs = _hermitian_eig_2x2(a.conj().T @ a)
        cols = []
        for v in vecs:
            c = v @ a @ v
            cols.append(np.exp(0.5j * np.angle(c)) * np.conj(v))
        return np.column_stack(cols), np.array([s1, s2])
    # a = s * Q with Q symmetric unitary: Q = X + jY, X and Y commute
    q = a / s1
    x, y = q.real, q.imag
    ref = x if abs(x[0, 1]) + abs(x[0, 0] - x[1, 1]) > abs(y[0, 1]) + abs(y[0, 0] - y[1, 1]) else y
    theta = 0.5 * math.atan2(2.0 * ref[0, 1], ref[0, 0] - ref[1, 1])
    o = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    d = np.diag(o.T @ q @ o)
    u = o * np.exp(0.5j * np.angle(d))[None, :]
    return u.astype(complex), np.array([s1, s1])


def project_block(raw: np.ndarray, a_max: float) -> np.ndarray:
    """Nearest feasible symmetric block: Takagi values clipped at ``a_max``."""
    if not a_max > 0:
        raise DomainError(f"a_max must be positive, got {a_max}")
    raw = np.asarray(raw, dtype=complex)
    _check_symmetric(raw)
    s1, _ = singular_values_2x2(raw)
    if s1 <= a_max * (1.0 + FEASIBLE_RTOL):
        return raw.copy()
    u, s = takagi_2x2(raw)
    out = (u * np.minimum(s, a_max)[None, :]) @ u.T
    return 0.5 * (out + out.T)


def project_diag(raw: np.ndarray, bound: float) -> np.ndarray:
    """Clip each reflection coefficient's magnitude at ``bound``, keeping its phase."""
    raw = np.asarray(raw, dtype=complex)
    return raw * (bound / np.maximum(np.abs(raw), bound))


def max_singular_value(phi: BdRisMatrix) -> float:
    if phi.mode == "bd_active":
        return max(singular_values_2x2(b)[0] for b in phi.blocks)
    return float(np.abs(phi.blocks).max())


def symmetry_defect(phi: BdRisMatrix) -> float:
    if phi.mode != "bd_active":
        return 0.0
    return float(max(abs(b[0, 1] - b[1, 0]) for b in phi.blocks))


def ris_output_power(phi: BdRisMatrix, h_u: np.ndarray, action, p_s: float) -> float:
    """Expected RIS output power for unit-power symbols:
    ``p_s (a_c |Phi H_u w_c|^2 + sum_i a_i |Phi H_u w_i|^2)``."""
    mat = phi.matrix()
    if h_u.shape[0] != mat.shape[1]:
        raise StructuralError(f"H_u has {h_u.shape[0]} rows, reflection matrix is {mat.shape}")
    w = np.column_stack([action.w_c] + list(action.w))
    if w.shape[0] != h_u.shape[1]:
        raise StructuralError("beamformer length does not match H_u columns")
    coeff = np.concatenate([[action.a_c], np.asarray(action.a, dtype=float)])
    out = mat @ (h_u @ w)
    return float(p_s * np.sum(coeff * np.sum(np.abs(out) ** 2, axis=0)))
