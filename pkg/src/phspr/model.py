"""Continuous boundary-controlled port-Hamiltonian models on an interval.

A model is ``dz/dt = P1 d/dz(L(z) z) + (P0 - G0) L(z) z`` on ``[a, b]``
with inputs and outputs formed from the boundary port variables through
two selector matrices W and Wtilde. This module represents the model
data, computes boundary ports and the boundary power pairing, and checks
the algebraic conditions under which the model is well posed and the
supply rate reduces to u^T y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from .errors import SingularPairing

__all__ = [
    "BcPhsSpec",
    "BoundaryPorts",
    "BoundaryReport",
    "ConstantCoefficients",
    "sigma",
    "boundary_ports",
    "check_boundary_matrices",
    "power_pairing",
    "sample_coefficient_extrema",
]

_SYM_TOL = 1e-10


class ConstantCoefficients:
    """Spatially constant diagonal coefficient matrix ``L(z) = diag(values)``."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("values must be a 1-D sequence")

    def __call__(self, zeta: float) -> np.ndarray:
        return np.diag(self.values)

    def __repr__(self):
        return f"ConstantCoefficients({self.values.tolist()})"


def sigma(n: int) -> np.ndarray:
    """Boundary pairing matrix [[0, I], [I, 0]] in n x n blocks."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [eye, zero]])


@dataclass(frozen=True)
class BcPhsSpec:
    """Data of a 1-D boundary-controlled port-Hamiltonian model.

    ``n`` is the number of state variables per spatial point, ``L`` maps a
    coordinate in ``domain`` to the n x n coefficient matrix of the energy
    density, and W / Wtilde are the n x 2n input and output selectors
    acting on the stacked boundary port vector.

    Construction enforces the hard structural invariants (P1 symmetric and
    nonsingular, P0 skew, G0 symmetric positive semidefinite, shapes).
    Boundary-matrix conditions are reported by
    :func:`check_boundary_matrices` rather than enforced, so that
    near-violations remain inspectable.
    """

    n: int
    P1: np.ndarray
    P0: np.ndarray
    G0: np.ndarray
    L: Callable[[float], np.ndarray]
    domain: Tuple[float, float]
    W: np.ndarray
    Wtilde: np.ndarray

    def __post_init__(self):
        n = self.n
        for name in ("P1", "P0", "G0"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {M.shape}")
            object.__setattr__(self, name, M)
        for name in ("W", "Wtilde"):
            M = np.asarray(getattr(self, name), dtype=float)
            M = np.atleast_2d(M)
            if M.shape != (n, 2 * n):
                raise ValueError(f"{name} must be {n}x{2 * n}, got {M.shape}")
            object.__setattr__(self, name, M)
        a, b = self.domain
        if not b > a:
            raise ValueError(f"domain must satisfy a < b, got {self.domain}")

        scale = max(1.0, np.linalg.norm(self.P1))
        if np.linalg.norm(self.P1 - self.P1.T) > _SYM_TOL * scale:
            raise ValueError("P1 must be symmetric")
        if np.linalg.cond(self.P1) > 1e12:
            raise ValueError("P1 must be nonsingular")
        if np.linalg.norm(self.P0 + self.P0.T) > _SYM_TOL * max(1.0, np.linalg.norm(self.P0)):
            raise ValueError("P0 must be skew-symmetric")
        if np.linalg.norm(self.G0 - self.G0.T) > _SYM_TOL * max(1.0, np.linalg.norm(self.G0)):
            raise ValueError("G0 must be symmetric")
        if self.G0.any() and np.linalg.eigvalsh(self.G0).min() < -_SYM_TOL * np.linalg.norm(self.G0):
            raise ValueError("G0 must be positive semidefinite")


@dataclass(frozen=True)
class BoundaryPorts:
    """Flow and effort port vectors at the spatial boundary."""

    f_boundary: np.ndarray
    e_boundary: np.ndarray


def boundary_ports(spec: BcPhsSpec, Lz_a, Lz_b) -> BoundaryPorts:
    """Boundary port variables from the co-energy traces at both ends.

    ``(f, e) = (1/sqrt 2) [[P1, -P1], [I, I]] (Lz(b); Lz(a))``; the map is
    linear in the traces.
    """
    Lz_a = np.asarray(Lz_a, dtype=float).ravel()
    Lz_b = np.asarray(Lz_b, dtype=float).ravel()
    if Lz_a.shape != (spec.n,) or Lz_b.shape != (spec.n,):
        raise ValueError(
            f"boundary traces must have length {spec.n}, "
            f"got {Lz_a.shape} and {Lz_b.shape}")
    f = (spec.P1 @ (Lz_b - Lz_a)) / np.sqrt(2.0)
    e = (Lz_b + Lz_a) / np.sqrt(2.0)
    return BoundaryPorts(f_boundary=f, e_boundary=e)


@dataclass(frozen=True)
class BoundaryReport:
    """Algebraic health report of the boundary selector matrices.

    ``theorem_ok`` summarizes the semigroup condition (W full rank and
    W Sigma W^T positive semidefinite). The impedance flags record which
    of the quadratic boundary forms vanish and whether the cross term
    Wtilde Sigma W^T equals the identity, which together make the power
    balance collapse to exactly u^T y. The cross-term content is reported
    rather than asserted; see the norms for near-violations.
    """

    rank_w: int
    w_sigma_w_min_eig: float
    w_sigma_w_norm: float
    wt_sigma_wt_norm: float
    cross_term: np.ndarray
    cross_identity_defect: float
    stacked_invertible: bool
    stacked_condition: float
    theorem_ok: bool
    impedance_passive: bool
    tolerance: float


def check_boundary_matrices(spec: BcPhsSpec, tol: float = 1e-10) -> BoundaryReport:
    """Report-only check of the boundary selector conditions."""
    n = spec.n
    Sig = sigma(n)
    W, Wt = spec.W, spec.Wtilde
    scale = max(1.0, np.linalg.norm(W) ** 2, np.linalg.norm(Wt) ** 2)

    wsw = W @ Sig @ W.T
    wsw_sym = 0.5 * (wsw + wsw.T)
    wtswt = Wt @ Sig @ Wt.T
    cross = Wt @ Sig @ W.T

    rank_w = int(np.linalg.matrix_rank(W))
    min_eig = float(np.linalg.eigvalsh(wsw_sym).min())
    stacked = np.vstack([W, Wt])
    cond = float(np.linalg.cond(stacked))
    invertible = bool(np.isfinite(cond) and cond < 1e12)

    wsw_norm = float(np.linalg.norm(wsw))
    wtswt_norm = float(np.linalg.norm(wtswt))
    cross_defect = float(np.linalg.norm(cross - np.eye(n)))

    theorem_ok = rank_w == n and min_eig >= -tol * scale
    impedance = (wsw_norm <= tol * scale and wtswt_norm <= tol * scale
                 and cross_defect <= tol * scale)
    return BoundaryReport(
        rank_w=rank_w,
        w_sigma_w_min_eig=min_eig,
        w_sigma_w_norm=wsw_norm,
        wt_sigma_wt_norm=wtswt_norm,
        cross_term=cross,
        cross_identity_defect=cross_defect,
        stacked_invertible=invertible,
        stacked_condition=cond,
        theorem_ok=theorem_ok,
        impedance_passive=impedance,
        tolerance=tol,
    )


def power_pairing(W, Wtilde) -> np.ndarray:
    """Quadratic form of the boundary power balance.

    Returns ``P = ([W; Wt] Sigma [W; Wt]^T)^{-1}`` so that the stored
    energy satisfies ``dH/dt = 0.5 (u; y)^T P (u; y)``. For impedance
    passive selectors the value equals ``u^T y``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Wt = np.atleast_2d(np.asarray(Wtilde, dtype=float))
    if W.shape != Wt.shape or W.shape[1] != 2 * W.shape[0]:
        raise ValueError(f"W and Wtilde must both be n x 2n, got {W.shape}, {Wt.shape}")
    n = W.shape[0]
    stacked = np.vstack([W, Wt])
    block = stacked @ sigma(n) @ stacked.T
    if np.linalg.cond(block) > 1e12:
        raise SingularPairing("boundary pairing block matrix is singular")
    return np.linalg.inv(block)


def sample_coefficient_extrema(spec: BcPhsSpec, n_samples: int = 200):
    """Extreme eigenvalues of L over a uniform sampling grid.

    Continuous verification of ``m I < L(z) < M I`` is impossible, so the
    bound is sampled; callers choose the resolution.
    """
    a, b = spec.domain
    grid = np.linspace(a, b, max(2, n_samples))
    lo, hi = np.inf, -np.inf
    for z in grid:
        Lz = np.asarray(spec.L(float(z)), dtype=float)
        if Lz.shape != (spec.n, spec.n):
            raise ValueError(f"L({z}) has shape {Lz.shape}, expected {(spec.n, spec.n)}")
        ev = np.linalg.eigvalsh(0.5 * (Lz + Lz.T))
        lo = min(lo, float(ev.min()))
        hi = max(hi, float(ev.max()))
    return lo, hi
