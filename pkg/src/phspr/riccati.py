"""Continuous algebraic Riccati equations via Hamiltonian invariant subspaces.

Two equations are solved with the same ordered-Schur kernel:

* the observer equation ``A_K^T Qc + Qc A_K + 2 Qc Rc Qc + C_K = 0``,
  whose positive definite solution spans the antistable invariant
  subspace of ``H = [[A_K, 2 Rc], [-C_K, -A_K^T]]`` (it is the
  stabilizing solution of the sign-flipped standard equation with data
  ``(-A_K, 2 Rc, -C_K)``);
* the standard control equation ``A^T P + P A - P B R^{-1} B^T P + Q = 0``
  behind the LQR gain, using the stable subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .discretize import LumpedPhs
from .errors import (
    IllConditioned,
    ImaginaryAxisEigenvalue,
    NoPdSolution,
    NotAdmissible,
    NotPositiveDefinite,
    NotStabilizable,
)
from .linalg import invariant_subspace, is_hurwitz

__all__ = [
    "AreProblem",
    "AreSolution",
    "Admissibility",
    "hamiltonian_matrix",
    "check_admissible",
    "solve_observer_are",
    "lqr_gain",
    "lqg_observer_gain",
]

_SYM_TOL = 1e-10


def _check_symmetric(M, name):
    if np.linalg.norm(M - M.T) > _SYM_TOL * max(1.0, np.linalg.norm(M)):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (M + M.T)


def _check_spd(M, name):
    M = _check_symmetric(M, name)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} must be positive definite") from exc
    return M


@dataclass(frozen=True)
class AreProblem:
    """Observer Riccati data (A_K, R_c, C_K).

    R_c is the controller dissipation (symmetric positive definite) and
    C_K the symmetric cross-weight built from the state-feedback gain and
    the output map. Both properties are enforced at construction.
    """

    A_K: np.ndarray
    R_c: np.ndarray
    C_K: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_K, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A_K must be square, got {A.shape}")
        object.__setattr__(self, "A_K", A)
        for name in ("R_c", "C_K"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if M.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {M.shape}")
            object.__setattr__(self, name, M)
        object.__setattr__(self, "R_c", _check_spd(self.R_c, "R_c"))
        object.__setattr__(self, "C_K", _check_symmetric(self.C_K, "C_K"))

    @property
    def order(self) -> int:
        return self.A_K.shape[0]


@dataclass(frozen=True)
class AreSolution:
    """Symmetric positive definite solution with solver diagnostics.

    ``residual`` is the relative Frobenius residual of the equation,
    ``hamiltonian_spectral_gap`` the distance of the Hamiltonian spectrum
    from the imaginary axis, ``presym_asymmetry`` the asymmetry of the raw
    graph-subspace ratio before symmetrization, and ``subspace`` records
    which spectral half carried the positive definite solution.
    """

    Q_c: np.ndarray
    residual: float
    hamiltonian_spectral_gap: float
    presym_asymmetry: float
    subspace: str


class Admissibility(NamedTuple):
    admissible: bool
    spectral_gap: float


def hamiltonian_matrix(p: AreProblem) -> np.ndarray:
    """Hamiltonian matrix [[A_K, 2 R_c], [-C_K, -A_K^T]] of the observer ARE."""
    return np.block([[p.A_K, 2.0 * p.R_c], [-p.C_K, -p.A_K.T]])


def check_admissible(p: AreProblem, axis_tol: float = 1e-9) -> Admissibility:
    """Check that the Hamiltonian matrix has no pure imaginary eigenvalues.

    Reports the spectral gap ``min |Re lambda(H)|`` for diagnostics; the
    threshold is relative, ``axis_tol * (1 + rho(H))``.
    """
    H = hamiltonian_matrix(p)
    ev = np.linalg.eigvals(H)
    gap = float(np.abs(ev.real).min())
    rho = float(np.abs(ev).max())
    return Admissibility(bool(gap > axis_tol * (1.0 + rho)), gap)


def _graph_solution(H, selector, cond_limit):
    n = H.shape[0] // 2
    X = invariant_subspace(H, selector)
    X1, X2 = X[:n], X[n:]
    sv = np.linalg.svd(X1, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > cond_limit:
        raise IllConditioned(
            f"graph-subspace basis condition number exceeds {cond_limit:.1e}")
    Qc = np.linalg.solve(X1.T, X2.T).T
    asym = float(np.linalg.norm(Qc - Qc.T) / max(1.0, np.linalg.norm(Qc)))
    return 0.5 * (Qc + Qc.T), asym


def solve_observer_are(p: AreProblem, residual_tol: float = 1e-8,
                       axis_tol: float = 1e-9,
                       cond_limit: float = 1e12) -> AreSolution:
    """Positive definite solution of the observer Riccati equation.

    The graph subspace ``span [I; Qc]`` of a solution is H-invariant with
    block map ``A_K + 2 Rc Qc``; the positive definite solution lives on
    the antistable half of the spectrum (for scalar data it is the
    positive root of ``2 r q^2 + 2 a q + c = 0``). If the antistable ratio
    comes out indefinite the stable half is tried before giving up.

    Raises
    ------
    NotAdmissible
        If the Hamiltonian matrix has eigenvalues on the imaginary axis.
    NoPdSolution
        If neither spectral half yields a positive definite ratio; the
        message reports the inertia of the symmetric candidate.
    IllConditioned
        If the subspace basis is too ill conditioned or the final residual
        check fails.
    """
    adm = check_admissible(p, axis_tol=axis_tol)
    if not adm.admissible:
        raise NotAdmissible(
            f"Hamiltonian matrix has imaginary-axis eigenvalues "
            f"(spectral gap {adm.spectral_gap:.3e})")
    H = hamiltonian_matrix(p)

    chosen = None
    inertia_info = []
    for selector in ("antistable", "stable"):
        Qc, asym = _graph_solution(H, selector, cond_limit)
        ev = np.linalg.eigvalsh(Qc)
        if ev.min() > 0.0:
            chosen = (Qc, asym, selector)
            break
        inertia_info.append(
            f"{selector}: {int((ev > 0).sum())} positive, "
            f"{int((ev < 0).sum())} negative eigenvalues")
    if chosen is None:
        raise NoPdSolution(
            "no positive definite graph solution on either spectral half "
            f"({'; '.join(inertia_info)})")
    Qc, asym, selector = chosen

    res = p.A_K.T @ Qc + Qc @ p.A_K + 2.0 * Qc @ p.R_c @ Qc + p.C_K
    residual = float(np.linalg.norm(res) / (1.0 + np.linalg.norm(p.C_K)))
    if residual > residual_tol:
        raise IllConditioned(
            f"Riccati residual {residual:.3e} exceeds {residual_tol:.1e}")
    return AreSolution(Q_c=Qc, residual=residual,
                       hamiltonian_spectral_gap=adm.spectral_gap,
                       presym_asymmetry=asym, subspace=selector)


def _weight_matrix(w, n, name):
    if np.isscalar(w):
        return float(w) * np.eye(n)
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if w.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n} or a scalar, got {w.shape}")
    return w


def _care_gain(A, B, Q_w, R_w):
    """Stabilizing gain of the standard control Riccati equation."""
    n, m = B.shape
    Q_w = _check_symmetric(_weight_matrix(Q_w, n, "Q weight"), "Q weight")
    if np.linalg.eigvalsh(Q_w).min() < -_SYM_TOL * max(1.0, np.linalg.norm(Q_w)):
        raise ValueError("Q weight must be positive semidefinite")
    R_w = _check_spd(_weight_matrix(R_w, m, "R weight"), "R weight")

    BRB = B @ np.linalg.solve(R_w, B.T)
    H = np.block([[A, -BRB], [-Q_w, -A.T]])
    try:
        X = invariant_subspace(H, "stable")
    except ImaginaryAxisEigenvalue as exc:
        raise NotStabilizable(
            "LQR Hamiltonian has imaginary-axis eigenvalues; the pair may "
            "not be stabilizable with these weights") from exc
    X1, X2 = X[:n], X[n:]
    sv = np.linalg.svd(X1, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > 1e12:
        raise NotStabilizable("stable graph subspace is ill conditioned")
    P = np.linalg.solve(X1.T, X2.T).T
    P = 0.5 * (P + P.T)
    K = np.linalg.solve(R_w, B.T @ P)
    return K, P


def lqr_gain(sys: LumpedPhs, Q_lqr, R_lqr) -> np.ndarray:
    """LQR state-feedback gain K with A - B K Hurwitz.

    ``K = R^{-1} B^T P`` where P is the stabilizing solution of the
    control Riccati equation, extracted from the stable invariant subspace
    of the associated Hamiltonian matrix. Scalar weights are expanded to
    multiples of the identity.
    """
    K, _ = _care_gain(sys.A, sys.B, Q_lqr, R_lqr)
    closed = is_hurwitz(sys.A - sys.B @ K)
    if not closed.is_hurwitz:
        raise NotStabilizable(
            f"A - B K is not Hurwitz (max Re = {closed.max_real_part:.3e})")
    return K


def lqg_observer_gain(sys: LumpedPhs, Q_w, R_w) -> np.ndarray:
    """Observer gain from the dual LQR problem on (A^T, C^T).

    This is the textbook output-injection design used as the naive
    comparison baseline in the spillover sweeps; it carries no passivity
    certificate.
    """
    Kd, _ = _care_gain(sys.A.T, sys.C.T, Q_w, R_w)
    L = Kd.T
    closed = is_hurwitz(sys.A - L @ sys.C)
    if not closed.is_hurwitz:
        raise NotStabilizable(
            f"A - L C is not Hurwitz (max Re = {closed.max_real_part:.3e})")
    return L
