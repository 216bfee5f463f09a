"""Assembly and verification of the passive observer-based controller.

Given a lumped plant and a stabilizing state-feedback gain K, the
controller is obtained by solving the observer Riccati equation for the
controller metric Q_c and forming

    J_c = (A_K Qc^-1 - Qc^-1 A_K^T - Qc^-1 (K^T C - C^T K) Qc^-1) / 2
    B_c = Qc^-1 K^T,   L = B_c,

which realizes the observer-based feedback as a port-Hamiltonian system
``(J_c - R_c) Q_c`` with input map B_c. Because R_c and Q_c are positive
definite the controller transfer matrix is strictly positive real, which
is certified here constructively (Cholesky of ``2 Qc Rc Qc - eps Qc``),
and the power-preserving interconnection ``u_c = y, u = r - y_c`` with a
passive plant of any order is stable: the controller cannot destabilize
truncated high-frequency modes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .discretize import LumpedPhs
from .errors import (
    CertificateFailure,
    NoAdmissibleAlpha,
    NotPositiveDefinite,
    NotStabilizable,
    SeparationMismatch,
    SkewnessDefect,
)
from .linalg import Spectrum, eigenvalues, is_hurwitz, pbh_controllability, pd_cholesky, \
    spectrum_matching_distance
from .riccati import AreProblem, check_admissible, solve_observer_are

__all__ = [
    "ControllerRealization",
    "ObserverFeedbackController",
    "ClosedLoopSystem",
    "RcSelection",
    "MatchingReport",
    "SprCertificate",
    "SeparationSpectra",
    "choose_rc",
    "build_controller",
    "verify_matching",
    "verify_spr",
    "close_loop",
    "separation_spectrum",
]

_SKEW_TOL = 1e-6


@dataclass(frozen=True)
class ControllerRealization:
    """Passive observer-based controller in port-Hamiltonian form.

    State equation ``d/dt xh = (J_c - R_c) Q_c xh + B_c u_c + B_ref r``
    with outputs ``y_c = B_c^T Q_c xh`` (fed back to the plant) and
    ``y_r = B_ref^T Q_c xh`` (exposed for monitoring only). For a
    correctly built controller ``B_c = L`` and ``B_c^T Q_c = K``; those
    identities are examined by :func:`verify_matching` rather than
    enforced here so perturbed realizations remain representable.
    """

    J_c: np.ndarray
    R_c: np.ndarray
    Q_c: np.ndarray
    B_c: np.ndarray
    B_ref: np.ndarray
    K: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.J_c, dtype=float))
        n = J.shape[0]
        if J.shape != (n, n):
            raise ValueError(f"J_c must be square, got {J.shape}")
        object.__setattr__(self, "J_c", J)
        for name in ("R_c", "Q_c"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if M.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {M.shape}")
            sym = 0.5 * (M + M.T)
            if np.linalg.norm(M - M.T) > 1e-10 * max(1.0, np.linalg.norm(M)):
                raise ValueError(f"{name} must be symmetric")
            try:
                np.linalg.cholesky(sym)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefinite(f"{name} must be positive definite") from exc
            object.__setattr__(self, name, sym)
        skew = np.linalg.norm(J + J.T) / max(1.0, np.linalg.norm(J))
        if skew > _SKEW_TOL:
            raise SkewnessDefect(
                f"J_c relative skewness defect {skew:.3e} exceeds {_SKEW_TOL:.1e}")
        for name in ("B_c", "B_ref", "L"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.ndim == 1:
                M = M.reshape(-1, 1)
            if M.shape[0] != n:
                raise ValueError(f"{name} must have {n} rows, got {M.shape}")
            object.__setattr__(self, name, M)
        K = np.asarray(self.K, dtype=float)
        if K.ndim == 1:
            K = K.reshape(1, -1)
        if K.shape[1] != n:
            raise ValueError(f"K must have {n} columns, got {K.shape}")
        object.__setattr__(self, "K", K)

    @property
    def order(self) -> int:
        return self.J_c.shape[0]

    @property
    def m(self) -> int:
        return self.B_c.shape[1]

    @cached_property
    def A_c(self) -> np.ndarray:
        """Controller drift matrix (J_c - R_c) Q_c."""
        return (self.J_c - self.R_c) @ self.Q_c

    @cached_property
    def K_eff(self) -> np.ndarray:
        """Feedback read-out B_c^T Q_c (equals K for a matched build)."""
        return self.B_c.T @ self.Q_c


@dataclass(frozen=True)
class ObserverFeedbackController:
    """Plain observer-based output feedback without a passivity certificate.

    Used for the naive comparison baseline in spillover sweeps. The
    internal dynamics are ``A_c = A - B K - L C``.
    """

    A_c: np.ndarray
    B_c: np.ndarray
    K: np.ndarray
    B_ref: np.ndarray

    @property
    def order(self) -> int:
        return self.A_c.shape[0]

    @property
    def m(self) -> int:
        return self.B_c.shape[1]

    @property
    def K_eff(self) -> np.ndarray:
        return self.K


@dataclass(frozen=True)
class RcSelection:
    """Accepted controller dissipation level and the rejected candidates."""

    alpha: float
    R_c: np.ndarray
    rejected: List[Tuple[float, float]]  # (alpha, spectral gap)


def choose_rc(A_K, C_K, alpha_grid: Sequence[float],
              axis_tol: float = 1e-9) -> RcSelection:
    """First dissipation level alpha in the grid with an admissible Hamiltonian.

    Tries ``R_c = alpha I`` for each alpha in order and returns the first
    one for which the observer Hamiltonian matrix has no imaginary-axis
    eigenvalues, together with the rejected candidates and their spectral
    gaps.
    """
    alphas = [float(a) for a in alpha_grid]
    if not alphas:
        raise ValueError("alpha_grid must be non-empty")
    A_K = np.atleast_2d(np.asarray(A_K, dtype=float))
    n = A_K.shape[0]
    rejected: List[Tuple[float, float]] = []
    for alpha in alphas:
        if alpha <= 0:
            raise ValueError("alpha candidates must be positive")
        problem = AreProblem(A_K=A_K, R_c=alpha * np.eye(n), C_K=C_K)
        adm = check_admissible(problem, axis_tol=axis_tol)
        if adm.admissible:
            return RcSelection(alpha=alpha, R_c=alpha * np.eye(n), rejected=rejected)
        rejected.append((alpha, adm.spectral_gap))
    raise NoAdmissibleAlpha(
        f"no alpha in {alphas} yields an admissible Hamiltonian matrix "
        f"(rejected: {rejected})")


def build_controller(sys: LumpedPhs, K, R_c) -> ControllerRealization:
    """Build the passive observer-based controller for a plant and gain.

    Requires ``A - B K`` Hurwitz and an admissible ``(A_K, R_c, C_K)``
    triple. Solves the observer Riccati equation for Q_c, forms J_c, B_c
    and L, and checks that the computed J_c is skew to tolerance (it is
    skew in exact arithmetic; a large defect signals an inconsistent Q_c)
    and that ``A - L C`` came out Hurwitz. Near rank-deficiency of the
    controller pair ``((J_c - R_c) Q_c, B_c)`` is warned about, not fatal,
    since the margin is grid dependent.
    """
    A, B, C = sys.A, sys.B, sys.C
    K = np.asarray(K, dtype=float)
    if K.ndim == 1:
        K = K.reshape(1, -1)
    if K.shape != (sys.m, sys.n_c):
        raise ValueError(f"K must be {sys.m}x{sys.n_c}, got {K.shape}")
    if np.isscalar(R_c):
        R_c = float(R_c) * np.eye(sys.n_c)

    A_K = A - B @ K
    closed = is_hurwitz(A_K)
    if not closed.is_hurwitz:
        raise ValueError(
            f"A - B K must be Hurwitz (max Re = {closed.max_real_part:.3e})")
    cross = K.T @ C
    C_K = -(cross + cross.T)

    problem = AreProblem(A_K=A_K, R_c=R_c, C_K=C_K)
    solution = solve_observer_are(problem)
    Q_c = solution.Q_c

    cho = sla.cho_factor(Q_c)
    Qci = sla.cho_solve(cho, np.eye(sys.n_c))
    skew_part = cross - cross.T
    J_c = 0.5 * (A_K @ Qci - Qci @ A_K.T - Qci @ skew_part @ Qci)
    defect = np.linalg.norm(J_c + J_c.T) / max(1.0, np.linalg.norm(J_c))
    if defect > _SKEW_TOL:
        raise SkewnessDefect(
            f"computed J_c has relative skewness defect {defect:.3e}; "
            "the Riccati solution is inconsistent")
    J_c = 0.5 * (J_c - J_c.T)

    B_c = sla.cho_solve(cho, K.T)
    ctrl = ControllerRealization(J_c=J_c, R_c=problem.R_c, Q_c=Q_c, B_c=B_c,
                                 B_ref=B.copy(), K=K, L=B_c.copy())

    observer = is_hurwitz(A - B_c @ C)
    if not observer.is_hurwitz:
        raise NotStabilizable(
            f"A - L C is not Hurwitz (max Re = {observer.max_real_part:.3e})")

    pbh = pbh_controllability(ctrl.A_c, B_c)
    if not pbh.controllable:
        warnings.warn(
            f"controller pair ((J_c - R_c) Q_c, B_c) is near rank-deficient "
            f"(PBH margin {pbh.margin:.3e})", stacklevel=2)
    return ctrl


@dataclass(frozen=True)
class MatchingReport:
    """Relative residuals of the three controller matching identities."""

    dynamics_residual: float    # (J_c - R_c) Q_c  vs  A - B K - L C
    gain_residual: float        # B_c^T Q_c  vs  K
    injection_residual: float   # B_c  vs  L
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.dynamics_residual, self.gain_residual,
                   self.injection_residual) <= self.tolerance


def verify_matching(ctrl: ControllerRealization, sys: LumpedPhs,
                    tol: float = 1e-8) -> MatchingReport:
    """Check that the realization reproduces the observer-based feedback."""
    target = sys.A - sys.B @ ctrl.K - ctrl.L @ sys.C
    r_dyn = np.linalg.norm(ctrl.A_c - target) / max(1.0, np.linalg.norm(target))
    r_gain = np.linalg.norm(ctrl.K_eff - ctrl.K) / max(1.0, np.linalg.norm(ctrl.K))
    r_inj = np.linalg.norm(ctrl.B_c - ctrl.L) / max(1.0, np.linalg.norm(ctrl.L))
    return MatchingReport(dynamics_residual=float(r_dyn),
                          gain_residual=float(r_gain),
                          injection_residual=float(r_inj),
                          tolerance=tol)


@dataclass(frozen=True)
class SprCertificate:
    """Constructive strict positive realness certificate.

    With storage metric P = Q_c and zero feedthrough, the certificate is a
    scalar ``epsilon > 0`` and a factor with
    ``kyp_factor^T kyp_factor = 2 Q_c R_c Q_c - epsilon Q_c > 0``; then
    ``P A_c + A_c^T P = -kyp_factor^T kyp_factor - epsilon P`` holds. The
    output identity ``B_c^T P = y_c`` map is satisfied identically by this
    realization.
    """

    epsilon: float
    kyp_factor: np.ndarray
    lyapunov_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.epsilon > 0 and self.lyapunov_residual <= self.tolerance


def verify_spr(ctrl: ControllerRealization, eps_floor: float = 1e-14,
               residual_tol: float = 1e-8) -> SprCertificate:
    """Certify strict positive realness of the controller constructively.

    The search starts at half the smallest eigenvalue of ``2 R_c Q_c``
    (the largest epsilon is that eigenvalue itself) and halves on Cholesky
    failure down to ``eps_floor``.
    """
    Q_c, R_c = ctrl.Q_c, ctrl.R_c
    M0 = 2.0 * Q_c @ R_c @ Q_c
    M0 = 0.5 * (M0 + M0.T)
    # eigenvalues of the pencil (2 Qc Rc Qc, Qc) = eigenvalues of 2 Rc Qc
    eps = float(sla.eigh(M0, Q_c, eigvals_only=True)[0]) / 2.0
    if not np.isfinite(eps) or eps < eps_floor:
        raise CertificateFailure(
            f"epsilon search starts below the floor ({eps:.3e} < {eps_floor:.1e}); "
            "R_c is too close to singular")
    A_c = ctrl.A_c
    scale = max(1.0, np.linalg.norm(M0))
    while True:
        try:
            G = pd_cholesky(M0 - eps * Q_c)
        except NotPositiveDefinite:
            eps *= 0.5
            if eps < eps_floor:
                raise CertificateFailure(
                    f"no epsilon above {eps_floor:.1e} yields a positive "
                    "definite Lyapunov right-hand side")
            continue
        kyp = G.T
        residual = np.linalg.norm(
            Q_c @ A_c + A_c.T @ Q_c + kyp.T @ kyp + eps * Q_c) / scale
        if residual > residual_tol:
            raise CertificateFailure(
                f"certificate residual {residual:.3e} exceeds {residual_tol:.1e}")
        return SprCertificate(epsilon=eps, kyp_factor=kyp,
                              lyapunov_residual=float(residual),
                              tolerance=residual_tol)


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Plant of any order interconnected with the controller.

    ``A_cl = [[A_p, -B_p K_eff], [B_c C_p, A_c]]`` and
    ``B_cl = [B_p; B_ref]`` under ``u_c = y, u = r - y_c``. The energy
    metric blockdiag(Q_plant, Q_c) exists only for certified controllers.
    """

    A_cl: np.ndarray
    B_cl: np.ndarray
    plant: LumpedPhs
    controller: object

    @property
    def plant_order(self) -> int:
        return self.plant.n_c

    @property
    def controller_order(self) -> int:
        return self.controller.order

    @property
    def energy_metric(self):
        Q_c = getattr(self.controller, "Q_c", None)
        if Q_c is None:
            return None
        return sla.block_diag(self.plant.Q, Q_c)


def close_loop(plant: LumpedPhs, ctrl) -> ClosedLoopSystem:
    """Power-preserving interconnection of a plant with the controller.

    The plant order may differ from the controller design order; only the
    number of boundary channels must match.
    """
    if plant.m != ctrl.m:
        raise ValueError(
            f"plant has {plant.m} boundary channels, controller has {ctrl.m}")
    A_p, B_p, C_p = plant.A, plant.B, plant.C
    A_cl = np.block([[A_p, -B_p @ ctrl.K_eff],
                     [ctrl.B_c @ C_p, ctrl.A_c]])
    B_cl = np.vstack([B_p, ctrl.B_ref])
    return ClosedLoopSystem(A_cl=A_cl, B_cl=B_cl, plant=plant, controller=ctrl)


@dataclass(frozen=True)
class SeparationSpectra:
    """State-feedback, observer and closed-loop spectra at design order."""

    state_feedback: Spectrum
    observer: Spectrum
    closed_loop: Spectrum
    max_pairing_distance: float
    tolerance: float


def separation_spectrum(ctrl, sys: LumpedPhs,
                        tol: float = 1e-6) -> SeparationSpectra:
    """Verify that the closed-loop spectrum splits into the two designed parts.

    At design order the closed loop is similar to a block triangular
    matrix with diagonal blocks ``A - B K`` and ``A - L C``, so its
    spectrum must equal the multiset union of the two. Raises
    SeparationMismatch if the optimal eigenvalue pairing exceeds
    ``tol * max(1, spectral radius)``.
    """
    if sys.n_c != ctrl.order:
        raise ValueError(
            f"separation form needs plant order {ctrl.order}, got {sys.n_c}")
    K_eff = ctrl.K_eff
    L = ctrl.B_c
    spec_k = eigenvalues(sys.A - sys.B @ K_eff)
    spec_l = eigenvalues(sys.A - L @ sys.C)
    cl = close_loop(sys, ctrl)
    spec_cl = eigenvalues(cl.A_cl)
    union = np.concatenate([spec_k.eigenvalues, spec_l.eigenvalues])
    dist = spectrum_matching_distance(spec_cl.eigenvalues, union)
    scale = max(1.0, float(np.abs(union).max()))
    if dist > tol * scale:
        raise SeparationMismatch(
            f"closed-loop spectrum deviates from the separation form by "
            f"{dist:.3e} (tolerance {tol * scale:.3e})")
    return SeparationSpectra(state_feedback=spec_k, observer=spec_l,
                             closed_loop=spec_cl,
                             max_pairing_distance=float(dist),
                             tolerance=tol)
