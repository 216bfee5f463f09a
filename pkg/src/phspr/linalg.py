"""Dense linear-algebra kernels used by every other module.

Spectra, Hurwitz tests, positive definite Cholesky factorization, ordered
invariant subspaces of even-dimensional (Hamiltonian-structured) matrices,
and an eigenvector (PBH-style) controllability margin.

All functions are pure, operate on float copies of their inputs and share
no state, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import IllConditioned, ImaginaryAxisEigenvalue, NotPositiveDefinite

__all__ = [
    "Spectrum",
    "HurwitzResult",
    "PbhResult",
    "eigenvalues",
    "is_hurwitz",
    "pd_cholesky",
    "invariant_subspace",
    "spectrum_matching_distance",
    "pbh_controllability",
]


def _as_square(M, name="matrix"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real matrix, sorted by (real, imaginary) part."""

    eigenvalues: np.ndarray

    @property
    def max_real_part(self) -> float:
        return float(self.eigenvalues.real.max())

    def __len__(self):
        return len(self.eigenvalues)


class HurwitzResult(NamedTuple):
    is_hurwitz: bool
    max_real_part: float


class PbhResult(NamedTuple):
    controllable: bool
    margin: float
    rank_estimate: int
    worst_eigenvalue: complex


def eigenvalues(M) -> Spectrum:
    """Full spectrum of a real square matrix.

    Eigenvalues of a real matrix come in exact conjugate pairs (LAPACK
    guarantees this); they are returned sorted lexicographically by
    (real, imag) so repeated calls are reproducible.
    """
    M = _as_square(M)
    ev = np.linalg.eigvals(M)
    order = np.lexsort((ev.imag, ev.real))
    return Spectrum(eigenvalues=ev[order])


def is_hurwitz(M, margin: float = 0.0) -> HurwitzResult:
    """Check that every eigenvalue satisfies Re(lambda) < -margin."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    spec = eigenvalues(M)
    return HurwitzResult(bool(spec.max_real_part < -margin), spec.max_real_part)


def pd_cholesky(S, asym_tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Parameters
    ----------
    S : array_like
        Symmetric matrix. Relative Frobenius asymmetry above ``asym_tol``
        is rejected; below it, the input is symmetrized before factoring.

    Returns
    -------
    G : ndarray
        Lower-triangular factor with ``G @ G.T == S`` to roundoff.

    Raises
    ------
    NotPositiveDefinite
        If the (symmetrized) matrix is not positive definite.
    ValueError
        If the asymmetry exceeds the tolerance.
    """
    S = _as_square(S, "S")
    scale = np.linalg.norm(S)
    if np.linalg.norm(S - S.T) > asym_tol * max(1.0, scale):
        raise ValueError("matrix is not symmetric within tolerance")
    S = 0.5 * (S + S.T)
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc


def invariant_subspace(H, selector: str, axis_tol: float = 1e-9,
                       residual_tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the stable or antistable invariant subspace.

    For a real ``2m x 2m`` matrix with no eigenvalues on the imaginary
    axis, returns a ``2m x m`` matrix ``X`` with orthonormal columns such
    that ``H @ X = X @ (X.T @ H @ X)`` and the eigenvalues associated with
    the subspace all have negative (``"stable"``) or positive
    (``"antistable"``) real part. Extraction uses an ordered real Schur
    decomposition, which is far more robust than raw eigenvectors when the
    spectrum is clustered.

    Parameters
    ----------
    H : array_like
        Real square matrix of even dimension.
    selector : {"stable", "antistable"}
        Which half of the spectrum spans the subspace.
    axis_tol : float
        An eigenvalue counts as "on the axis" when
        ``|Re(lambda)| <= axis_tol * (1 + rho(H))`` with ``rho`` the
        spectral radius.
    residual_tol : float
        Bound on ``||H X - X (X^T H X)||_F / ||H||_F``.

    Raises
    ------
    ImaginaryAxisEigenvalue
        If an eigenvalue sits within the axis tolerance, or the selected
        subspace does not have dimension m.
    IllConditioned
        If the invariance residual exceeds ``residual_tol``.
    """
    H = _as_square(H, "H")
    n = H.shape[0]
    if n % 2 != 0:
        raise ValueError(f"matrix dimension must be even, got {n}")
    m = n // 2
    if selector not in ("stable", "antistable"):
        raise ValueError(f"selector must be 'stable' or 'antistable', got {selector!r}")

    ev = np.linalg.eigvals(H)
    rho = float(np.abs(ev).max())
    threshold = axis_tol * (1.0 + rho)
    gap = float(np.abs(ev.real).min())
    if gap <= threshold:
        raise ImaginaryAxisEigenvalue(
            f"eigenvalue within {threshold:.3e} of the imaginary axis "
            f"(min |Re| = {gap:.3e})")

    sort = "lhp" if selector == "stable" else "rhp"
    _, Z, sdim = sla.schur(H, output="real", sort=sort)
    if sdim != m:
        raise ImaginaryAxisEigenvalue(
            f"selected subspace has dimension {sdim}, expected {m}")
    X = Z[:, :m]

    block = X.T @ H @ X
    residual = np.linalg.norm(H @ X - X @ block) / np.linalg.norm(H)
    if residual > residual_tol:
        raise IllConditioned(
            f"invariant-subspace residual {residual:.3e} exceeds {residual_tol:.1e}")
    return X


def spectrum_matching_distance(a, b) -> float:
    """Largest pairwise distance of the optimal matching of two spectra.

    Treats both inputs as multisets of complex numbers and solves the
    assignment problem, so it is insensitive to ordering and to how ties
    between near-equal eigenvalues are broken.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError(f"spectra have different sizes: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def pbh_controllability(A, B, rtol: float = 1e-12) -> PbhResult:
    """Eigenvector (PBH) controllability test with a numerical margin.

    The pair ``(A, B)`` is uncontrollable iff some left eigenvector of A is
    orthogonal to the columns of B, i.e. ``sigma_min([A - lambda I, B]) = 0``
    for some eigenvalue. Unlike the raw Kalman matrix, whose singular values
    over/underflow for badly scaled A, this margin stays meaningful in double
    precision. Callers should balance the realization first if the state
    coordinates carry wildly different units.
    """
    A = _as_square(A)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
    n = A.shape[0]
    scale = np.linalg.norm(np.hstack([A, B]), 2)
    if scale == 0.0:
        return PbhResult(False, 0.0, 0, 0j)
    ev = np.linalg.eigvals(A)
    margin = np.inf
    worst = ev[0]
    failing = 0
    for lam in ev:
        pencil = np.hstack([A - lam * np.eye(n), B])
        smin = np.linalg.svd(pencil, compute_uv=False)[-1] / scale
        if smin < margin:
            margin = smin
            worst = lam
        if smin <= rtol:
            failing += 1
    return PbhResult(failing == 0, float(margin), n - failing, complex(worst))
