"""Complex Stiefel manifold ``{U in C^{n x d} : U^dagger U = 1_d}``.

Works for any shape with ``n >= d``, so the same functions serve code
frames (``n x d``) and Stinespring recovery stacks (``(r n) x n``).
Tangent vectors are plain arrays of the same shape as the base point.
"""

from __future__ import annotations

import numpy as np

from .linalg import expm, thin_qr

__all__ = [
    "RankDeficientError",
    "isometry_deviation",
    "sym",
    "project_tangent",
    "tangency_deviation",
    "canonical_inner",
    "canonical_norm",
    "riemannian_grad",
    "exp_map",
    "qr_retract",
    "retract",
    "renormalize",
]


class RankDeficientError(ValueError):
    """A matrix that must have full column rank does not."""


def isometry_deviation(U) -> float:
    U = np.asarray(U)
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1])))


def sym(Z: np.ndarray) -> np.ndarray:
    return 0.5 * (Z + Z.conj().T)


def project_tangent(U, X) -> np.ndarray:
    """``X - U Sym(U^dagger X)``; idempotent, kills ``U`` itself."""
    U = np.asarray(U)
    X = np.asarray(X)
    return X - U @ sym(U.conj().T @ X)


def tangency_deviation(U, X) -> float:
    UX = np.asarray(U).conj().T @ np.asarray(X)
    return float(np.linalg.norm(UX + UX.conj().T))


def canonical_inner(U, X, Y) -> float:
    """Canonical metric ``Re tr(X^dagger (1 - U U^dagger / 2) Y)``."""
    U, X, Y = (np.asarray(a) for a in (U, X, Y))
    Y_ = Y - 0.5 * U @ (U.conj().T @ Y)
    return float(np.real(np.vdot(X, Y_)))


def canonical_norm(U, X) -> float:
    return float(np.sqrt(max(canonical_inner(U, X, X), 0.0)))


def riemannian_grad(U, egrad) -> np.ndarray:
    """Gradient for the canonical metric: ``G - U G^dagger U``.

    ``egrad`` is the Euclidean gradient in the ``d/dRe + i d/dIm``
    convention, i.e. ``df(U)[X] = Re tr(G^dagger X)``.
    """
    U = np.asarray(U)
    G = np.asarray(egrad)
    return G - U @ (G.conj().T @ U)


def exp_map(U, X) -> np.ndarray:
    """Geodesic of the canonical metric starting at ``U`` with velocity ``X``."""
    U = np.asarray(U, dtype=complex)
    X = np.asarray(X, dtype=complex)
    d = U.shape[1]
    A = U.conj().T @ X
    Q, R = thin_qr(X - U @ A)
    block = np.block([[A, -R.conj().T], [R, np.zeros((d, d), dtype=complex)]])
    E = expm(block)
    return U @ E[:d, :d] + Q @ E[d:, :d]


def qr_retract(U, X, rank_tol: float = 1e-12) -> np.ndarray:
    """Q factor of ``U + X`` (diagonal of R kept real positive)."""
    Y = np.asarray(U) + np.asarray(X)
    Q, R = thin_qr(Y)
    diag = np.abs(np.diag(R))
    if diag.min() <= rank_tol * max(diag.max(), 1.0):
        raise RankDeficientError("U + X is rank deficient; cannot retract")
    return Q


def retract(U, X, method: str = "qr") -> np.ndarray:
    if method == "qr":
        return qr_retract(U, X)
    if method == "exp":
        return exp_map(U, X)
    raise ValueError(f"retraction: unknown method {method!r}")


def renormalize(U, method: str = "polar", rank_tol: float = 1e-12) -> np.ndarray:
    """Pull a drifted frame back onto the manifold.

    ``polar`` returns ``U (U^dagger U)^{-1/2}``, the nearest isometry;
    ``qr`` returns the Q factor.
    """
    U = np.asarray(U, dtype=complex)
    if method == "qr":
        return qr_retract(U, np.zeros_like(U), rank_tol)
    if method != "polar":
        raise ValueError(f"renormalize: unknown method {method!r}")
    W, s, Vh = np.linalg.svd(U, full_matrices=False)
    if s.min() <= rank_tol * max(s.max(), 1.0):
        raise RankDeficientError("frame is rank deficient; cannot renormalize")
    return W @ Vh
