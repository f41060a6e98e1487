"""Euclidean gradients of the code and recovery costs, plus a finite-difference oracle.

Convention: for a real function ``f`` of a complex matrix ``U`` the gradient is
``df/dRe(U) + i df/dIm(U)``, so that the first-order change is
``Re tr(G^dagger dU)``.

Code cost. Write ``P = N(Pi)``, ``S = P^{+1/2}`` (pseudo-inverse square root),
``Q = P^{1/2}`` and ``T_kj = tr(U^dagger N_k^dagger S N_j U)``, so that
``J = sum |T_kj|^2``. Differentiating ``U`` where it appears explicitly gives
``2 (W + W^dagger) U`` with ``W = sum conj(T_kj) N_k^dagger S N_j``.
Differentiating through ``S`` gives ``2 tr(A dS)`` with the Hermitian
``A = sum conj(T_kj) N_j Pi N_k^dagger``. Using the pseudo-inverse derivative
(constant rank), ``tr(A dS) = tr(C dQ)`` with

    C = -S A S + K A S^2 + S^2 A K,   K = kernel projector of P,

and ``Q dQ + dQ Q = dP`` gives ``tr(C dQ) = tr(L^+(C) dP)``, where ``L^+`` is
the Sylvester pseudo-inverse. Finally ``dP = sum N_j (dU U^dagger +
U dU^dagger) N_j^dagger`` so that part contributes ``4 Z U`` with
``Z = sum N_j^dagger L^+(C) N_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channels import KrausMap
from .linalg import RANK_CUT, SpectralDecomposition, sylvester_pinv
from .qec import PetzData, petz_data, recovery_traces

__all__ = [
    "GradientReport",
    "fd_oracle",
    "relative_error",
    "egrad_trace_projector",
    "egrad_trace_pinvsqrt",
    "egrad_cost_J",
    "egrad_l1",
    "egrad_cost_J_reg",
    "egrad_recovery",
]

EPS_L1 = 1e-12


@dataclass(frozen=True, eq=False)
class GradientReport:
    egrad: np.ndarray
    fd_relative_error: float | None = None
    n_traces: int = 0
    n_sylvester: int = 0


def fd_oracle(f: Callable[[np.ndarray], float], X0, h: float = 1e-6) -> np.ndarray:
    """Central differences along the real and imaginary part of every entry."""
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"step h must lie in [1e-8, 1e-4], got {h}")
    X0 = np.array(X0, dtype=complex)
    G = np.zeros_like(X0)
    for idx in np.ndindex(X0.shape):
        for unit in (1.0, 1j):
            X = X0.copy()
            X[idx] += h * unit
            fp = f(X)
            X[idx] -= 2 * h * unit
            fm = f(X)
            G[idx] += unit * (fp - fm) / (2 * h)
    return G


def relative_error(G, G_ref) -> float:
    ref = float(np.linalg.norm(G_ref))
    return float(np.linalg.norm(np.asarray(G) - G_ref)) / max(ref, 1e-300)


def egrad_trace_projector(A, U) -> np.ndarray:
    """Gradient of ``Re tr(A U U^dagger)``: ``(A + A^dagger) U`` (``2 A U`` for Hermitian A)."""
    A = np.asarray(A, dtype=complex)
    return (A + A.conj().T) @ np.asarray(U)


def _sqrt_spectral(pd: PetzData) -> SpectralDecomposition:
    w = np.where(pd.support, np.sqrt(pd.spectral.eigenvalues), 0.0)
    return SpectralDecomposition(w, pd.spectral.eigenvectors)


def _pinvsqrt_adjoint(pd: PetzData, A: np.ndarray, rank_cut: float) -> np.ndarray:
    """``Y = L^+(C)``, so that ``tr(A dS) = tr(Y dP)`` for Hermitian ``A``."""
    S = pd.S
    C = -S @ A @ S
    if not pd.full_rank:
        V = pd.spectral.eigenvectors
        K = V[:, ~pd.support] @ V[:, ~pd.support].conj().T
        S2 = S @ S
        C = C + K @ A @ S2 + S2 @ A @ K
    Y = sylvester_pinv(None, C, rank_cut, spectral=_sqrt_spectral(pd))
    return Y


def egrad_trace_pinvsqrt(A, noise: KrausMap, U, rank_cut: float = RANK_CUT) -> np.ndarray:
    """Gradient of ``Re tr(A N(U U^dagger)^{-1/2})`` (pseudo-inverse square root)."""
    A = np.asarray(A, dtype=complex)
    A = 0.5 * (A + A.conj().T)
    pd = petz_data(noise, U, rank_cut)
    Y = _pinvsqrt_adjoint(pd, A, rank_cut)
    ZU = np.einsum("jba,jbd->ad", noise.ops.conj(), Y @ pd.M)
    return 2.0 * ZU


def _egrad_J_from(pd: PetzData, noise: KrausMap, rank_cut: float) -> np.ndarray:
    T, M, SM = pd.T, pd.M, pd.SM
    Nc = noise.ops.conj()
    # W U and W^dagger U
    WU = np.einsum("kba,kbd->ad", Nc, np.einsum("kj,jbd->kbd", T.conj(), SM))
    WhU = np.einsum("jba,jbd->ad", Nc, np.einsum("kj,kbd->jbd", T, SM))
    # A = sum_kj conj(T_kj) M_j M_k^dagger (Hermitian)
    A = np.einsum("kad,kbd->ab", np.einsum("kj,jad->kad", T.conj(), M), M.conj())
    A = 0.5 * (A + A.conj().T)
    Y = _pinvsqrt_adjoint(pd, A, rank_cut)
    ZU = np.einsum("jba,jbd->ad", Nc, Y @ M)
    return 2.0 * (WU + WhU) + 4.0 * ZU


def egrad_cost_J(
    noise: KrausMap, U, *, verify: bool = False, h: float = 1e-6, rank_cut: float = RANK_CUT
) -> GradientReport:
    """Euclidean gradient of ``J(U) = sum_kj |T_kj|^2``.

    Costs ``m^2`` traces and a single Sylvester pseudo-inverse solve per call.
    With ``verify=True`` the result is compared against :func:`fd_oracle`.
    """
    U = np.asarray(getattr(U, "U", U), dtype=complex)
    pd = petz_data(noise, U, rank_cut)
    G = _egrad_J_from(pd, noise, rank_cut)
    err = None
    if verify:
        def f(X):
            return float(np.sum(np.abs(petz_data(noise, X, rank_cut).T) ** 2))

        err = relative_error(G, fd_oracle(f, U, h))
    return GradientReport(egrad=G, fd_relative_error=err, n_traces=pd.T.size, n_sylvester=1)


def egrad_l1(U, lam: float, eps: float = EPS_L1) -> np.ndarray:
    """Subgradient of ``lam * sum |U_jk|``: ``lam U_jk / |U_jk|``, zero where ``|U_jk| <= eps``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    U = np.asarray(U, dtype=complex)
    mag = np.abs(U)
    out = np.zeros_like(U)
    nz = mag > eps
    out[nz] = lam * U[nz] / mag[nz]
    return out


def egrad_cost_J_reg(noise: KrausMap, U, lam: float, *, l1_sign: float = -1.0, rank_cut: float = RANK_CUT) -> np.ndarray:
    G = egrad_cost_J(noise, U, rank_cut=rank_cut).egrad
    if lam:
        G = G + l1_sign * egrad_l1(U, lam)
    return G


def egrad_recovery(noise: KrausMap, code, rec) -> np.ndarray:
    """Gradient of ``sum_jk |tr(R_j N_k Pi)|^2`` w.r.t. the stack, shape ``(r n, n)``.

    Block ``k`` is ``2 sum_j tr(R_k N_j Pi) Pi N_j^dagger``.
    """
    U = np.asarray(getattr(code, "U", code), dtype=complex)
    T = recovery_traces(noise, code, rec)
    M = noise.ops @ U
    blocks = U @ np.einsum("kj,jbd->kdb", T, M.conj())
    return 2.0 * blocks.reshape(-1, noise.dim)
