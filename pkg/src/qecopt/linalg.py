"""Dense complex linear-algebra kernels.

Everything here is a pure function of its inputs. Matrices are plain
``numpy`` arrays of dtype ``complex128``; vectorization is column stacking,
so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "NotPSDError",
    "SpectralDecomposition",
    "as_matrix",
    "vec",
    "unvec",
    "eigh_desc",
    "psd_eig",
    "psd_sqrt",
    "psd_pinv_sqrt",
    "thin_qr",
    "expm",
    "sylvester_pinv",
    "sylvester_pinv_apply",
    "sylvester_operator",
]

RANK_CUT = 1e-10


class NotPSDError(ValueError):
    """Raised when a matrix expected to be Hermitian PSD is not."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Hermitian eigendecomposition ``H = V diag(w) V^dagger``, ``w`` descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def as_matrix(M, *, square: bool = False, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def vec(M) -> np.ndarray:
    """Column-stacking vectorization of a square matrix."""
    A = as_matrix(M, square=True)
    return A.reshape(-1, order="F")


def unvec(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if n is None:
        n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


def _check_hermitian(H: np.ndarray, tol: float) -> None:
    scale = max(1.0, float(np.linalg.norm(H)))
    dev = float(np.linalg.norm(H - H.conj().T))
    if dev > tol * scale:
        raise NotPSDError(f"matrix is not Hermitian (deviation {dev:.3e})")


def eigh_desc(H) -> SpectralDecomposition:
    H = as_matrix(H, square=True)
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return SpectralDecomposition(w[::-1].copy(), V[:, ::-1].copy())


def psd_eig(H, tol: float = 1e-9) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian PSD matrix with tiny negatives clamped.

    Eigenvalues in ``(-tol * max(1, lambda_max), 0)`` are set to zero; anything
    more negative raises :class:`NotPSDError`.
    """
    H = as_matrix(H, square=True)
    _check_hermitian(H, tol)
    sd = eigh_desc(H)
    w = sd.eigenvalues
    scale = max(1.0, float(w[0])) if w.size else 1.0
    if w.size and w[-1] < -tol * scale:
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {w[-1]:.3e})")
    return SpectralDecomposition(np.clip(w, 0.0, None), sd.eigenvectors)


def psd_sqrt(H, tol: float = 1e-9) -> np.ndarray:
    sd = psd_eig(H, tol)
    V = sd.eigenvectors
    return (V * np.sqrt(sd.eigenvalues)) @ V.conj().T


def _support(w: np.ndarray, rank_cut: float) -> np.ndarray:
    if w.size == 0 or w[0] <= 0.0:
        return np.zeros(w.shape, dtype=bool)
    return w > rank_cut * w[0]


def psd_pinv_sqrt(H, tol: float = 1e-9, rank_cut: float = RANK_CUT) -> np.ndarray:
    """Moore-Penrose ``H^{-1/2}``: inverse square root on the support, zero on the kernel.

    Eigenvalues below ``rank_cut * lambda_max`` count as kernel. The all-zero
    matrix maps to the zero matrix.
    """
    sd = psd_eig(H, tol)
    w, V = sd.eigenvalues, sd.eigenvectors
    keep = _support(w, rank_cut)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (V * inv) @ V.conj().T


def thin_qr(X) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with the diagonal of ``R`` made real and non-negative.

    Rank deficiency is not an error; it shows up as (near-)zero diagonal
    entries of ``R`` and the caller decides what to do.
    """
    X = as_matrix(X)
    n, d = X.shape
    if n < d:
        raise ValueError(f"thin_qr needs rows >= cols, got {X.shape}")
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.diag(R)
    mag = np.abs(diag)
    phase = np.ones(d, dtype=complex)
    nz = mag > 0
    phase[nz] = diag[nz] / mag[nz]
    Q = Q * phase
    R = phase.conj()[:, None] * R
    return Q, R


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade, via scipy)."""
    return scipy.linalg.expm(as_matrix(M, square=True))


def _sylvester_weights(w_sqrt: np.ndarray, rank_cut: float) -> np.ndarray:
    s = w_sqrt[:, None] + w_sqrt[None, :]
    cut = rank_cut * (2.0 * w_sqrt.max()) if w_sqrt.size else 0.0
    out = np.zeros_like(s)
    ok = s > cut
    out[ok] = 1.0 / s[ok]
    return out


def sylvester_pinv(sqrtH, B, rank_cut: float = RANK_CUT, *, spectral: SpectralDecomposition | None = None) -> np.ndarray:
    """Solve ``sqrtH X + X sqrtH = B`` in the pseudo-inverse sense.

    With ``sqrtH = V diag(s) V^dagger`` the solution in the eigenbasis is
    ``(V^dagger B V)_ab / (s_a + s_b)``, and components where both
    eigenvalues vanish are dropped. ``spectral`` may carry a precomputed
    decomposition of ``sqrtH``.
    """
    if spectral is None:
        spectral = eigh_desc(sqrtH)
    V = spectral.eigenvectors
    s = np.clip(spectral.eigenvalues, 0.0, None)
    Bt = V.conj().T @ np.asarray(B, dtype=complex) @ V
    return V @ (Bt * _sylvester_weights(s, rank_cut)) @ V.conj().T


def sylvester_pinv_apply(sqrtH, b, rank_cut: float = RANK_CUT) -> np.ndarray:
    """Apply the pseudo-inverse of ``kron(sqrtH.T, I) + kron(I, sqrtH)`` to ``b``."""
    S = as_matrix(sqrtH, square=True)
    n = S.shape[0]
    b = np.asarray(b, dtype=complex).ravel()
    if b.size != n * n:
        raise ValueError(f"vector length {b.size} does not match n^2 = {n * n}")
    return vec(sylvester_pinv(S, unvec(b, n), rank_cut))


def sylvester_operator(sqrtH) -> np.ndarray:
    """Dense ``kron(sqrtH.T, I) + kron(I, sqrtH)``; only sensible for small n."""
    S = as_matrix(sqrtH, square=True)
    n = S.shape[0]
    if n > 32:
        raise ValueError("refusing to build the dense Sylvester operator for n > 32")
    eye = np.eye(n)
    return np.kron(S.T, eye) + np.kron(eye, S)
