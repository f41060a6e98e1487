"""Subspace-code quantities built on the Petz (time-reversal) recovery.

For a noise channel with Kraus operators ``N_j`` and a code frame ``U``
(``Pi = U U^dagger``) the Petz recovery has operators
``R_k = Pi N_k^dagger N(Pi)^{-1/2}``. The composition recovery-after-noise,
restricted to the code, has the two-index Kraus operators
``A_jk = Pi N_k^dagger N(Pi)^{-1/2} N_j Pi``; everything below is assembled
from the code-basis blocks ``U^dagger A_jk U`` and their traces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import KrausMap, SchemaError, decode_matrix
from .linalg import RANK_CUT, SpectralDecomposition, as_matrix, psd_eig

__all__ = [
    "CodeFrame",
    "CorrectabilityOperator",
    "DegenerateCodeError",
    "KLReport",
    "PetzData",
    "RecoveryStack",
    "as_frame",
    "petz_data",
    "petz_recovery",
    "petz_stack",
    "correctability_operator",
    "cost_J",
    "cost_J_reg",
    "l1_norm",
    "cro_fidelity",
    "knill_laflamme_check",
    "recovery_cost",
    "recovery_traces",
    "projection_channel",
    "code_to_json",
    "code_from_json",
    "save_code",
    "load_code",
]

ISOMETRY_TOL = 1e-9


class DegenerateCodeError(ValueError):
    """``N(Pi)`` vanishes numerically, so the Petz recovery is undefined."""


@dataclass(frozen=True, eq=False)
class CodeFrame:
    """An ``n x d`` isometry whose columns are the logical codewords."""

    U: np.ndarray

    def __post_init__(self):
        U = as_matrix(self.U, name="U")
        n, d = U.shape
        if d > n:
            raise ValueError(f"code dimension {d} exceeds ambient dimension {n}")
        dev = np.linalg.norm(U.conj().T @ U - np.eye(d))
        if dev > ISOMETRY_TOL:
            raise ValueError(f"U is not an isometry (||U^dagger U - 1|| = {dev:.3e})")
        U = U.copy()
        U.flags.writeable = False
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.U @ self.U.conj().T

    def __repr__(self) -> str:
        return f"CodeFrame(n={self.n}, d={self.d})"


def as_frame(code) -> CodeFrame:
    return code if isinstance(code, CodeFrame) else CodeFrame(code)


def _frame_array(code) -> np.ndarray:
    # accept raw (possibly non-isometric) arrays so the same formulas can be
    # probed off the manifold by finite differences
    if isinstance(code, CodeFrame):
        return code.U
    return np.asarray(code, dtype=complex)


@dataclass(frozen=True, eq=False)
class RecoveryStack:
    """Stinespring stacking of ``r`` recovery operators into an ``(r n) x n`` isometry."""

    R_hat: np.ndarray

    def __post_init__(self):
        R = as_matrix(self.R_hat, name="R_hat")
        rn, n = R.shape
        if rn % n:
            raise ValueError(f"stack height {rn} is not a multiple of n = {n}")
        R = R.copy()
        R.flags.writeable = False
        object.__setattr__(self, "R_hat", R)

    @property
    def n(self) -> int:
        return self.R_hat.shape[1]

    @property
    def r(self) -> int:
        return self.R_hat.shape[0] // self.n

    @property
    def blocks(self) -> np.ndarray:
        return self.R_hat.reshape(self.r, self.n, self.n)

    def isometry_deviation(self) -> float:
        return float(np.linalg.norm(self.R_hat.conj().T @ self.R_hat - np.eye(self.n)))

    def to_kraus(self, label: str = "recovery") -> KrausMap:
        return KrausMap(self.blocks, label=label)

    @classmethod
    def from_kraus(cls, rec: KrausMap) -> RecoveryStack:
        return cls(rec.ops.reshape(-1, rec.dim))


@dataclass(frozen=True, eq=False)
class CorrectabilityOperator:
    d: int
    A_tilde: np.ndarray
    traces: np.ndarray


@dataclass(frozen=True)
class KLReport:
    correctable: bool
    deviation: float
    alpha: np.ndarray


@dataclass(frozen=True, eq=False)
class PetzData:
    """Intermediate quantities shared by costs and gradients.

    ``M[j] = N_j U``; ``P = N(Pi)``; ``spectral`` decomposes ``P`` (clamped);
    ``support`` flags eigenvalues above the rank cut; ``S = P^{-1/2}``
    (pseudo-inverse); ``T[k, j] = tr(U^dagger N_k^dagger S N_j U)``.
    """

    U: np.ndarray
    M: np.ndarray
    P: np.ndarray
    spectral: SpectralDecomposition
    support: np.ndarray
    S: np.ndarray
    SM: np.ndarray
    T: np.ndarray

    @property
    def full_rank(self) -> bool:
        return bool(self.support.all())


def petz_data(noise: KrausMap, code, rank_cut: float = RANK_CUT) -> PetzData:
    U = _frame_array(code)
    if U.shape[0] != noise.dim:
        raise ValueError(f"code lives in dimension {U.shape[0]}, noise acts on {noise.dim}")
    M = noise.ops @ U
    P = np.einsum("jad,jbd->ab", M, M.conj())
    P = 0.5 * (P + P.conj().T)
    sd = psd_eig(P, tol=1e-8)
    w, V = sd.eigenvalues, sd.eigenvectors
    if w[0] <= 1e-14:
        raise DegenerateCodeError("N(Pi) is numerically zero")
    support = w > rank_cut * w[0]
    inv = np.zeros_like(w)
    inv[support] = 1.0 / np.sqrt(w[support])
    S = (V * inv) @ V.conj().T
    SM = S @ M
    T = np.einsum("kad,jad->kj", M.conj(), SM)
    return PetzData(U=U, M=M, P=P, spectral=sd, support=support, S=S, SM=SM, T=T)


def projection_channel(code) -> KrausMap:
    frame = as_frame(code)
    return KrausMap(frame.projector[None], label="code projection")


def petz_recovery(noise: KrausMap, code, *, complete: bool = False, rank_cut: float = RANK_CUT) -> KrausMap:
    """Petz recovery ``{Pi N_k^dagger N(Pi)^{-1/2}}``.

    The map is trace preserving on the support of ``N(Pi)``. With
    ``complete=True`` the kernel projector of ``N(Pi)`` is appended as one
    extra operator, which makes it exactly trace preserving.
    """
    frame = as_frame(code)
    pd = petz_data(noise, frame, rank_cut)
    Pi = frame.projector
    R = Pi @ np.conj(np.swapaxes(noise.ops, 1, 2)) @ pd.S
    if complete and not pd.full_rank:
        V = pd.spectral.eigenvectors[:, ~pd.support]
        R = np.concatenate([R, (V @ V.conj().T)[None]])
    return KrausMap(R, label=f"petz[{noise.label}]")


def petz_stack(noise: KrausMap, code, rank_cut: float = RANK_CUT) -> RecoveryStack:
    """Petz recovery as a point of the Stiefel manifold of ``(m n) x n`` isometries.

    When ``N(Pi)`` is singular the Petz operators only form a partial
    isometry; the kernel is then mapped isometrically into the orthogonal
    complement of the stack's range, which leaves every ``R_j N_k Pi``
    (hence the recovery cost) unchanged.
    """
    frame = as_frame(code)
    pd = petz_data(noise, frame, rank_cut)
    n = noise.dim
    Pi = frame.projector
    R = (Pi @ np.conj(np.swapaxes(noise.ops, 1, 2)) @ pd.S).reshape(-1, n)
    if not pd.full_rank:
        kern = pd.spectral.eigenvectors[:, ~pd.support]
        col_basis, sv, _ = np.linalg.svd(R, full_matrices=True)
        rank = int(np.sum(sv > 1e-10 * max(sv[0], 1.0)))
        free = col_basis[:, rank : rank + kern.shape[1]]
        R = R + free @ kern.conj().T
    # polar clean-up of round-off
    W, _, Vh = np.linalg.svd(R, full_matrices=False)
    return RecoveryStack(W @ Vh)


def correctability_operator(noise: KrausMap, code, rank_cut: float = RANK_CUT) -> CorrectabilityOperator:
    """``sum_jk conj(B_jk) (x) B_jk`` with ``B_jk = U^dagger A_jk U`` (``d^2 x d^2``)."""
    pd = petz_data(noise, code, rank_cut)
    U = pd.U
    d = U.shape[1]
    # B[j, k] = U^dagger N_k^dagger S N_j U
    B = np.einsum("kad,jae->jkde", pd.M.conj(), pd.SM)
    A = np.einsum("jkab,jkcd->acbd", B.conj(), B).reshape(d * d, d * d)
    traces = np.trace(B, axis1=2, axis2=3)
    return CorrectabilityOperator(d=d, A_tilde=A, traces=traces)


def cost_J(noise: KrausMap, code, rank_cut: float = RANK_CUT) -> float:
    """``J = sum_jk |tr(A_jk)|^2``, between 0 and ``d^2``; ``d^2`` iff correctable."""
    pd = petz_data(noise, code, rank_cut)
    return float(np.sum(np.abs(pd.T) ** 2))


def l1_norm(U) -> float:
    return float(np.sum(np.abs(_frame_array(U))))


def cost_J_reg(noise: KrausMap, code, lam: float, *, l1_sign: float = -1.0, rank_cut: float = RANK_CUT) -> float:
    """``J + l1_sign * lam * ||U||_1``; the default sign makes the l1 term a penalty."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    J = cost_J(noise, code, rank_cut)
    return J if lam == 0 else J + l1_sign * lam * l1_norm(code)


def cro_fidelity(op: KrausMap, code) -> float:
    """Code-restricted operation fidelity ``(1/d^2) sum_j |tr(U^dagger E_j U)|^2``."""
    U = _frame_array(code)
    if U.shape[0] != op.dim:
        raise ValueError(f"code lives in dimension {U.shape[0]}, operation acts on {op.dim}")
    d = U.shape[1]
    tr = np.einsum("ad,jab,bd->j", U.conj(), op.ops, U)
    return float(np.sum(np.abs(tr) ** 2) / d**2)


def knill_laflamme_check(noise: KrausMap, code, tol: float = 1e-9) -> KLReport:
    U = _frame_array(code)
    d = U.shape[1]
    M = noise.ops @ U
    G = np.einsum("jad,kae->jkde", M.conj(), M)
    alpha = np.trace(G, axis1=2, axis2=3) / d
    resid = G - alpha[:, :, None, None] * np.eye(d)
    deviation = float(np.sqrt(np.max(np.sum(np.abs(resid) ** 2, axis=(2, 3)))))
    return KLReport(correctable=deviation <= tol, deviation=deviation, alpha=alpha)


def _stack_blocks(rec) -> np.ndarray:
    if isinstance(rec, RecoveryStack):
        return rec.blocks
    if isinstance(rec, KrausMap):
        return rec.ops
    R = np.asarray(rec, dtype=complex)
    if R.ndim == 2:
        n = R.shape[1]
        R = R.reshape(-1, n, n)
    return R


def recovery_traces(noise: KrausMap, code, rec) -> np.ndarray:
    """``T[j, k] = tr(R_j N_k Pi)``."""
    U = _frame_array(code)
    R = _stack_blocks(rec)
    if R.shape[-1] != noise.dim:
        raise ValueError(f"recovery acts on {R.shape[-1]}, noise on {noise.dim}")
    M = noise.ops @ U
    W = U.conj().T @ R  # (r, d, n)
    return np.einsum("jdb,kbd->jk", W, M)


def recovery_cost(noise: KrausMap, code, rec) -> float:
    """``sum_jk |tr(R_j N_k Pi)|^2`` for an arbitrary recovery stack."""
    return float(np.sum(np.abs(recovery_traces(noise, code, rec)) ** 2))


# --- Code JSON ------------------------------------------------------------

def code_to_json(code) -> dict:
    U = as_frame(code).U
    return {
        "n": U.shape[0],
        "d": U.shape[1],
        "columns": [[[float(z.real), float(z.imag)] for z in U[:, c]] for c in range(U.shape[1])],
    }


def code_from_json(doc) -> CodeFrame:
    if not isinstance(doc, dict):
        raise SchemaError("document: expected a JSON object")
    n, d = doc.get("n"), doc.get("d")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("n: expected a positive integer")
    if not isinstance(d, int) or isinstance(d, bool) or not 1 <= d <= n:
        raise SchemaError("d: expected an integer between 1 and n")
    cols = doc.get("columns")
    if not isinstance(cols, list) or len(cols) != d:
        raise SchemaError(f"columns: expected a list of {d} columns")
    U = np.empty((n, d), dtype=complex)
    for c, col in enumerate(cols):
        if not isinstance(col, list) or len(col) != n:
            raise SchemaError(f"columns[{c}]: expected a list of {n} entries")
        U[:, c] = decode_matrix([col], (1, n), f"columns[{c}]")[0]
    try:
        return CodeFrame(U)
    except ValueError as exc:
        raise SchemaError(f"columns: {exc}") from exc


def save_code(code, path) -> None:
    Path(path).write_text(json.dumps(code_to_json(code), allow_nan=False), encoding="utf-8")


def load_code(path) -> CodeFrame:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"document: invalid JSON ({exc})") from exc
    return code_from_json(doc)
