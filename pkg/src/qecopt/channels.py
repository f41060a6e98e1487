"""Kraus-represented channels: the benchmark noise families, application,
validation, composition and JSON (de)serialization."""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np

from .linalg import as_matrix

__all__ = [
    "FAMILIES",
    "TP_TOL",
    "FILE_TP_WARN",
    "KrausMap",
    "NoiseSpec",
    "SchemaError",
    "TPError",
    "ValidationReport",
    "PAULI",
    "build_noise",
    "single_qubit_noise",
    "identity_channel",
    "apply",
    "compose",
    "validate",
    "tp_deviation",
    "kraus_to_json",
    "kraus_from_json",
    "save_kraus",
    "load_kraus",
    "decode_matrix",
    "encode_matrix",
]

TP_TOL = 1e-8
FILE_TP_WARN = 1e-3

FAMILIES = (
    "bitflip_independent",
    "bitflip_correlated_toy",
    "bitflip_full",
    "ampdamp_independent",
    "ampdamp_full",
    "depolarizing_independent",
    "depolarizing_full",
    "identity",
    "from_file",
)

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class SchemaError(ValueError):
    """A Kraus or Code JSON document does not match its schema."""


class TPError(ValueError):
    """A constructed channel is not trace preserving."""


@dataclass(frozen=True, eq=False)
class KrausMap:
    """An ordered list of ``m`` Kraus operators, stored as an ``(m, n, n)`` array."""

    ops: np.ndarray
    label: str = ""

    def __post_init__(self):
        ops = np.array(self.ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"Kraus operators must have shape (m, n, n), got {ops.shape}")
        if ops.shape[0] == 0:
            raise ValueError("a Kraus map needs at least one operator")
        if not np.all(np.isfinite(ops)):
            raise ValueError("Kraus operators have non-finite entries")
        ops.flags.writeable = False
        object.__setattr__(self, "ops", ops)

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    @property
    def m(self) -> int:
        return self.ops.shape[0]

    def __len__(self) -> int:
        return self.m

    def __iter__(self):
        return iter(self.ops)

    def __repr__(self) -> str:
        return f"KrausMap(label={self.label!r}, m={self.m}, n={self.dim})"


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    qubits: int = 1
    p: float = 0.0
    q: float = 0.0
    path: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family: unknown noise family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.family == "from_file":
            if not self.path:
                raise ValueError("path: required for family 'from_file'")
            return
        if int(self.qubits) < 1:
            raise ValueError(f"qubits: must be >= 1, got {self.qubits}")
        if not 0.0 <= float(self.p) <= 1.0:
            raise ValueError(f"p: must lie in [0, 1], got {self.p}")
        if not 0.0 <= float(self.q) <= 1.0:
            raise ValueError(f"q: must lie in [0, 1], got {self.q}")
        if self.family == "bitflip_correlated_toy" and self.qubits < 2:
            raise ValueError("qubits: the correlated toy model needs at least 2 qubits")

    def replace(self, **changes) -> NoiseSpec:
        data = {"family": self.family, "qubits": self.qubits, "p": self.p, "q": self.q, "path": self.path}
        data.update(changes)
        return NoiseSpec(**data)

    @classmethod
    def from_dict(cls, data: dict) -> NoiseSpec:
        unknown = set(data) - {"family", "qubits", "p", "q", "path"}
        if unknown:
            raise ValueError(f"noise: unknown field(s) {sorted(unknown)}")
        if "family" not in data:
            raise ValueError("noise.family: missing")
        return cls(
            family=data["family"],
            qubits=int(data.get("qubits", 1)),
            p=float(data.get("p", 0.0)),
            q=float(data.get("q", 0.0)),
            path=data.get("path"),
        )

    def to_dict(self) -> dict:
        out = {"family": self.family, "qubits": self.qubits, "p": self.p, "q": self.q}
        if self.path is not None:
            out["path"] = self.path
        return out


def _kron_all(factors) -> np.ndarray:
    return reduce(np.kron, factors)


def _site_operator(qubits: int, placements: dict[int, np.ndarray]) -> np.ndarray:
    # site 0 is the leftmost (most significant) tensor factor
    return _kron_all([placements.get(s, I2) for s in range(qubits)])


def _product_family(qubits: int, local: list[tuple[float, np.ndarray]]) -> list[tuple[float, np.ndarray]]:
    """All tensor products of a single-qubit Kraus set.

    ``local[0]`` is the identity-like element. Ordering: fewest non-identity
    sites first, then lexicographic by (sites, local labels).
    """
    terms = []
    for labels in itertools.product(range(len(local)), repeat=qubits):
        sites = tuple(s for s, a in enumerate(labels) if a != 0)
        key = (len(sites), sites, tuple(labels[s] for s in sites))
        coeff = float(np.prod([local[a][0] for a in labels]))
        op = _kron_all([local[a][1] for a in labels])
        terms.append((key, coeff, op))
    terms.sort(key=lambda t: t[0])
    return [(c, op) for _, c, op in terms]


def _ampdamp_local(p: float) -> tuple[np.ndarray, np.ndarray]:
    E0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=complex)
    E1 = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=complex)
    return E0, E1


def _terms(spec: NoiseSpec) -> list[tuple[float, np.ndarray]]:
    nq, p, q = int(spec.qubits), float(spec.p), float(spec.q)
    dim = 2**nq
    eye = np.eye(dim, dtype=complex)
    fam = spec.family
    X = PAULI["X"]

    if fam == "identity":
        return [(1.0, eye)]
    if fam == "bitflip_independent":
        return [(np.sqrt(1 - p), eye)] + [(np.sqrt(p / nq), _site_operator(nq, {k: X})) for k in range(nq)]
    if fam == "bitflip_correlated_toy":
        singles = [(np.sqrt(p * (1 - q) / nq), _site_operator(nq, {k: X})) for k in range(nq)]
        corr = (np.sqrt(p * q), _site_operator(nq, {nq - 2: X, nq - 1: X}))
        return [(np.sqrt(1 - p), eye)] + singles + [corr]
    if fam == "bitflip_full":
        return _product_family(nq, [(np.sqrt(1 - p), I2), (np.sqrt(p), X)])
    if fam == "ampdamp_independent":
        # identity term plus one E0 and one E1 term per site, all with the same
        # weight 1/(qubits + 1) so that the map is trace preserving
        E0, E1 = _ampdamp_local(p)
        w = np.sqrt(1.0 / (nq + 1))
        out = [(w, eye)]
        for k in range(nq):
            out.append((w, _site_operator(nq, {k: E0})))
            out.append((w, _site_operator(nq, {k: E1})))
        return out
    if fam == "ampdamp_full":
        E0, E1 = _ampdamp_local(p)
        return _product_family(nq, [(1.0, E0), (1.0, E1)])
    if fam == "depolarizing_independent":
        c = np.sqrt(p / (3 * nq))
        out = [(np.sqrt(1 - p), eye)]
        for k in range(nq):
            out.extend((c, _site_operator(nq, {k: PAULI[a]})) for a in "XYZ")
        return out
    if fam == "depolarizing_full":
        c = np.sqrt(p / 3)
        return _product_family(nq, [(np.sqrt(1 - p), I2), (c, PAULI["X"]), (c, PAULI["Y"]), (c, PAULI["Z"])])
    raise ValueError(f"family: unknown noise family {fam!r}")


def tp_deviation(ops) -> float:
    ops = np.asarray(ops, dtype=complex)
    n = ops.shape[-1]
    S = np.einsum("kji,kjl->il", ops.conj(), ops)
    return float(np.linalg.norm(S - np.eye(n)))


def build_noise(spec: NoiseSpec, tp_tol: float = TP_TOL) -> KrausMap:
    """Kraus map for one of the benchmark noise families.

    Operators whose coefficient is exactly zero are dropped, so e.g. any
    family at ``p = 0`` collapses to the single identity operator.
    """
    if spec.family == "from_file":
        return load_kraus(spec.path)
    terms = [(c, op) for c, op in _terms(spec) if c != 0.0 and np.any(op != 0)]
    ops = np.stack([c * op for c, op in terms])
    dev = tp_deviation(ops)
    if dev > tp_tol:
        raise TPError(f"{spec.family}: trace-preservation violated, deviation {dev:.3e}")
    label = f"{spec.family}(qubits={spec.qubits}, p={spec.p:g}" + (f", q={spec.q:g})" if spec.family == "bitflip_correlated_toy" else ")")
    return KrausMap(ops, label=label)


_SINGLE_QUBIT = {
    "bitflip": "bitflip_full",
    "ampdamp": "ampdamp_full",
    "depolarizing": "depolarizing_full",
}


def single_qubit_noise(spec: NoiseSpec) -> KrausMap:
    """The one-qubit channel underlying a multi-qubit family (the 'no correction' baseline)."""
    base = spec.family.split("_")[0]
    if base not in _SINGLE_QUBIT:
        raise ValueError(f"family: no single-qubit baseline for {spec.family!r}")
    return build_noise(NoiseSpec(_SINGLE_QUBIT[base], qubits=1, p=spec.p))


def identity_channel(n: int) -> KrausMap:
    return KrausMap(np.eye(n, dtype=complex)[None], label=f"identity({n})")


def apply(channel: KrausMap, rho) -> np.ndarray:
    rho = as_matrix(rho, square=True, name="rho")
    if rho.shape[0] != channel.dim:
        raise ValueError(f"rho has dimension {rho.shape[0]}, channel acts on {channel.dim}")
    K = channel.ops
    return np.einsum("kab,bc,kdc->ad", K, rho, K.conj())


def compose(outer: KrausMap, inner: KrausMap, label: str | None = None) -> KrausMap:
    """Kraus form of ``outer o inner``: operators ``A_i B_j`` ordered with ``j`` fastest."""
    if outer.dim != inner.dim:
        raise ValueError(f"dimension mismatch: {outer.dim} vs {inner.dim}")
    ops = np.einsum("iab,jbc->ijac", outer.ops, inner.ops).reshape(-1, outer.dim, outer.dim)
    return KrausMap(ops, label=label or f"{outer.label} o {inner.label}")


@dataclass(frozen=True)
class ValidationReport:
    tp_deviation: float
    cp_ok: bool = True
    max_eigenvalue: float = 1.0

    @property
    def trace_non_increasing(self) -> bool:
        return self.max_eigenvalue <= 1.0 + 1e-8


def validate(channel: KrausMap) -> ValidationReport:
    K = channel.ops
    S = np.einsum("kji,kjl->il", K.conj(), K)
    dev = float(np.linalg.norm(S - np.eye(channel.dim)))
    lam = float(np.linalg.eigvalsh(0.5 * (S + S.conj().T))[-1])
    return ValidationReport(tp_deviation=dev, cp_ok=True, max_eigenvalue=lam)


# --- JSON -----------------------------------------------------------------

def encode_matrix(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M, dtype=complex)]


def decode_matrix(rows, shape: tuple[int, int], where: str) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != shape[0]:
        raise SchemaError(f"{where}: expected a list of {shape[0]} rows")
    out = np.empty(shape, dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != shape[1]:
            raise SchemaError(f"{where}[{i}]: expected a list of {shape[1]} entries")
        for j, z in enumerate(row):
            if (
                not isinstance(z, list)
                or len(z) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in z)
            ):
                raise SchemaError(f"{where}[{i}][{j}]: expected [re, im]")
            if not (np.isfinite(z[0]) and np.isfinite(z[1])):
                raise SchemaError(f"{where}[{i}][{j}]: non-finite value")
            out[i, j] = complex(z[0], z[1])
    return out


def kraus_to_json(channel: KrausMap) -> dict:
    return {"n": channel.dim, "label": channel.label, "kraus": [encode_matrix(K) for K in channel.ops]}


def kraus_from_json(doc, *, warn_tol: float = FILE_TP_WARN) -> KrausMap:
    if not isinstance(doc, dict):
        raise SchemaError("document: expected a JSON object")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("n: expected a positive integer")
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise SchemaError("label: expected a string")
    kraus = doc.get("kraus")
    if not isinstance(kraus, list) or not kraus:
        raise SchemaError("kraus: expected a non-empty list of matrices")
    ops = np.stack([decode_matrix(K, (n, n), f"kraus[{i}]") for i, K in enumerate(kraus)])
    dev = tp_deviation(ops)
    if dev > warn_tol:
        warnings.warn(f"loaded Kraus map {label!r} deviates from trace preservation by {dev:.3e}", stacklevel=2)
    return KrausMap(ops, label=label)


def save_kraus(channel: KrausMap, path) -> None:
    text = json.dumps(kraus_to_json(channel), allow_nan=False)
    Path(path).write_text(text, encoding="utf-8")


def load_kraus(path) -> KrausMap:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"document: invalid JSON ({exc})") from exc
    return kraus_from_json(doc)
