"""Known code fixtures, Haar-random frames and codeword sparsity reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import thin_qr
from .qec import CodeFrame, as_frame

__all__ = ["NamedCode", "KNOWN_CODES", "known_code", "random_code", "haar_isometry", "sparsity_report", "ket_label"]


@dataclass(frozen=True)
class NamedCode:
    name: str
    frame: CodeFrame
    source: str


def _ket(bits: str) -> int:
    return int(bits, 2)


def _codeword(nqubits: int, terms: list[tuple[float, str]]) -> np.ndarray:
    v = np.zeros(2**nqubits, dtype=complex)
    for amp, bits in terms:
        v[_ket(bits)] += amp
    return v


def _signed(scale: float, listing: str) -> list[tuple[float, str]]:
    # "+00000 -00011 ..." -> [(scale, "00000"), (-scale, "00011"), ...]
    out = []
    for tok in listing.split():
        sign = -1.0 if tok[0] == "-" else 1.0
        out.append((sign * scale, tok.lstrip("+-")))
    return out


_BENNETT_0 = (
    "+00000 -00011 +00101 -00110 +01001 +01010 -01100 -01111 "
    "-10001 +10010 +10100 -10111 -11000 -11011 -11101 -11110"
)
_BENNETT_1 = (
    "-00001 -00010 -00100 -00111 -01000 +01011 +01101 -01110 "
    "-10000 -10011 +10101 +10110 -11001 +11010 -11100 +11111"
)
# The printed listing has no sign in front of 01111, 11100 and 10110. Of the
# eight possible readings only "-" on all three passes the Knill-Laflamme
# check against independent depolarizing noise, so that is what is used.
_LAFLAMME_0 = "+00000 -00110 -01001 -01111 +10011 -10101 -11010 -11100"
_LAFLAMME_1 = "+00011 +00101 +01010 -01100 -10000 -10110 -11001 +11111"


def _build(name: str) -> NamedCode:
    s2 = 1.0 / np.sqrt(2.0)
    if name == "repetition3":
        cols = [_codeword(3, [(1.0, "000")]), _codeword(3, [(1.0, "111")])]
        source = "three-qubit bit-flip repetition code {|000>, |111>}"
    elif name == "leung4":
        cols = [
            _codeword(4, [(s2, "0000"), (s2, "1111")]),
            _codeword(4, [(s2, "0011"), (s2, "1100")]),
        ]
        source = "Leung et al. 1997, approximate four-qubit amplitude-damping code"
    elif name == "bennett5":
        cols = [_codeword(5, _signed(0.25, _BENNETT_0)), _codeword(5, _signed(0.25, _BENNETT_1))]
        source = "Bennett et al. 1996, perfect five-qubit code"
    elif name == "laflamme5":
        a = 1.0 / (2.0 * np.sqrt(2.0))
        cols = [_codeword(5, _signed(a, _LAFLAMME_0)), _codeword(5, _signed(a, _LAFLAMME_1))]
        source = "Laflamme et al. 1996, perfect five-qubit code"
    else:
        raise KeyError(f"unknown code {name!r}; known: {', '.join(KNOWN_CODES)}")
    return NamedCode(name=name, frame=CodeFrame(np.stack(cols, axis=1)), source=source)


KNOWN_CODES = ("repetition3", "leung4", "bennett5", "laflamme5")


def known_code(name: str) -> NamedCode:
    return _build(name)


def haar_isometry(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Q factor of an ``n x d`` complex Gaussian matrix (Haar distributed)."""
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got n={n}, d={d}")
    Z = (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / np.sqrt(2.0)
    Q, _ = thin_qr(Z)
    return Q


def random_code(n: int, d: int, seed: int) -> CodeFrame:
    return CodeFrame(haar_isometry(n, d, np.random.default_rng(seed)))


def ket_label(index: int, n: int) -> str:
    """Binary ket for qubit registers (site 1 leftmost), plain index otherwise."""
    if n > 1 and n & (n - 1) == 0:
        return "|" + format(index, f"0{n.bit_length() - 1}b") + ">"
    return f"|{index}>"


def sparsity_report(code, threshold: float = 1e-3) -> list[list[tuple[str, float]]]:
    """Per codeword, the basis kets whose amplitude magnitude exceeds ``threshold``,
    largest first."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    U = as_frame(code).U
    n = U.shape[0]
    report = []
    for c in range(U.shape[1]):
        mags = np.abs(U[:, c])
        idx = [i for i in np.argsort(-mags, kind="stable") if mags[i] > threshold]
        report.append([(ket_label(int(i), n), float(mags[i])) for i in idx])
    return report
