import numpy as np
import pytest

from qecopt.channels import KrausMap, NoiseSpec, build_noise
from qecopt.codes import haar_isometry

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int | str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# small noise models used across test modules: (family, qubits)
SMALL_FAMILIES = [
    ("bitflip_independent", 3),
    ("bitflip_correlated_toy", 3),
    ("bitflip_full", 3),
    ("ampdamp_independent", 3),
    ("ampdamp_full", 3),
    ("depolarizing_independent", 2),
    ("depolarizing_full", 2),
]


def random_noise(rng: np.random.Generator, families=SMALL_FAMILIES) -> KrausMap:
    fam, nq = families[rng.integers(len(families))]
    p = float(rng.uniform(0.05, 0.45))
    q = float(rng.uniform(0.0, 1.0))
    return build_noise(NoiseSpec(fam, qubits=nq, p=p, q=q))


def random_kraus(rng: np.random.Generator, n: int, m: int) -> KrausMap:
    """Random TP map: blocks of a Haar isometry of shape (m n) x n."""
    V = haar_isometry(m * n, n, rng)
    return KrausMap(V.reshape(m, n, n), label=f"random({m})")


def random_density(rng: np.random.Generator, d: int) -> np.ndarray:
    B = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = B @ B.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
