import numpy as np
import pytest

from qecopt.channels import NoiseSpec, build_noise
from qecopt.codes import KNOWN_CODES, haar_isometry, ket_label, known_code, random_code, sparsity_report
from qecopt.qec import code_from_json, code_to_json, knill_laflamme_check


def test_repetition3():
    U = known_code("repetition3").frame.U
    assert np.array_equal(U[:, 0], np.eye(8)[0]) and np.array_equal(U[:, 1], np.eye(8)[7])


def test_leung4_amplitudes():
    U = known_code("leung4").frame.U
    for c in range(2):
        nz = np.abs(U[:, c])[np.abs(U[:, c]) > 0]
        assert len(nz) == 2 and np.allclose(nz, 1 / np.sqrt(2))


def test_laflamme5_amplitudes():
    U = known_code("laflamme5").frame.U
    for c in range(2):
        nz = np.abs(U[:, c])[np.abs(U[:, c]) > 0]
        assert len(nz) == 8 and np.allclose(nz, 1 / (2 * np.sqrt(2)))


@pytest.mark.parametrize("name", KNOWN_CODES)
def test_fixtures_normalized(name):
    nc = known_code(name)
    U = nc.frame.U
    assert np.linalg.norm(U.conj().T @ U - np.eye(2)) < 1e-12
    assert np.allclose(np.sum(np.abs(U) ** 2, axis=0), 1, atol=1e-12)
    assert nc.source


def test_fixtures_certify():
    bf = build_noise(NoiseSpec("bitflip_independent", qubits=3, p=0.25))
    assert knill_laflamme_check(bf, known_code("repetition3").frame).correctable
    dep = build_noise(NoiseSpec("depolarizing_independent", qubits=5, p=0.3))
    for name in ("laflamme5", "bennett5"):
        assert knill_laflamme_check(dep, known_code(name).frame).correctable


def test_unknown_code():
    with pytest.raises(KeyError):
        known_code("steane7")


def test_fixture_json_roundtrip():
    for name in KNOWN_CODES:
        F = known_code(name).frame
        assert np.array_equal(code_from_json(code_to_json(F)).U, F.U)


def test_random_code():
    U = random_code(5, 5, 3).U
    assert np.linalg.norm(U.conj().T @ U - np.eye(5)) < 1e-12
    assert np.array_equal(random_code(8, 2, 7).U, random_code(8, 2, 7).U)
    for s in range(100):
        assert np.linalg.norm(random_code(8, 2, s).U - random_code(8, 2, s + 1000).U) > 1e-3
    with pytest.raises(ValueError):
        haar_isometry(2, 3, np.random.default_rng(0))


def test_ket_label():
    assert ket_label(3, 8) == "|011>"
    assert ket_label(0, 16) == "|0000>"
    assert ket_label(4, 6) == "|4>"


def test_sparsity_report_examples():
    rep = sparsity_report(known_code("repetition3").frame, 1e-6)
    assert rep == [[("|000>", 1.0)], [("|111>", 1.0)]]
    rep = sparsity_report(known_code("leung4").frame)
    assert [len(c) for c in rep] == [2, 2]
    assert rep[1][0][0] in ("|0011>", "|1100>") and np.isclose(rep[1][0][1], 0.7071, atol=1e-4)
    with pytest.raises(ValueError):
        sparsity_report(known_code("leung4").frame, -1)


def test_sparsity_report_sorted_and_complete(rng):
    U = haar_isometry(16, 2, rng)
    for col in sparsity_report(U, 0.0):
        mags = [a for _, a in col]
        assert mags == sorted(mags, reverse=True)
        assert abs(sum(a * a for a in mags) - 1) < 1e-9
