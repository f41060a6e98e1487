import numpy as np
import pytest

from qecopt.channels import NoiseSpec, build_noise, identity_channel
from qecopt.codes import haar_isometry, known_code
from qecopt.gradients import (
    egrad_cost_J,
    egrad_cost_J_reg,
    egrad_l1,
    egrad_recovery,
    egrad_trace_pinvsqrt,
    egrad_trace_projector,
    fd_oracle,
    relative_error,
)
from qecopt.linalg import psd_pinv_sqrt
from qecopt.qec import CodeFrame, cost_J, cost_J_reg, l1_norm, petz_stack, recovery_cost
from qecopt.stiefel import canonical_norm, riemannian_grad

from conftest import random_noise

BITFLIP = build_noise(NoiseSpec("bitflip_full", qubits=3, p=0.25))
AMPDAMP = build_noise(NoiseSpec("ampdamp_full", qubits=4, p=0.25))


def cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_fd_oracle_examples(rng):
    X = cgauss(rng, 3, 2)
    assert np.allclose(fd_oracle(lambda V: 3.0, X), 0)
    G = fd_oracle(lambda V: float(np.linalg.norm(V) ** 2), X)
    assert np.allclose(G, 2 * X, atol=1e-8)
    with pytest.raises(ValueError):
        fd_oracle(lambda V: 0.0, X, h=1e-2)


def test_trace_projector_examples(rng):
    U = haar_isometry(5, 2, rng)
    assert np.allclose(egrad_trace_projector(np.eye(5), U), 2 * U)
    assert np.allclose(egrad_trace_projector(np.zeros((5, 5)), U), 0)
    A = cgauss(rng, 5, 5)
    fd = fd_oracle(lambda V: float(np.real(np.trace(A @ V @ V.conj().T))), U)
    assert relative_error(egrad_trace_projector(A, U), fd) < 1e-7


@pytest.mark.parametrize("noise", [BITFLIP, AMPDAMP], ids=["bitflip", "ampdamp"])
def test_trace_pinvsqrt_matches_fd(rng, noise):
    U = haar_isometry(noise.dim, 2, rng)
    B = cgauss(rng, noise.dim, noise.dim)
    A = B + B.conj().T

    def f(V):
        P = np.einsum("kab,bc,kdc->ad", noise.ops, V @ V.conj().T, noise.ops.conj())
        return float(np.real(np.trace(A @ psd_pinv_sqrt(P))))

    assert relative_error(egrad_trace_pinvsqrt(A, noise, U), fd_oracle(f, U)) < 1e-6


@pytest.mark.parametrize("noise", [BITFLIP, AMPDAMP], ids=["bitflip", "ampdamp"])
def test_cost_gradient_matches_fd(rng, noise):
    errs = []
    for _ in range(20):
        U = haar_isometry(noise.dim, 2, rng)
        errs.append(egrad_cost_J(noise, U, verify=True).fd_relative_error)
    assert max(errs) < 1e-6


def test_cost_gradient_random_channels(rng):
    for _ in range(10):
        N = random_noise(rng)
        d = int(rng.integers(1, 3))
        assert egrad_cost_J(N, haar_isometry(N.dim, d, rng), verify=True).fd_relative_error < 1e-6


@pytest.mark.parametrize("d", [1, 2])
def test_cost_gradient_rank_deficient(rng, d):
    # bit-flip on 3 qubits: m d < n leaves N(Pi) singular
    N = build_noise(NoiseSpec("bitflip_independent", qubits=3, p=0.3))
    for _ in range(5):
        U = haar_isometry(8, d, rng)
        rep = egrad_cost_J(N, U, verify=True)
        assert rep.fd_relative_error < 1e-6


def test_identity_channel_is_critical(rng):
    U = haar_isometry(6, 2, rng)
    G = egrad_cost_J(identity_channel(6), U).egrad
    assert canonical_norm(U, riemannian_grad(U, G)) < 1e-10


def test_identity_channel_block_projector():
    # J = |tr Pi|^2 in a neighbourhood of Pi, gradient 2 d U -> 2 d Pi on the block
    U = np.eye(4)[:, :2].astype(complex)
    G = egrad_cost_J(identity_channel(4), U).egrad
    assert np.allclose(G @ U.conj().T, 4 * U @ U.conj().T, atol=1e-10)


def test_repetition_code_is_critical():
    N = build_noise(NoiseSpec("bitflip_independent", qubits=3, p=0.25))
    U = known_code("repetition3").frame.U
    G = egrad_cost_J(N, U).egrad
    assert canonical_norm(U, riemannian_grad(U, G)) < 1e-6


def test_op_count_depolarizing():
    N = build_noise(NoiseSpec("depolarizing_independent", qubits=5, p=0.1))
    rep = egrad_cost_J(N, known_code("laflamme5").frame)
    assert N.m == 16 and rep.n_traces == 256 and rep.n_sylvester == 1
    assert np.all(np.isfinite(rep.egrad))


def test_l1_gradient(rng):
    U = haar_isometry(8, 2, rng)
    lam = 0.3
    fd = fd_oracle(lambda V: lam * l1_norm(V), U)
    assert relative_error(egrad_l1(U, lam), fd) < 1e-6
    V = np.eye(4)[:, :2].astype(complex)
    g = egrad_l1(V, 1.0)
    assert np.allclose(g, V)  # zero entries contribute the zero subgradient
    with pytest.raises(ValueError):
        egrad_l1(U, -0.1)


@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_regularized_gradient(rng, sign):
    U = haar_isometry(8, 2, rng)
    G = egrad_cost_J_reg(BITFLIP, U, 0.05, l1_sign=sign)
    fd = fd_oracle(lambda V: cost_J_reg(BITFLIP, V, 0.05, l1_sign=sign), U)
    assert relative_error(G, fd) < 1e-6


@pytest.mark.parametrize("noise", [BITFLIP, AMPDAMP], ids=["bitflip", "ampdamp"])
def test_recovery_gradient_matches_fd(rng, noise):
    n, m = noise.dim, noise.m
    for _ in range(20):
        code = CodeFrame(haar_isometry(n, 2, rng))
        R = haar_isometry(m * n, n, rng)
        G = egrad_recovery(noise, code, R)
        assert G.shape == (m * n, n)
        if n > 8:
            # FD over a 256 x 16 stack is slow; check directional derivatives instead
            for _ in range(3):
                E = cgauss(rng, *R.shape)
                h = 1e-6
                fd = (recovery_cost(noise, code, R + h * E) - recovery_cost(noise, code, R - h * E)) / (2 * h)
                assert abs(np.real(np.vdot(G, E)) - fd) < 1e-6 * max(1.0, abs(fd))
        else:
            fd = fd_oracle(lambda X: recovery_cost(noise, code, X), R)
            assert relative_error(G, fd) < 1e-6


def test_petz_is_critical_for_correctable_pairing():
    N = build_noise(NoiseSpec("bitflip_independent", qubits=3, p=0.25))
    code = known_code("repetition3").frame
    S = petz_stack(N, code)
    G = egrad_recovery(N, code, S)
    assert canonical_norm(S.R_hat, riemannian_grad(S.R_hat, G)) < 1e-6
    assert np.isclose(cost_J(N, code), recovery_cost(N, code, S))
