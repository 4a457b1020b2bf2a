import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm

from memkernel.densities import WaitingDensity
from memkernel.errors import (BudgetViolation, MemKernelError, NormalizationMismatch, NotAChannel,
                              NotDissipative, NotPSD, SingularLaplace, SingularNormalization,
                              TraceMismatch)
from memkernel.expsum import ExpSum
from memkernel.forge import (DephasingFamily, ScalarFamily, SemigroupFamily, alt_normalize,
                             assemble_kernel, build_q_channel, build_q_dephasing, build_q_kraus,
                             hadamard_family, z_family)
from memkernel.forge.families import hadamard_entry_direct
from memkernel.forge.qfamily import ChannelQ
from memkernel.markov import NonHermitianHam
from memkernel.superop import (PAULI, apply, depolarizing, dual, identity_super, is_cp, sandwich,
                               transposition, unital_defect)

from conftest import random_channel, random_density

S_VALUES = [0.5, 1.0, 2.0]
X1 = np.array([[-0.5, 0.3], [-0.3, -0.2]])
X2 = np.array([[-0.3, 0.2j], [0.2j, -0.6]])
OMEGA = np.diag([0.7, 0.3])


def decay_family(a, b):
    """Dephasing family from X_1 = -a/2 I, X_2 = -b/2 I: n_ij = exp(-(a_i + a_j) t / 2)."""
    return hadamard_family([-0.5 * a * np.eye(2), -0.5 * b * np.eye(2)], np.eye(2) / 2)


def hadamard_pair():
    N = hadamard_family([X1, X2], OMEGA)
    return N, build_q_dephasing(N, states=[np.diag([0.0, 1.0]), np.diag([1.0, 0.0])])


def test_z_family_examples():
    Z = z_family(SemigroupFamily(np.zeros((4, 4))))
    np.testing.assert_allclose(Z(1.0), 0, atol=1e-14)
    gamma = 1.3
    Z = z_family(ScalarFamily(WaitingDensity.exponential(gamma), 2))
    for s in S_VALUES:
        np.testing.assert_allclose(Z(s), gamma * np.eye(4), atol=1e-12)


def test_z_family_dephasing_entries_and_consistency():
    N = hadamard_family([X1, X2], OMEGA)
    Z = z_family(N)
    for s in S_VALUES:
        n = N.laplace_matrix(s)
        ref = ((1 - s * n) / n).reshape(-1, order="F")
        np.testing.assert_allclose(Z(s), np.diag(ref), atol=1e-12)
        np.testing.assert_allclose(np.linalg.inv(s * np.eye(4) + Z(s)), N.laplace(s), atol=1e-10)


def test_z_family_singular():
    with pytest.raises(SingularLaplace):
        z_family(SemigroupFamily(np.zeros((4, 4))))(0.0)


@pytest.mark.parametrize("channel", ["identity", "depolarizing", "bit_flip"])
def test_channel_q_examples(channel):
    B = {"identity": identity_super(2), "depolarizing": depolarizing(2),
         "bit_flip": sandwich(PAULI["X"])}[channel]
    w = WaitingDensity([0.5], [1.0])
    F = ScalarFamily(w, 2)
    Q = build_q_channel(B, F)
    rho = random_density(np.random.default_rng(3), 2)
    for t in (0.0, 0.7, 2.0):
        np.testing.assert_allclose(Q.at(t), w.f(t) * B, atol=1e-14)
        np.testing.assert_allclose(unital_defect(Q.at(t), raw=True), w.f(t) * np.eye(2), atol=1e-14)
    if channel == "bit_flip":
        np.testing.assert_allclose(apply(Q.at(1.0), rho), w.f(1.0) * PAULI["X"] @ rho @ PAULI["X"],
                                   atol=1e-14)
    for s in S_VALUES:
        np.testing.assert_allclose(Q.laplace(s), w.laplace(s) * B, atol=1e-12)


def test_channel_q_rejects_non_channels():
    F = ScalarFamily(WaitingDensity.exponential(1.0), 2)
    with pytest.raises(NotAChannel):
        build_q_channel(0.5 * identity_super(2), F)
    with pytest.raises(NotAChannel):
        build_q_channel(transposition(2), F)
    with pytest.raises(NotAChannel):
        build_q_channel(np.eye(9), F)


def test_kraus_q_examples():
    w = WaitingDensity([0.5], [1.0])
    F = ScalarFamily(w, 2)
    Q = build_q_kraus(lambda t: [np.sqrt(w.f(t)) * np.eye(2)], F)
    np.testing.assert_allclose(Q.at(0.4), w.f(0.4) * identity_super(2), atol=1e-14)
    with pytest.raises(NormalizationMismatch) as info:
        build_q_kraus(lambda t: [1.1 * np.sqrt(w.f(t)) * np.eye(2)], F)
    assert info.value.deviation == pytest.approx(0.21 * w.f(0.0), rel=1e-6)

    a, b = 0.8, 1.6
    N = decay_family(a, b)
    P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    Q = build_q_kraus(lambda t: [np.sqrt(a * np.exp(-a * t)) * P0, np.sqrt(b * np.exp(-b * t)) * P1], N)
    assert Q.check_normalization() <= 1e-12
    assert is_cp(Q.at(0.5))


def test_dephasing_q_examples():
    N = decay_family(0.8, 1.6)
    Q1 = build_q_dephasing(N, states=[np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    Q2 = build_q_dephasing(N, states=[np.eye(2) / 2, np.eye(2) / 2])
    for Q in (Q1, Q2):
        for t in (0.0, 0.5, 3.0):
            assert is_cp(Q.at(t))
        assert Q.check_normalization() <= 1e-12
    assert np.count_nonzero(Q1.at(0.5) - np.diag(np.diag(Q1.at(0.5)))) == 0
    with pytest.raises(NotPSD):
        build_q_dephasing(N, states=[np.diag([1.2, -0.2]), np.diag([0.0, 1.0])])
    with pytest.raises(TraceMismatch):
        build_q_dephasing(N, states=[np.diag([0.5, 0.0]), np.diag([0.0, 1.0])])


def test_dephasing_q_block_form_matches_state_form():
    N = decay_family(0.8, 1.6)
    states = [np.array([[0.5, 0.2], [0.2, 0.5]]), np.diag([0.3, 0.7])]
    Qs = build_q_dephasing(N, states=states)
    Qc = build_q_dephasing(N, c=lambda t: [f * st for f, st in
                                           zip(np.diag(N.rate_matrix(t)), states)])
    for t in (0.2, 1.1):
        np.testing.assert_allclose(Qs.at(t), Qc.at(t), atol=1e-14)
    np.testing.assert_allclose(Qs.laplace(1.0), Qc.laplace(1.0), atol=1e-9)


def test_hadamard_examples():
    N = hadamard_family([np.zeros((2, 2)), np.zeros((2, 2))], OMEGA)
    np.testing.assert_allclose(N.matrix(2.0), np.ones((2, 2)), atol=1e-14)
    np.testing.assert_allclose(N.rate(2.0), 0, atol=1e-14)
    gamma = 0.9
    N = hadamard_family([np.zeros((2, 2)), -0.5 * gamma * np.eye(2)], OMEGA)
    t = 1.4
    n = N.matrix(t)
    assert n[0, 1] == pytest.approx(np.exp(-gamma * t / 2))
    assert n[1, 1] == pytest.approx(np.exp(-gamma * t))


def test_hadamard_skew_case_has_no_decay(rng):
    Hs = []
    for _ in range(2):
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        Hs.append(A + A.conj().T)
    N = hadamard_family([-1j * H for H in Hs], OMEGA)
    for t in np.linspace(0, 5, 11):
        assert np.max(np.abs(N.matrix(t))) <= 1 + 1e-12
        np.testing.assert_allclose(np.diag(N.rate_matrix(t)), 0, atol=1e-12)


def test_hadamard_matches_direct_exponentials_and_is_psd():
    N = hadamard_family([X1, X2], OMEGA)
    for t in np.linspace(0, 10, 21):
        np.testing.assert_allclose(N.matrix(t), hadamard_entry_direct([X1, X2], OMEGA, t),
                                   atol=1e-12)
        assert np.linalg.eigvalsh(N.matrix(t))[0] >= -1e-12
        assert np.min(np.diag(N.rate_matrix(t)).real) >= -1e-12
        assert is_cp(N.at(t))


def test_hadamard_warns_for_non_dissipative():
    with pytest.warns(NotDissipative):
        hadamard_family([np.eye(2) * 0.1, np.zeros((2, 2))], OMEGA)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        hadamard_family([X1, X2], OMEGA)


def test_assemble_trivial_kernel():
    N = SemigroupFamily(np.zeros((4, 4)))
    K = assemble_kernel(N, ChannelQ(identity_super(2), N))
    np.testing.assert_allclose(K.laplace(1.0), 0, atol=1e-14)
    np.testing.assert_allclose(K.delta, 0, atol=1e-14)


@given(st.floats(0.3, 3.0))
@settings(max_examples=15, deadline=None)
def test_full_mass_exponential_gives_markov_kernel(gamma):
    B = sandwich(PAULI["X"])
    N = ScalarFamily(WaitingDensity.exponential(gamma), 2)
    K = assemble_kernel(N, build_q_channel(B, N))
    np.testing.assert_allclose(K.delta, gamma * (B - np.eye(4)), atol=1e-10)
    assert K.is_delta_only


@pytest.mark.parametrize("kappa,gamma", [(0.5, 1.0), (0.2, 1.5), (1.0, 2.0)])
def test_partial_mass_exponential_kernel(kappa, gamma, rng):
    B = random_channel(rng, 2)
    N = ScalarFamily(WaitingDensity([kappa], [gamma]), 2)
    K = assemble_kernel(N, build_q_channel(B, N))
    D = B - np.eye(4)
    np.testing.assert_allclose(K.delta, kappa * D, atol=1e-10)
    t = np.array([0.0, 0.8, 3.0])
    ref = -kappa * (gamma - kappa) * np.exp(-(gamma - kappa) * t)[:, None, None] * D
    np.testing.assert_allclose(K.smooth(t), ref, atol=1e-10)


def test_semigroup_channel_kernel_is_b_minus_one_times_z(rng):
    ham = NonHermitianHam(np.diag([0.2, -0.4]), np.diag([0.5, 1.0]))
    N = SemigroupFamily.wigner_weisskopf(ham)
    B = random_channel(rng, 2)
    K = assemble_kernel(N, build_q_channel(B, N))
    np.testing.assert_allclose(K.delta, (B - np.eye(4)) @ ham.Z(), atol=1e-12)
    for s in S_VALUES:
        np.testing.assert_allclose(K.laplace(s), K.delta, atol=1e-10)


def _numeric_kernel_laplace(K, s):
    body, _ = quad_vec(lambda t: np.exp(-s * t) * K.smooth(t)[0], 0, np.inf, epsabs=1e-12,
                       epsrel=1e-10)
    return K.delta + body


@pytest.mark.parametrize("case", ["scalar", "hadamard"])
def test_kernel_laplace_consistency_and_trace(case, bitflip_pair):
    if case == "scalar":
        N, Q, K = bitflip_pair
    else:
        N, Q = hadamard_pair()
        K = assemble_kernel(N, Q)
    for s in S_VALUES:
        assert K.trace_defect(s) <= 1e-8
        np.testing.assert_allclose(_numeric_kernel_laplace(K, s), K.laplace(s), atol=1e-6)
        np.testing.assert_allclose(K.laplace_from_terms(s), K.laplace(s), atol=1e-9)


@pytest.mark.parametrize("case", ["scalar", "hadamard"])
def test_q_normalization_cancels_n_derivative(case, bitflip_pair):
    N, Q = bitflip_pair[:2] if case == "scalar" else hadamard_pair()
    eps = 1e-5
    for t in np.linspace(0.1, 5, 8):
        dN = (N.at(t + eps) - N.at(t - eps)) / (2 * eps)
        total = apply(dual(Q.at(t) + dN), np.eye(2))
        assert np.max(np.abs(total)) <= 1e-8


def test_assemble_rejects_unnormalized_q(bitflip_pair):
    N, Q, _ = bitflip_pair
    with pytest.raises(NormalizationMismatch):
        assemble_kernel(N, Q.scaled(1.1))


def test_dephasing_rate_is_cp_only_when_scalar():
    N = decay_family(0.8, 1.6)
    assert not any(is_cp(N.rate(t)) for t in np.linspace(0.1, 5, 10))
    N = hadamard_family([X1, X2], OMEGA)
    assert not all(is_cp(N.rate(t)) for t in np.linspace(0.1, 5, 10))
    w = WaitingDensity([0.5], [1.0])
    same = DephasingFamily([[w.survival] * 2] * 2)
    S = ScalarFamily(w, 2)
    for t in np.linspace(0.1, 5, 10):
        np.testing.assert_allclose(same.rate(t), S.rate(t), atol=1e-14)
        assert is_cp(S.rate(t))


def test_scalar_budget_is_enforced():
    with pytest.raises(BudgetViolation):
        ScalarFamily(WaitingDensity([1.5], [1.0]), 2)


def test_dephasing_family_requires_unit_start():
    with pytest.raises(MemKernelError):
        DephasingFamily([[ExpSum([0.5], [-1.0])]])


def test_alt_normalize_examples():
    Hz = np.diag([0.3, -0.2])
    U = SemigroupFamily.wigner_weisskopf(NonHermitianHam(Hz, np.zeros((2, 2))))
    np.testing.assert_allclose(alt_normalize(U, 1.2), U.at(1.2), atol=1e-12)
    w = WaitingDensity([0.5], [1.0])
    S = ScalarFamily(w, 2)
    np.testing.assert_allclose(alt_normalize(S, 1.2), S.at(1.2) / w.n(1.2), atol=1e-12)
    H = np.array([[0.5, 0.0], [0.0, -0.5]])
    ww = SemigroupFamily.wigner_weisskopf(NonHermitianHam(H, np.diag([0.4, 0.9])))
    t = 2.0
    M = alt_normalize(ww, t)
    np.testing.assert_allclose(M, sandwich(expm(-1j * H * t)), atol=1e-10)
    assert np.max(np.abs(unital_defect(M))) <= 1e-10
    assert is_cp(M)


def test_alt_normalize_singular():
    S = ScalarFamily(WaitingDensity.exponential(1.0), 2)
    with pytest.raises(SingularNormalization):
        alt_normalize(S, 60.0)
