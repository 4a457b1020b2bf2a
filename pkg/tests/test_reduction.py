import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from memkernel.errors import BudgetViolation, DimensionCap, GainViolation, MemKernelError
from memkernel.forge import SemigroupFamily, assemble_kernel, build_q_dephasing
from memkernel.grid import TimeGrid
from memkernel.markov import NonHermitianHam
from memkernel.propagate import renewal_solve, volterra_solve
from memkernel.reduction import (DecoherenceModel, TotalModel, contraction_defect,
                                 decoherence_spectral, decoherence_x, lift, reduce,
                                 reduced_family, sqrt_gain_q, ww_limit_family)
from memkernel.superop import PAULI, is_cp, left, right, sandwich

KET0 = np.array([1.0, 0.0])


def coupled_qubits(g=0.3, wS=1.0, wR=0.7):
    H = (0.5 * wS * np.kron(PAULI["Z"], np.eye(2)) + 0.5 * wR * np.kron(np.eye(2), PAULI["Z"])
         + g * np.kron(PAULI["X"], PAULI["X"]))
    return TotalModel(2, 2, H, KET0)


def decoherence_model():
    return DecoherenceModel([0.0, 1.0], 0.15 * PAULI["Z"], [0.2 * PAULI["X"], 0.1 * PAULI["X"]],
                            KET0)


def test_total_model_validation():
    with pytest.raises(DimensionCap):
        TotalModel(2, 40, np.eye(80), np.eye(40)[0])
    with pytest.raises(MemKernelError):
        TotalModel(2, 2, np.triu(np.ones((4, 4))), KET0)
    with pytest.raises(MemKernelError):
        TotalModel(2, 2, np.eye(4), np.array([1.0, 1.0]))
    with pytest.raises(DimensionCap):
        DecoherenceModel([0.0], np.eye(33), [np.zeros((33, 33))], np.eye(33)[0])


def test_uncoupled_reduction_is_unitary(rng):
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    HS = A + A.conj().T
    HR = np.diag([0.3, -0.8, 1.1])
    model = TotalModel(2, 3, np.kron(HS, np.eye(3)) + np.kron(np.eye(2), HR), np.eye(3)[1])
    fam = reduced_family(model)
    for t in (0.0, 0.6, 2.5):
        # the reservoir phase exp(+0.8 i t) factors out of n(t)
        np.testing.assert_allclose(reduce(model, t), np.exp(0.8j * t) * expm(-1j * t * HS),
                                   atol=1e-12)
        np.testing.assert_allclose(fam.n(t), reduce(model, t), atol=1e-12)
        np.testing.assert_allclose(fam.gain(t), 0, atol=1e-12)
    np.testing.assert_allclose(reduce(model, 0.0), np.eye(2), atol=1e-15)


def test_uncoupled_kernel_is_hamiltonian():
    HS = np.array([[0.4, 0.2], [0.2, -0.4]])
    model = TotalModel(2, 2, np.kron(HS, np.eye(2)), KET0)
    fam = reduced_family(model)
    K = assemble_kernel(fam, sqrt_gain_q(fam))
    LH = -1j * (left(HS) - right(HS))
    for s in (0.5, 1.0, 2.0):
        np.testing.assert_allclose(K.laplace(s), LH, atol=1e-8)


def test_coupled_reduction_is_a_strict_contraction_with_revivals():
    model = coupled_qubits()
    fam = reduced_family(model)
    times = np.linspace(0.05, 20, 400)
    for t in (0.3, 1.7, 6.0):
        np.testing.assert_allclose(fam.n(t), reduce(model, t), atol=1e-12)
    assert contraction_defect(fam, times) <= 1e-10
    norms = np.array([np.linalg.norm(fam.n(t), 2) for t in times])
    assert np.all(norms < 1.0)
    lows = np.array([np.linalg.svd(fam.n(t), compute_uv=False)[-1] for t in times])
    assert np.any(np.diff(lows) > 0) and np.any(np.diff(lows) < 0)


def test_reduced_rate_matches_finite_difference():
    fam = reduced_family(coupled_qubits())
    t, eps = 1.3, 1e-5
    fd = -(fam.n(t + eps) - fam.n(t - eps)) / (2 * eps)
    np.testing.assert_allclose(fam.nu(t), fd, atol=1e-8)
    fd_map = -(fam.at(t + eps) - fam.at(t - eps)) / (2 * eps)
    np.testing.assert_allclose(fam.rate(t), fd_map, atol=1e-8)


def test_lift_is_completely_positive():
    fam = reduced_family(coupled_qubits())
    for t in np.linspace(0, 5, 11):
        assert is_cp(fam.at(t))


def test_gain_of_normal_ww_family():
    X = np.diag([0.6, 1.4])
    h = np.diag([0.2, -0.5])
    fam = SemigroupFamily.wigner_weisskopf(NonHermitianHam(h, X))
    for t in (0.0, 0.8, 3.0):
        half = expm(-0.5 * X * t)
        G = half @ X @ half
        np.testing.assert_allclose(fam.gain(t), G, atol=1e-12)
        assert np.linalg.eigvalsh(G)[0] >= 0


def test_lift_reports_gain_sign_pattern():
    fam = reduced_family(decoherence_model().total_model())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _, rep = lift(fam, np.linspace(0, 5, 101))
    assert rep.ok and rep.first_violation is None
    with pytest.warns(GainViolation):
        _, rep = lift(fam, np.linspace(0, 40, 801))
    assert not rep.ok
    assert rep.first_violation > 5
    d = rep.to_dict()
    assert set(d) == {"times", "min_gain_eig", "tol", "ok", "first_violation"}


def test_coupled_qubits_gain_can_fail():
    fam = reduced_family(coupled_qubits())
    with pytest.warns(GainViolation):
        _, rep = lift(fam, np.linspace(0, 20, 201))
    assert np.min(rep.min_eig) < 0


def test_sqrt_gain_q_is_normalized():
    fam = reduced_family(decoherence_model().total_model())
    Q = sqrt_gain_q(fam)
    times = np.linspace(0, 5, 26)
    assert Q.check_normalization(times=times) <= 1e-10
    assert all(is_cp(Q.at(t)) for t in times)


def test_decoherence_trivial_case():
    eps = np.array([0.0, 0.7, -1.2])
    model = DecoherenceModel(eps, np.zeros((2, 2)), [np.zeros((2, 2))] * 3, KET0)
    for t in (0.0, 1.0, 3.3):
        np.testing.assert_allclose(decoherence_x(model, t), np.exp(-1j * eps * t), atol=1e-14)


@given(st.floats(0.0, 2.0), st.floats(-1.0, 1.0), st.floats(0.0, 10.0))
@settings(max_examples=30)
def test_decoherence_qubit_reservoir_closed_form(wR, g, t):
    eps = 0.4
    model = DecoherenceModel([eps], 0.5 * wR * PAULI["Z"], [g * PAULI["X"]], KET0)
    # <0| exp(-i (a Z + g X) t) |0> = cos(r t) - i (a / r) sin(r t), r = sqrt(a^2 + g^2)
    a = 0.5 * wR
    r = np.hypot(a, g)
    inner = np.cos(r * t) - 1j * (a / r if r else 0.0) * np.sin(r * t)
    ref = np.exp(-1j * eps * t) * inner
    assert abs(decoherence_x(model, t)[0] - ref) <= 1e-12
    assert abs(decoherence_spectral(model).at(t)[0] - ref) <= 1e-12


def test_decoherence_spectral_family_matches_lift():
    model = decoherence_model()
    spec = decoherence_spectral(model)
    dep = spec.family()
    red = reduced_family(model.total_model())
    for t in np.linspace(0, 8, 17):
        np.testing.assert_allclose(spec.at(t), decoherence_x(model, t), atol=1e-12)
        np.testing.assert_allclose(dep.at(t), red.at(t), atol=1e-12)
        n = dep.matrix(t)
        w = np.linalg.eigvalsh(n)
        assert w[0] >= -1e-12 and np.sum(w > 1e-10) == 1
        x = spec.at(t)
        np.testing.assert_allclose(dep.dual_identity(t), np.diag(np.abs(x) ** 2), atol=1e-12)
    assert spec.max_modulus(np.linspace(0, 20, 41)) <= 1 + 1e-10


def test_ww_limit_examples():
    fam = ww_limit_family([0.3], [0.0], [1.0])
    for t in (0.0, 2.0, 9.0):
        assert abs(fam.at(t)[0]) == pytest.approx(1.0, abs=1e-14)
        assert fam.at(t)[0] == pytest.approx(np.exp(-0.3j * t), abs=1e-14)
    fam = ww_limit_family([0.0], [1.0], [1.0])
    for t in (0.5, 3.0):
        assert fam.at(t)[0] == pytest.approx(np.exp(-t), abs=1e-14)
    fam = ww_limit_family([0.8], [0.5], [1.0])
    assert abs(fam.at(60.0)[0]) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(BudgetViolation):
        ww_limit_family([0.0], [1.5], [1.0])


@given(st.floats(-2, 2), st.floats(0.2, 3.0), st.floats(0, 8))
@settings(max_examples=30)
def test_ww_limit_full_mass_is_exponential_decay(eps, gamma, t):
    x = ww_limit_family([eps], [gamma], [gamma]).at(t)[0]
    assert abs(x - np.exp(-(1j * eps + gamma) * t)) <= 1e-10


def ww_markov_trajectory(grid):
    spec = ww_limit_family([0.0, 1.0], [1.0, 0.6], [1.0, 0.6])
    N = spec.family()
    Q = build_q_dephasing(N, states=[np.diag([0.0, 1.0]), np.diag([1.0, 0.0])])
    return volterra_solve(assemble_kernel(N, Q), grid)


def test_ww_limit_chain_is_a_semigroup():
    grid = TimeGrid.span(4.0, 1e-3)
    traj = ww_markov_trajectory(grid)
    pts = [0.0, 0.5, 1.0, 1.5, 2.0]
    for t in pts:
        for s in pts:
            lhs = traj.at_time(t + s)
            rhs = traj.at_time(t) @ traj.at_time(s)
            assert np.max(np.abs(lhs - rhs)) <= 1e-6


def test_reduced_family_propagates_cptp():
    model = decoherence_model()
    fam = reduced_family(model.total_model())
    # the renewal quadrature is O(h^2); h = 1e-3 keeps the trace defect near 5e-9
    grid = TimeGrid.span(3.0, 1e-3)
    traj = renewal_solve(fam, sqrt_gain_q(fam), grid)
    ok = [is_cp(L, 1e-8) for L in traj.maps[::100]]
    assert all(ok)
    vec_id = np.eye(2).reshape(-1, order="F")
    assert np.max(np.abs(vec_id @ traj.maps - vec_id)) <= 1e-8


def test_lifted_family_is_sandwich_of_n():
    fam = reduced_family(coupled_qubits())
    t = 0.9
    np.testing.assert_allclose(fam.at(t), sandwich(fam.n(t)), atol=1e-14)
