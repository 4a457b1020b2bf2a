import numpy as np
import pytest

from memkernel.densities import WaitingDensity
from memkernel.forge import ScalarFamily, assemble_kernel, build_q_channel
from memkernel.superop import PAULI, kraus_to_super, sandwich

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)


def random_density(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def random_kraus(rng, d, n_ops=3):
    """Kraus operators of a random CPTP map (isometry slices)."""
    G = rng.normal(size=(n_ops * d, d)) + 1j * rng.normal(size=(n_ops * d, d))
    V, _ = np.linalg.qr(G)
    return [V[k * d:(k + 1) * d] for k in range(n_ops)]


def random_channel(rng, d, n_ops=3):
    return kraus_to_super(random_kraus(rng, d, n_ops))


def bitflip_exact(kappa, gamma, t):
    """Closed-form map for f = kappa exp(-gamma t) composed with the bit flip."""
    B = sandwich(PAULI["X"])
    e = (gamma - kappa) / (gamma + kappa) + 2 * kappa / (gamma + kappa) * np.exp(-(gamma + kappa) * t)
    return np.eye(4) * (1 + e) / 2 + B * (1 - e) / 2


def scalar_pair(kappa=0.5, gamma=1.0, channel=None):
    N = ScalarFamily(WaitingDensity([kappa], [gamma]), 2)
    B = sandwich(PAULI["X"]) if channel is None else channel
    Q = build_q_channel(B, N)
    return N, Q, assemble_kernel(N, Q)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bitflip_pair():
    return scalar_pair(0.5, 1.0)
