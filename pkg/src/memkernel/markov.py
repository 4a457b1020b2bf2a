"""Markovian (GKSL) generators and the Wigner-Weisskopf propagator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import MemKernelError
from .superop import left, right, sandwich


def _herm_check(H, name, tol=1e-12):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise MemKernelError(f"{name} must be square")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol:
        raise MemKernelError(f"{name} is not Hermitian")
    return H


@dataclass(frozen=True)
class GKSLSpec:
    """Hamiltonian plus noise operators ``V_a`` of a Markovian generator."""

    hamiltonian: np.ndarray
    noise_ops: tuple = field(default_factory=tuple)

    def __post_init__(self):
        H = _herm_check(self.hamiltonian, "hamiltonian")
        ops = tuple(np.asarray(V, dtype=complex) for V in self.noise_ops)
        for V in ops:
            if V.shape != H.shape:
                raise MemKernelError(f"noise operator shape {V.shape} != {H.shape}")
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "noise_ops", ops)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class NonHermitianHam:
    """``C = H - (i/2) X`` stored through its Hermitian part and ``X >= 0``."""

    H: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        H = _herm_check(self.H, "H")
        X = _herm_check(self.X, "X")
        lo = np.linalg.eigvalsh(X)[0]
        if lo < -1e-12:
            raise MemKernelError(f"X must be positive semidefinite (min eig {lo:.3e})")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "X", X)

    @classmethod
    def from_matrix(cls, C):
        C = np.asarray(C, dtype=complex)
        return cls(0.5 * (C + C.conj().T), -1j * (C.conj().T - C))

    @property
    def C(self):
        return self.H - 0.5j * self.X

    @property
    def is_normal(self) -> bool:
        return np.allclose(self.H @ self.X, self.X @ self.H, atol=1e-12)

    def Z(self):
        """Superoperator ``rho -> i (C rho - rho C^dagger)``."""
        C = self.C
        return 1j * (left(C) - right(C.conj().T))


def weak_coupling_z(h, X) -> NonHermitianHam:
    """Normal Wigner-Weisskopf operator from ``z = i h + X/2`` (``C = -i z``).

    ``h`` and ``X`` must commute, as the weak-coupling limit guarantees.
    """
    ham = NonHermitianHam(h, X)
    if not ham.is_normal:
        raise MemKernelError("weak-coupling form requires [h, X] = 0")
    return ham


def build_gksl(spec: GKSLSpec):
    """Superoperator of ``-i[H, rho] + sum_a (V rho V^+ - {V^+ V, rho}/2)``."""
    H = spec.hamiltonian
    L = -1j * (left(H) - right(H))
    for V in spec.noise_ops:
        VdV = V.conj().T @ V
        L = L + sandwich(V) - 0.5 * (left(VdV) + right(VdV))
    return L


def split_bz(spec: GKSLSpec):
    """Return ``(B, Z, C)`` with ``L = B - Z`` and ``B#(I) = Z#(I) = X``.

    ``B`` is the Kraus part, ``C = H - (i/2) X`` with ``X = sum V^+ V``.
    """
    d = spec.dim
    B = np.zeros((d * d, d * d), dtype=complex)
    X = np.zeros((d, d), dtype=complex)
    for V in spec.noise_ops:
        B += sandwich(V)
        X += V.conj().T @ V
    ham = NonHermitianHam(spec.hamiltonian, 0.5 * (X + X.conj().T))
    return B, ham.Z(), ham


def semigroup_at(L, t: float):
    if t < 0:
        raise MemKernelError("semigroup defined for t >= 0 only")
    return expm(t * np.asarray(L))


def ww_propagator(C: NonHermitianHam, t: float):
    """``N_t rho = exp(-iCt) rho exp(iC^+ t)``."""
    if t < 0:
        raise MemKernelError("propagator defined for t >= 0 only")
    return sandwich(expm(-1j * C.C * t))


def ww_inverse(C: NonHermitianHam, t: float):
    """``N_t^{-1} rho = exp(iCt) rho exp(-iC^+ t)``, itself completely positive."""
    if t < 0:
        raise MemKernelError("propagator defined for t >= 0 only")
    return sandwich(expm(1j * C.C * t))


def ww_dual_identity(C: NonHermitianHam, t: float):
    """``N_t#(I) = exp(iC^+ t) exp(-iCt)``; equals ``exp(-Xt)`` for normal C."""
    U = expm(-1j * C.C * t)
    return U.conj().T @ U


def ww_gain(C: NonHermitianHam, t: float):
    """``-d/dt N_t#(I) = exp(iC^+ t) X exp(-iCt)``, positive semidefinite."""
    U = expm(-1j * C.C * t)
    G = U.conj().T @ C.X @ U
    return 0.5 * (G + G.conj().T)
