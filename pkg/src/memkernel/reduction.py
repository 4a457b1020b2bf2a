"""Reduced system dynamics from a system+reservoir Hamiltonian.

For a pure reservoir state ``|w>`` the compressed propagator
``n_t = <w| exp(-i H t) |w>`` is a contraction on the system, and
``N_t rho = n_t rho n_t^+`` is a CP family to be normalized.  The
pure-decoherence model ``H = sum_k |k><k| (x) R_k`` makes ``n_t`` diagonal
with entries ``x_k(t) = <w| exp(-i R_k t) |w>``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, expm

from .errors import BudgetViolation, DimensionCap, GainViolation, MemKernelError
from .expsum import ExpSum
from .forge.families import DephasingFamily, ReducedFamily
from .forge.qfamily import KrausQ
from .superop import hermitian_sqrt

DIM_CAP = 64
RESERVOIR_CAP = 32


def _hermitian(H, name, tol=1e-12):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise MemKernelError(f"{name} must be square, got {H.shape}")
    dev = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if dev > tol:
        raise MemKernelError(f"{name} is not Hermitian (deviation {dev:.3e})")
    return 0.5 * (H + H.conj().T)


def _unit(v, name="reservoir state"):
    v = np.asarray(v, dtype=complex).ravel()
    if abs(np.linalg.norm(v) - 1) > 1e-12:
        raise MemKernelError(f"{name} must have unit norm, got {np.linalg.norm(v):.15g}")
    return v


@dataclass(frozen=True)
class TotalModel:
    """Hamiltonian on ``C^d_S (x) C^d_R`` and a pure reservoir state."""

    d_S: int
    d_R: int
    H_total: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        D = self.d_S * self.d_R
        if D > DIM_CAP:
            raise DimensionCap(f"total dimension {D} exceeds {DIM_CAP}")
        H = _hermitian(self.H_total, "H_total")
        if H.shape != (D, D):
            raise MemKernelError(f"H_total is {H.shape}, expected {(D, D)}")
        w = _unit(self.omega)
        if w.size != self.d_R:
            raise MemKernelError(f"reservoir state has length {w.size}, expected {self.d_R}")
        object.__setattr__(self, "H_total", H)
        object.__setattr__(self, "omega", w)

    @property
    def isometry(self):
        """``V = 1_S (x) |w>`` mapping the system into the total space."""
        return np.kron(np.eye(self.d_S), self.omega[:, None])


def reduce(model: TotalModel, t: float) -> np.ndarray:
    """``n(t)_ab = <a, w| exp(-i H t) |b, w>`` by a direct matrix exponential."""
    V = model.isometry
    return V.conj().T @ expm(-1j * t * model.H_total) @ V


def reduced_family(model: TotalModel) -> ReducedFamily:
    """Spectral form of ``n_t``; ``nu_t = -dn_t/dt`` is exact rather than differenced."""
    E, W = eigh(model.H_total)
    amps = (model.isometry.conj().T @ W).T
    return ReducedFamily(E, amps)


def contraction_defect(fam: ReducedFamily, times) -> float:
    """``max(||n_t||_2 - 1)`` over ``times``; non-positive for a contraction."""
    return float(max(np.linalg.norm(fam.n(t), 2) for t in times) - 1.0)


@dataclass
class GainReport:
    times: np.ndarray
    min_eig: np.ndarray
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.all(self.min_eig >= -self.tol))

    @property
    def first_violation(self):
        bad = np.nonzero(self.min_eig < -self.tol)[0]
        return float(self.times[bad[0]]) if len(bad) else None

    def to_dict(self):
        return {"times": [float(t) for t in self.times],
                "min_gain_eig": [float(x) for x in self.min_eig],
                "tol": self.tol, "ok": self.ok, "first_violation": self.first_violation}


def lift(fam, times, tol: float = 1e-10):
    """Gain check ``-N_t#(I) >= 0`` along ``times`` for a lifted family.

    Returns ``(fam, report)``; a violation is reported through a
    :class:`GainViolation` warning, not an exception.
    """
    times = np.asarray(times, dtype=float)
    rep = GainReport(times, fam.gain_min_eig(times), tol)
    if not rep.ok:
        warnings.warn(f"gain condition fails first at t = {rep.first_violation:g} "
                      f"(min eigenvalue {rep.min_eig.min():.3e})", GainViolation, stacklevel=2)
    return fam, rep


def sqrt_gain_q(fam) -> KrausQ:
    """Single-Kraus family ``Q_t rho = G_t^{1/2} rho G_t^{1/2}`` with ``G_t = -N_t#(I)``."""
    return KrausQ(lambda t: [hermitian_sqrt(fam.gain(t))], fam)


@dataclass(frozen=True)
class DecoherenceModel:
    """System energies ``eps``, reservoir Hamiltonian, couplings ``B_k`` and state ``|w>``."""

    energies: np.ndarray
    H_R: np.ndarray
    couplings: tuple
    omega: np.ndarray

    def __post_init__(self):
        eps = np.asarray(self.energies, dtype=float).ravel()
        H_R = _hermitian(self.H_R, "H_R")
        if H_R.shape[0] > RESERVOIR_CAP:
            raise DimensionCap(f"reservoir dimension {H_R.shape[0]} exceeds {RESERVOIR_CAP}")
        Bs = tuple(_hermitian(B, f"B_{k}") for k, B in enumerate(self.couplings))
        if len(Bs) != len(eps):
            raise MemKernelError(f"{len(eps)} energies but {len(Bs)} coupling operators")
        if any(B.shape != H_R.shape for B in Bs):
            raise MemKernelError("coupling operators must match the reservoir dimension")
        w = _unit(self.omega)
        if w.size != H_R.shape[0]:
            raise MemKernelError("reservoir state does not match H_R")
        object.__setattr__(self, "energies", eps)
        object.__setattr__(self, "H_R", H_R)
        object.__setattr__(self, "couplings", Bs)
        object.__setattr__(self, "omega", w)

    @property
    def reservoir_ops(self):
        """``R_k = eps_k 1 + H_R + B_k``."""
        eye = np.eye(self.H_R.shape[0])
        return [e * eye + self.H_R + B for e, B in zip(self.energies, self.couplings)]

    def total_model(self) -> TotalModel:
        d = len(self.energies)
        dR = self.H_R.shape[0]
        H = sum(np.kron(np.diag(np.eye(d)[k]), R) for k, R in enumerate(self.reservoir_ops))
        return TotalModel(d, dR, H, self.omega)


def decoherence_x(model: DecoherenceModel, t: float) -> np.ndarray:
    """``x_k(t) = <w| exp(-i R_k t) |w>`` by reservoir-space exponentials."""
    w = model.omega
    return np.array([w.conj() @ expm(-1j * t * R) @ w for R in model.reservoir_ops])


@dataclass
class SpectralN:
    """Diagonal reduced propagator ``n_t |k> = x_k(t) |k>`` with ExpSum entries."""

    x: list

    def __post_init__(self):
        for k, xk in enumerate(self.x):
            if abs(xk.at_zero() - 1) > 1e-12:
                raise MemKernelError(f"x_{k}(0) != 1")

    def at(self, t):
        return np.array([xk(t) for xk in self.x])

    def family(self) -> DephasingFamily:
        """Dephasing family ``n_kl = x_k conj(x_l)``."""
        return DephasingFamily([[xk * xl.conj() for xl in self.x] for xk in self.x])

    def max_modulus(self, times) -> float:
        return float(max(np.max(np.abs(self.at(t))) for t in times))


def decoherence_spectral(model: DecoherenceModel) -> SpectralN:
    """Closed form ``x_k(t) = sum_m |<w|r_m>|^2 exp(-i r_m t)`` from the spectrum of ``R_k``."""
    xs = []
    for R in model.reservoir_ops:
        r, U = eigh(R)
        weights = np.abs(U.conj().T @ model.omega) ** 2
        xs.append(ExpSum(weights, -1j * r, drop=1e-16))
    return SpectralN(xs)


def ww_limit_family(eps, kappa, gamma) -> SpectralN:
    """``x_k(t) = exp(-i eps_k t) (gamma_k - kappa_k + kappa_k exp(-gamma_k t)) / gamma_k``.

    At ``kappa = gamma`` this is the Wigner-Weisskopf decay
    ``exp(-(i eps_k + gamma_k) t)``.
    """
    eps, kappa, gamma = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (eps, kappa, gamma))
    if not eps.shape == kappa.shape == gamma.shape:
        raise MemKernelError("eps, kappa and gamma must have equal length")
    if np.any(gamma <= 0) or np.any(kappa < 0):
        raise MemKernelError("need gamma > 0 and kappa >= 0")
    if np.any(kappa > gamma):
        raise BudgetViolation("kappa > gamma makes the waiting density exceed unit mass")
    xs = [ExpSum([(g - k) / g, k / g], [-1j * e, -1j * e - g])
          for e, k, g in zip(eps, kappa, gamma)]
    return SpectralN(xs)
