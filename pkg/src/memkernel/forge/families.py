"""Families ``N_t`` of completely positive maps with ``N_0 = identity``.

Every family exposes ``at(t)`` (the map), ``rate(t)`` (``F_t = -dN_t/dt``)
and ``laplace(s)``.  Families whose Laplace transform is diagonal in the
``|i><j|`` basis (scalar and dephasing forms) also expose the per-entry
survival functions as :class:`~memkernel.expsum.ExpSum`, which is what the
closed-form kernel assembly needs.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.integrate import quad_vec
from scipy.linalg import eig, expm, solve

from ..densities import WaitingDensity
from ..errors import MemKernelError, NotDissipative, SingularLaplace
from ..expsum import ExpSum
from ..superop import apply, check_density, dual, identity_super, is_cp, sandwich


class CPFamily:
    """Common interface; subclasses implement ``at``, ``rate`` and ``laplace``."""

    dim: int
    diagonal = False

    def at(self, t: float):
        raise NotImplementedError

    def rate(self, t: float):
        raise NotImplementedError

    def laplace(self, s):
        raise NotImplementedError

    def at_many(self, times):
        return np.stack([self.at(t) for t in times])

    def rate_many(self, times):
        return np.stack([self.rate(t) for t in times])

    def entries(self):
        """Per-entry survival ``ExpSum`` list (diagonal families only)."""
        raise MemKernelError(f"{type(self).__name__} is not diagonal")

    def dual_identity(self, t):
        return apply(dual(self.at(t)), np.eye(self.dim))

    def gain(self, t):
        """Hermitized ``F_t#(I)``; the gain condition asks for it to be PSD."""
        G = apply(dual(self.rate(t)), np.eye(self.dim))
        return 0.5 * (G + G.conj().T)

    def gain_min_eig(self, times) -> np.ndarray:
        return np.array([np.linalg.eigvalsh(self.gain(t))[0] for t in times])

    def validate(self, times, tol: float = 1e-10):
        """Check ``N_0 = identity`` and complete positivity at ``times``."""
        N0 = self.at(0.0)
        if np.max(np.abs(N0 - identity_super(self.dim))) > 1e-12:
            raise MemKernelError("family does not start at the identity map")
        bad = [t for t in times if not is_cp(self.at(t), tol)]
        if bad:
            raise MemKernelError(f"family not completely positive at t = {bad[:5]}")
        return self


class ScalarFamily(CPFamily):
    """``N_t = n(t) * identity`` with ``n = 1 - int f``."""

    diagonal = True

    def __init__(self, density: WaitingDensity, dim: int):
        self.density = density
        self.dim = int(dim)
        self._eye = identity_super(self.dim)

    def at(self, t):
        return complex(self.density.survival(t)) * self._eye

    def rate(self, t):
        return complex(self.density.density(t)) * self._eye

    def laplace(self, s):
        return complex(self.density.survival.laplace(s)) * self._eye

    def entries(self):
        return [self.density.survival] * self.dim**2


class DephasingFamily(CPFamily):
    """``N_t rho = sum_ij n_ij(t) |i><i| rho |j><j|``.

    ``n`` is a ``d x d`` nested sequence of :class:`ExpSum`; the coefficient
    matrix ``[n_ij(t)]`` must be positive semidefinite with unit entries at
    ``t = 0``.
    """

    diagonal = True

    def __init__(self, n):
        self.dim = len(n)
        self.n = [[n[i][j] for j in range(self.dim)] for i in range(self.dim)]
        for i in range(self.dim):
            for j in range(self.dim):
                if abs(self.n[i][j].at_zero() - 1) > 1e-12:
                    raise MemKernelError(f"n_{i}{j}(0) != 1")

    def matrix(self, t):
        return np.array([[self.n[i][j](t) for j in range(self.dim)] for i in range(self.dim)])

    def rate_matrix(self, t):
        return np.array([[-self.n[i][j].derivative()(t) for j in range(self.dim)]
                         for i in range(self.dim)])

    def laplace_matrix(self, s):
        return np.array([[self.n[i][j].laplace(s) for j in range(self.dim)]
                         for i in range(self.dim)])

    def at(self, t):
        return np.diag(self.matrix(t).reshape(-1, order="F"))

    def rate(self, t):
        return np.diag(self.rate_matrix(t).reshape(-1, order="F"))

    def laplace(self, s):
        return np.diag(self.laplace_matrix(s).reshape(-1, order="F"))

    def entries(self):
        d = self.dim
        # column-stacking: vec index i + j*d carries n_ij
        return [self.n[b % d][b // d] for b in range(d * d)]

    def gain(self, t):
        return np.diag(np.diag(self.rate_matrix(t)).real)


def _spectral_projectors(X):
    w, R = eig(X)
    cond = np.linalg.cond(R)
    if cond > 1e8:
        raise MemKernelError(
            f"operator is not safely diagonalizable (eigenvector condition {cond:.2e})")
    Linv = np.linalg.inv(R)
    return w, [np.outer(R[:, a], Linv[a, :]) for a in range(len(w))]


def hadamard_family(X_ops, omega) -> DephasingFamily:
    """Dephasing family ``n_ij(t) = Tr(omega exp(t X_i^+) exp(t X_j))``.

    The coefficient matrix is a Gram matrix, hence PSD.  Dissipative
    operators (``X + X^+ <= 0``) give non-negative ``f_ii``; other operators
    only trigger a :class:`NotDissipative` warning.
    """
    omega = check_density(omega)
    X_ops = [np.asarray(X, dtype=complex) for X in X_ops]
    d = len(X_ops)
    for k, X in enumerate(X_ops):
        if X.shape != omega.shape:
            raise MemKernelError(f"X_{k} shape {X.shape} does not match omega {omega.shape}")
        top = np.linalg.eigvalsh(X + X.conj().T)[-1]
        if top > 1e-12:
            warnings.warn(f"X_{k} is not dissipative (max eig of X + X^+ = {top:.3e})",
                          NotDissipative, stacklevel=2)
    spec = [_spectral_projectors(X) for X in X_ops]
    n = [[None] * d for _ in range(d)]
    for i in range(d):
        wi, Pi = spec[i]
        for j in range(d):
            wj, Pj = spec[j]
            coeffs, exps = [], []
            for b, Pb in enumerate(Pi):
                for a, Pa in enumerate(Pj):
                    coeffs.append(np.trace(omega @ Pb.conj().T @ Pa))
                    exps.append(np.conj(wi[b]) + wj[a])
            n[i][j] = ExpSum(coeffs, exps, drop=1e-15)
    fam = DephasingFamily(n)
    fam.X_ops = X_ops
    fam.omega = omega
    return fam


def hadamard_entry_direct(X_ops, omega, t):
    """Reference ``[n_ij(t)]`` by direct matrix exponentials."""
    E = [expm(t * np.asarray(X, dtype=complex)) for X in X_ops]
    return np.array([[np.trace(omega @ Ei.conj().T @ Ej) for Ej in E] for Ei in E])


class SemigroupFamily(CPFamily):
    """``N_t = exp(-t Z)``; the Wigner-Weisskopf family when ``Z`` comes from ``C``."""

    def __init__(self, Z):
        self.Z = np.asarray(Z, dtype=complex)
        self.dim = int(round(np.sqrt(self.Z.shape[0])))

    @classmethod
    def wigner_weisskopf(cls, ham):
        fam = cls(ham.Z())
        fam.ham = ham
        return fam

    def at(self, t):
        return expm(-t * self.Z)

    def rate(self, t):
        return self.Z @ expm(-t * self.Z)

    def laplace(self, s):
        D = self.Z.shape[0]
        A = s * np.eye(D) + self.Z
        c = np.linalg.cond(A)
        if not np.isfinite(c) or c > 1e12:
            raise SingularLaplace(f"s = {s} is a pole of the semigroup resolvent")
        return solve(A, np.eye(D, dtype=complex))


class ReducedFamily(CPFamily):
    """``N_t rho = n_t rho n_t^+`` for ``n_t = sum_k exp(-i E_k t) a_k a_k^+``.

    This is the spectral form of the reduced propagator ``<w| exp(-iHt) |w>``
    with ``E_k`` the total-Hamiltonian eigenvalues and ``a_k`` the system
    components of its eigenvectors.
    """

    def __init__(self, energies, amplitudes):
        self.energies = np.asarray(energies, dtype=float)
        self.amps = np.asarray(amplitudes, dtype=complex)  # shape (K, d)
        self.dim = self.amps.shape[1]
        self._proj = np.einsum("ka,kb->kab", self.amps, self.amps.conj())
        self._pairs = None

    def n(self, t):
        return np.tensordot(np.exp(-1j * self.energies * t), self._proj, axes=1)

    def nu(self, t):
        return np.tensordot(1j * self.energies * np.exp(-1j * self.energies * t),
                            self._proj, axes=1)

    def at(self, t):
        return sandwich(self.n(t))

    def rate(self, t):
        n, nu = self.n(t), self.nu(t)
        return np.kron(nu.conj(), n) + np.kron(n.conj(), nu)

    def gain(self, t):
        n, nu = self.n(t), self.nu(t)
        G = n.conj().T @ nu + nu.conj().T @ n
        return 0.5 * (G + G.conj().T)

    def laplace(self, s):
        if self._pairs is None:
            K = len(self.energies)
            d2 = self.dim**2
            pairs = np.empty((K, K, d2, d2), dtype=complex)
            for k in range(K):
                for l in range(K):
                    pairs[k, l] = np.kron(self._proj[l].conj(), self._proj[k])
            self._pairs = pairs
        w = 1.0 / (s + 1j * np.subtract.outer(self.energies, self.energies))
        return np.tensordot(w, self._pairs, axes=([0, 1], [0, 1]))


class SampledFamily(CPFamily):
    """Family known on a grid; cubic interpolation off the nodes."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=complex)
        self.dim = int(round(np.sqrt(self.values.shape[1])))
        self._spline = CubicSpline(self.times, self.values, axis=0)
        self._dspline = self._spline.derivative()

    def at(self, t):
        return self._spline(t)

    def rate(self, t):
        return -self._dspline(t)

    def laplace(self, s):
        T = self.times[-1]
        body, _ = quad_vec(lambda t: np.exp(-s * t) * self._spline(t), 0.0, T,
                           epsabs=1e-12, epsrel=1e-10)
        # constant extrapolation beyond the sampled horizon
        return body + np.exp(-s * T) / s * self.values[-1]
