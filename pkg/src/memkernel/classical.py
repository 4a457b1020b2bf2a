"""Classical non-Markovian master equation for probability vectors.

With per-site survival ``n_j`` and jump densities ``q_ij`` (normalized by
``sum_i q_ij = f_j = -n_j'``) the memory kernel is
``k_ij = b_ij - delta_ij z_j`` with ``b~_ij = q~_ij / n~_j`` and
``z~_j = f~_j / n~_j``.  Exponential-sum inputs give closed-form kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import WaitingDensity
from .errors import MemKernelError, NormalizationMismatch, StepTooLarge
from .expsum import ExpSum, laplace_quotient
from .forge.families import DephasingFamily
from .forge.kernel import _merge_terms
from .forge.qfamily import DephasingQ
from .grid import TimeGrid
from .propagate import volterra_core

CHECK_TIMES = np.linspace(0.0, 20.0, 201)


def stochastic_vector(p, tol: float = 1e-10) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12):
        raise MemKernelError(f"negative probability {p.min():.3e}")
    if abs(p.sum() - 1) > tol:
        raise MemKernelError(f"probabilities sum to {p.sum():.12g}")
    return p


def stochastic_matrix(pi, tol: float = 1e-12) -> np.ndarray:
    """Column-stochastic matrix: ``pi[i, j]`` is the jump probability ``j -> i``."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise MemKernelError(f"stochastic matrix must be square, got {pi.shape}")
    if np.any(pi < 0):
        raise MemKernelError("stochastic matrix has negative entries")
    dev = np.max(np.abs(pi.sum(axis=0) - 1))
    if dev > tol:
        raise MemKernelError(f"columns of the stochastic matrix miss 1 by {dev:.3e}")
    return pi


@dataclass
class ClassicalKernel:
    """``k(t) = delta * dirac(t) + sum_m residues[m] exp(poles[m] t)``, a d x d matrix.

    ``gain`` and ``loss`` hold the pole-sum forms of ``b_ij`` and ``z_j``.
    """

    delta: np.ndarray
    poles: np.ndarray
    residues: np.ndarray
    gain: np.ndarray = None
    loss: list = None

    @property
    def dim(self) -> int:
        return self.delta.shape[0]

    def smooth(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if not len(self.poles):
            return np.zeros((len(times), self.dim, self.dim), dtype=complex)
        return np.tensordot(np.exp(np.multiply.outer(times, self.poles)), self.residues, axes=1)

    def laplace(self, s):
        out = self.delta.astype(complex)
        for p, R in zip(self.poles, self.residues):
            out = out + R / (s - p)
        return out

    def column_sum_defect(self, times=CHECK_TIMES) -> float:
        """``max |sum_i k_ij|`` over the Dirac weights and the smooth part at ``times``."""
        sm = self.smooth(times).sum(axis=1)
        return float(max(np.max(np.abs(self.delta.sum(axis=0))), np.max(np.abs(sm))))


def _densities(n):
    out = [d if isinstance(d, WaitingDensity) else WaitingDensity(*d) for d in n]
    if not out:
        raise MemKernelError("empty waiting family")
    return out


def classical_kernel(q, n, times=CHECK_TIMES, tol: float = 1e-8) -> ClassicalKernel:
    """Kernel from jump densities ``q[i][j]`` (ExpSum) and waiting densities ``n[j]``.

    Raises :class:`NormalizationMismatch` unless ``sum_i q_ij = f_j`` and
    ``q_ij >= 0`` on ``times``.
    """
    dens = _densities(n)
    d = len(dens)
    q = [[q[i][j] if q[i][j] is not None else ExpSum() for j in range(d)] for i in range(d)]
    dev = 0.0
    for j in range(d):
        col = sum((q[i][j] for i in range(d)), ExpSum())
        dev = max(dev, float(np.max(np.abs(col(times) - dens[j].f(times)))))
        lo = min(float(np.min(q[i][j](times).real)) for i in range(d))
        if lo < -tol:
            raise NormalizationMismatch(f"q_ij negative ({lo:.3e}) in column {j}", deviation=-lo)
    if dev > tol:
        raise NormalizationMismatch(f"sum_i q_ij differs from f_j by {dev:.3e}", deviation=dev)

    delta = np.zeros((d, d), dtype=complex)
    gain = np.empty((d, d), dtype=object)
    loss = []
    terms = []
    for j in range(d):
        nj = dens[j].survival
        z = laplace_quotient(dens[j].density, nj)
        loss.append(z)
        for i in range(d):
            b = laplace_quotient(q[i][j], nj) if len(q[i][j]) else None
            gain[i, j] = b
            g = q[i][j] - dens[j].density if i == j else q[i][j]
            if not len(g):
                continue
            ps = laplace_quotient(g, nj)
            delta[i, j] = ps.delta
            terms.extend((p, i, j, r) for p, r in zip(ps.poles, ps.residues))
    poles, residues = _merge_terms(terms, d)
    return ClassicalKernel(delta, poles, residues, gain, loss)


def gillespie_kernel(pi, n) -> ClassicalKernel:
    """Kernel with ``b_ij = pi_ij kappa_j``, ``kappa~_j = s f~_j / (1 - f~_j)``."""
    pi = stochastic_matrix(pi)
    dens = _densities(n)
    d = len(dens)
    if pi.shape[0] != d:
        raise MemKernelError(f"pi is {pi.shape}, waiting family has {d} sites")
    q = [[dens[j].density * pi[i, j] if pi[i, j] else ExpSum() for j in range(d)]
         for i in range(d)]
    return classical_kernel(q, dens)


def solve_classical(k: ClassicalKernel, p0, grid: TimeGrid) -> np.ndarray:
    """Probability trajectory, shape ``(N+1, d)``, by the same Volterra scheme as the quantum solver."""
    p0 = stochastic_vector(p0)
    h = grid.h
    Ks = k.smooth(grid.times)
    guard = np.linalg.norm(h * (k.delta + h * Ks[0]), 2)
    if guard > 0.5:
        raise StepTooLarge(f"||h (delta + h k(0))|| = {guard:.3g} > 0.5; reduce h")
    X = volterra_core(k.delta, Ks, h, x0=p0[:, None].astype(complex),
                      poles=k.poles if len(k.poles) else None, residues=k.residues)
    return X[:, :, 0].real


def markov_generator(pi, rates) -> np.ndarray:
    """``(pi - 1) diag(rates)`` for exponential waiting times."""
    pi = stochastic_matrix(pi)
    return (pi - np.eye(len(rates))) @ np.diag(rates)


def diagonal_embedding(pi, n):
    """Quantum pair ``(N, Q)`` acting on diagonal states as the Gillespie model.

    ``N`` is the dephasing family with ``n_ii = n_i`` and ``n_ij = n_i n_j``
    (a PSD coefficient matrix), ``Q`` measures in the site basis and
    prepares ``diag(pi[:, j])``.
    """
    pi = stochastic_matrix(pi)
    dens = _densities(n)
    d = len(dens)
    surv = [x.survival for x in dens]
    coeff = [[surv[i] if i == j else surv[i] * surv[j] for j in range(d)] for i in range(d)]
    N = DephasingFamily(coeff)
    Q = DephasingQ(N, states=[np.diag(pi[:, j]).astype(complex) for j in range(d)])
    return N, Q
