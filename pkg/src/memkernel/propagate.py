"""Propagation of the nonlocal master equation ``dL/dt = int_0^t K_{t-u} L_u du``.

:func:`volterra_solve` is the production solver.  The remaining routines are
independent routes to the same object, used as oracles: an ODE embedding for
exponential-sum kernels, the renewal equation ``L = N + L * Q`` that never
forms the kernel, the Laplace-domain resolvent, and fixed-Talbot inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, lu_factor, lu_solve, solve

from .errors import (ContourEvaluationFailure, Diverging, MemKernelError, SingularResolvent,
                     StepTooLarge)
from .forge.families import CPFamily
from .forge.kernel import COND_LIMIT, KernelFamily, _right_solve
from .forge.qfamily import QFamily
from .grid import TimeGrid
from .superop import apply


@dataclass(frozen=True)
class MapTrajectory:
    """Superoperators ``maps[n]`` at the nodes of ``grid``; ``maps[0]`` is the identity."""

    grid: TimeGrid
    maps: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.maps)
        if maps.shape[0] != self.grid.N + 1:
            raise MemKernelError(f"{maps.shape[0]} maps for {self.grid.N + 1} grid nodes")
        if np.max(np.abs(maps[0] - np.eye(maps.shape[1]))) > 1e-12:
            raise MemKernelError("trajectory must start at the identity map")
        object.__setattr__(self, "maps", maps)

    @property
    def times(self):
        return self.grid.times

    def __len__(self):
        return len(self.maps)

    def at_time(self, t: float):
        return self.maps[self.grid.index_of(t)]

    def states(self, rho0):
        """``Lambda_n rho0`` for every node, shape ``(N+1, d, d)``."""
        rho0 = np.asarray(rho0, dtype=complex)
        d = rho0.shape[0]
        v = self.maps @ rho0.reshape(-1, order="F")
        return v.reshape(len(self.maps), d * d).reshape(len(self.maps), d, d, order="F")

    def restricted(self, stride: int) -> "MapTrajectory":
        if stride == 1:
            return self
        if self.grid.N % stride:
            raise MemKernelError(f"stride {stride} does not divide N = {self.grid.N}")
        return MapTrajectory(TimeGrid(self.grid.h * stride, self.grid.N // stride),
                             self.maps[::stride])


def _phi_weights(D, h):
    n = D.shape[0]
    A = np.zeros((3 * n, 3 * n), dtype=complex)
    A[:n, :n] = h * D
    A[:n, n:2 * n] = np.eye(n)
    A[n:2 * n, 2 * n:] = np.eye(n)
    E = expm(A)
    return E[:n, :n], E[:n, n:2 * n], E[:n, 2 * n:]


def volterra_core(delta, kernel_samples, h, x0=None, poles=None, residues=None):
    """Solve ``X' = delta X + int_0^t K(t-u) X(u) du`` on a uniform grid.

    The local term is integrated exactly (exponential integrator) and the
    memory integral by the trapezoidal rule, linearly interpolated across
    each step; the implicit endpoint term is resolved by an LU solve.  When
    ``poles``/``residues`` are given (``K(t) = sum R exp(p t)``) the
    convolution history is updated recursively in O(1) per step; the result
    is the same quadrature.
    """
    delta = np.asarray(delta, dtype=complex)
    Ks = np.asarray(kernel_samples, dtype=complex)
    N = Ks.shape[0] - 1
    n = delta.shape[0]
    X0 = np.eye(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    m = X0.shape[1]
    E, P1, P2 = _phi_weights(delta, h)
    W1 = h * P2
    W0 = h * (P1 - P2)
    lu = lu_factor(np.eye(n) - W1 @ (0.5 * h * Ks[0]))

    X = np.empty((N + 1, n, m), dtype=complex)
    X[0] = X0
    I_prev = np.zeros((n, m), dtype=complex)
    recursive = poles is not None and len(poles) > 0
    if recursive:
        poles = np.asarray(poles, dtype=complex)
        R = np.asarray(residues, dtype=complex)
        decay = np.exp(poles * h)
        S = np.zeros((len(poles), n, m), dtype=complex)
    else:
        # history stored newest-first so the convolution is one contiguous matmul
        hist = np.zeros(((N + 1) * n, m), dtype=complex)
        Kwide = Ks[1:].transpose(1, 0, 2).reshape(n, N * n)
    for k in range(N):
        # R_{k+1} = h [ K_{k+1} X_0 / 2 + sum_{i=1}^{k} K_i X_{k+1-i} ]
        if recursive:
            if k:
                S = decay[:, None, None] * (S + X[k])
            conv = np.einsum("pab,pbc->ac", R, S) if k else 0.0
        else:
            if k:
                hist[(N - k) * n:(N - k + 1) * n] = X[k]
                conv = Kwide[:, :k * n] @ hist[(N - k) * n:N * n]
            else:
                conv = 0.0
        Rn = h * (0.5 * Ks[k + 1] @ X0 + conv)
        rhs = E @ X[k] + W0 @ I_prev + W1 @ Rn
        X[k + 1] = lu_solve(lu, rhs)
        I_prev = Rn + 0.5 * h * Ks[0] @ X[k + 1]
    return X


def volterra_solve(K: KernelFamily, grid: TimeGrid, method: str = "auto") -> MapTrajectory:
    """Second-order solution of the nonlocal master equation for ``Lambda_t``.

    ``method`` is ``"direct"`` (full trapezoidal history sum), ``"recursive"``
    (exponential-sum kernels only) or ``"auto"``.
    """
    h = grid.h
    Ks = K.sample(grid)
    guard = np.linalg.norm(h * (K.delta + h * Ks[0]), 2)
    if guard > 0.5:
        raise StepTooLarge(f"||h (delta + h K(0))|| = {guard:.3g} > 0.5; reduce h")
    use_rec = method == "recursive" or (
        method == "auto" and len(K.poles) > 0)
    if use_rec and not len(K.poles):
        raise MemKernelError("recursive method needs an exponential-sum kernel")
    if use_rec:
        X = volterra_core(K.delta, Ks, h, poles=K.poles, residues=K.residues)
    else:
        X = volterra_core(K.delta, Ks, h)
    return MapTrajectory(grid, X)


def exp_embed_solve(rates, delta, grid: TimeGrid, x0=None) -> MapTrajectory:
    """Oracle for kernels ``K_t = sum_i exp(-rate_i t) K_i``.

    Integrates the equivalent local system ``L' = delta L + sum m_i``,
    ``m_i' = K_i L - rate_i m_i`` with classic RK4.
    """
    delta = np.asarray(delta, dtype=complex)
    n = delta.shape[0]
    gam = np.array([complex(g) for g, _ in rates], dtype=complex)
    Kst = np.array([np.asarray(Ki, dtype=complex) for _, Ki in rates]).reshape(-1, n, n)
    X0 = np.eye(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    Y = np.zeros((len(gam) + 1,) + X0.shape, dtype=complex)
    Y[0] = X0

    def rhs(Y):
        L, mem = Y[0], Y[1:]
        out = np.empty_like(Y)
        out[0] = delta @ L + mem.sum(axis=0)
        out[1:] = Kst @ L - gam[:, None, None] * mem
        return out

    h = grid.h
    out = np.empty((grid.N + 1,) + X0.shape, dtype=complex)
    out[0] = X0
    for k in range(grid.N):
        k1 = rhs(Y)
        k2 = rhs(Y + 0.5 * h * k1)
        k3 = rhs(Y + 0.5 * h * k2)
        k4 = rhs(Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = Y[0]
    return MapTrajectory(grid, out)


def renewal_solve(N: CPFamily, Q: QFamily, grid: TimeGrid) -> MapTrajectory:
    """Trapezoidal solution of ``Lambda_t = N_t + int_0^t Lambda_{t-u} Q_u du``.

    This time-domain form of ``Lambda~ = N~ (1 - Q~)^{-1}`` never builds the
    kernel, so it checks :func:`volterra_solve` independently.
    """
    h, steps = grid.h, grid.N
    Ns = N.at_many(grid.times)
    Qs = np.stack([Q.at(t) for t in grid.times])
    D = Ns.shape[1]
    eye = np.eye(D)
    L = np.empty((steps + 1, D, D), dtype=complex)
    L[0] = eye
    lhs = (eye - 0.5 * h * Qs[0]).T
    lu = lu_factor(lhs)
    # hist holds Lambda_{k-1}, ..., Lambda_1 side by side (newest first)
    hist = np.zeros((D, (steps + 1) * D), dtype=complex)
    Qtall = Qs[1:].reshape(steps * D, D)
    for k in range(1, steps + 1):
        if k > 1:
            hist[:, (steps - k + 1) * D:(steps - k + 2) * D] = L[k - 1]
            conv = hist[:, (steps - k + 1) * D:steps * D] @ Qtall[:(k - 1) * D]
        else:
            conv = 0.0
        rhs = Ns[k] + h * (conv + 0.5 * Qs[k])
        L[k] = lu_solve(lu, rhs.T).T
    return MapTrajectory(grid, L)


def resolvent_at(N: CPFamily, Q: QFamily, s) -> np.ndarray:
    """``Lambda~(s) = (s + Z~(s) - B~(s))^{-1}`` with ``B~ = Q~ N~^{-1}``."""
    D = N.dim**2
    eye = np.eye(D)
    Ns = N.laplace(s)
    Z = _right_solve(eye - s * Ns, Ns)
    Bt = _right_solve(Q.laplace(s), Ns)
    M = s * eye + Z - Bt
    c = np.linalg.cond(M)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularResolvent(f"s + Z~ - B~ is singular at s = {s} (cond {c:.3e})")
    return solve(M, eye.astype(complex))


def series_partial_sum(N: CPFamily, Q: QFamily, s, terms: int, return_terms: bool = False):
    """Partial sum ``sum_{k<=terms} N~ (B~ N~)^k`` of the resolvent series."""
    Ns = N.laplace(s)
    step = _right_solve(Q.laplace(s), Ns) @ Ns
    term = Ns.copy()
    total = term.copy()
    out = [term]
    norms = [np.linalg.norm(term)]
    growth = 0
    for _ in range(terms):
        term = term @ step
        total = total + term
        out.append(term)
        nrm = np.linalg.norm(term)
        growth = growth + 1 if nrm > norms[-1] else 0
        norms.append(nrm)
        if growth >= 5:
            raise Diverging(f"series terms grew for 5 consecutive orders at s = {s}")
    return (total, out) if return_terms else total


def talbot_invert(F, t: float, nodes: int = 32):
    """Fixed-Talbot inversion of a (matrix-valued) Laplace transform at ``t > 0``.

    Both halves of the contour are evaluated, so complex-valued time
    functions are handled.
    """
    if not t > 0:
        raise MemKernelError(f"Talbot inversion requires t > 0, got {t}")
    M = int(nodes)
    r = 2.0 * M / (5.0 * t)
    theta = np.pi * np.arange(1, M) / M
    cot = 1.0 / np.tan(theta)
    s_k = r * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    try:
        acc = 0.5 * np.exp(r * t) * np.asarray(F(r), dtype=complex)
        for sk, sg in zip(s_k, sigma):
            up = np.exp(t * sk) * np.asarray(F(sk), dtype=complex) * (1 + 1j * sg)
            dn = np.exp(t * np.conj(sk)) * np.asarray(F(np.conj(sk)), dtype=complex) * (1 - 1j * sg)
            acc = acc + 0.5 * (up + dn)
    except (np.linalg.LinAlgError, MemKernelError, ZeroDivisionError) as exc:
        raise ContourEvaluationFailure(f"transform failed on the Talbot contour: {exc}") from exc
    out = (r / M) * acc
    if not np.all(np.isfinite(out)):
        raise ContourEvaluationFailure("non-finite value on the Talbot contour")
    return out


def trajectory_laplace(traj: MapTrajectory, s: complex, tail: bool = True):
    """Trapezoidal Laplace transform of a trajectory (constant tail beyond T)."""
    t = traj.times
    w = np.full(len(t), traj.grid.h)
    w[0] = w[-1] = 0.5 * traj.grid.h
    out = np.tensordot(w * np.exp(-s * t), traj.maps, axes=1)
    if tail:
        out = out + np.exp(-s * t[-1]) / s * traj.maps[-1]
    return out


def apply_states(traj: MapTrajectory, rho0):
    return np.array([apply(L, rho0) for L in traj.maps])
