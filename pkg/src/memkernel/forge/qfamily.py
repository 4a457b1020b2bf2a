"""Completely positive families ``Q_t`` normalized against a family ``N_t``.

The normalization ``Q_t#(I) = F_t#(I)`` is what makes the assembled kernel
trace preserving.  Three builders are provided: composing ``F_t`` with a
channel, an explicit Kraus family, and the measure-and-prepare form for
dephasing families.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad_vec

from ..errors import NormalizationMismatch, NotAChannel, NotPSD, TraceMismatch, MemKernelError
from ..expsum import ExpSum
from ..superop import apply, dual, is_cp, kraus_to_super, unital_defect, vectorize
from .families import CPFamily, DephasingFamily

DEFAULT_CHECK_TIMES = np.linspace(0.0, 10.0, 101)


def _numeric_laplace(fn, s, epsabs=1e-12):
    val, _ = quad_vec(lambda t: np.exp(-s * t) * fn(t), 0.0, np.inf,
                      epsabs=epsabs, epsrel=1e-10)
    return val


class QFamily:
    dim: int
    N: CPFamily

    def at(self, t):
        raise NotImplementedError

    def laplace(self, s):
        return _numeric_laplace(self.at, s)

    def entry_expsums(self):
        """``(D, D)`` object array of ExpSum entries of ``Q_t``, or None."""
        return None

    def normalization_defect(self, t) -> float:
        d = self.dim
        lhs = apply(dual(self.at(t)), np.eye(d))
        rhs = apply(dual(self.N.rate(t)), np.eye(d))
        return float(np.max(np.abs(lhs - rhs)))

    def check_normalization(self, times=DEFAULT_CHECK_TIMES, tol=1e-10):
        dev = max(self.normalization_defect(t) for t in times)
        if dev > tol:
            raise NormalizationMismatch(
                f"Q#(I) differs from F#(I) by {dev:.3e}", deviation=dev)
        return dev

    def scaled(self, factor: float) -> "QFamily":
        """Copy multiplied by ``factor``; breaks normalization unless factor is 1."""
        return _ScaledQ(self, factor)


class _ScaledQ(QFamily):
    def __init__(self, base, factor):
        self.base, self.factor = base, float(factor)
        self.dim, self.N = base.dim, base.N

    def at(self, t):
        return self.factor * self.base.at(t)

    def laplace(self, s):
        return self.factor * self.base.laplace(s)

    def entry_expsums(self):
        E = self.base.entry_expsums()
        if E is None:
            return None
        out = np.empty(E.shape, dtype=object)
        for idx, g in np.ndenumerate(E):
            out[idx] = g * self.factor
        return out

    @property
    def channel(self):
        return getattr(self.base, "channel", None)


class ChannelQ(QFamily):
    """``Q_t = B F_t`` for a quantum channel ``B``."""

    def __init__(self, channel, N: CPFamily):
        self.channel = np.asarray(channel, dtype=complex)
        self.N = N
        self.dim = N.dim

    def at(self, t):
        return self.channel @ self.N.rate(t)

    def laplace(self, s):
        D = self.channel.shape[0]
        return self.channel @ (np.eye(D) - s * self.N.laplace(s))

    def entry_expsums(self):
        if not self.N.diagonal:
            return None
        rates = [-n.derivative() for n in self.N.entries()]
        D = len(rates)
        out = np.empty((D, D), dtype=object)
        for a in range(D):
            for b in range(D):
                out[a, b] = rates[b] * self.channel[a, b]
        return out


class KrausQ(QFamily):
    """``Q_t rho = sum_a M_a(t) rho M_a(t)^+`` from a callable ``t -> [M_a(t)]``."""

    def __init__(self, ops, N: CPFamily):
        self.ops = ops
        self.N = N
        self.dim = N.dim

    def at(self, t):
        return kraus_to_super(self.ops(t))


class DephasingQ(QFamily):
    """Measure-and-prepare family ``Q_t rho = sum_k <k|rho|k> c_k(t)``.

    Each ``c_k(t)`` is PSD with ``Tr c_k(t) = f_kk(t)``.  With ``states``
    given, ``c_k(t) = f_kk(t) * states[k]`` and everything stays analytic.
    """

    def __init__(self, N: DephasingFamily, states=None, c=None):
        if not isinstance(N, DephasingFamily):
            raise MemKernelError("dephasing Q requires a dephasing family N")
        if (states is None) == (c is None):
            raise MemKernelError("give exactly one of `states` or `c`")
        self.N = N
        self.dim = d = N.dim
        self.states = None if states is None else [np.asarray(s, dtype=complex) for s in states]
        self.c = c
        self._cols = [k + k * d for k in range(d)]

    def blocks(self, t):
        if self.states is not None:
            f = np.diag(self.N.rate_matrix(t))
            return [f[k] * self.states[k] for k in range(self.dim)]
        return [np.asarray(m, dtype=complex) for m in self.c(t)]

    def _assemble(self, blocks):
        d = self.dim
        Q = np.zeros((d * d, d * d), dtype=complex)
        for k, ck in enumerate(blocks):
            Q[:, self._cols[k]] = vectorize(ck)
        return Q

    def at(self, t):
        return self._assemble(self.blocks(t))

    def laplace(self, s):
        if self.states is None:
            return super().laplace(s)
        d = self.dim
        ftil = [(-self.N.n[k][k].derivative()).laplace(s) for k in range(d)]
        return self._assemble([ftil[k] * self.states[k] for k in range(d)])

    def entry_expsums(self):
        if self.states is None:
            return None
        d = self.dim
        D = d * d
        zero = ExpSum()
        out = np.full((D, D), zero, dtype=object)
        for k in range(d):
            fk = -self.N.n[k][k].derivative()
            v = vectorize(self.states[k])
            for a in range(D):
                if v[a] != 0:
                    out[a, self._cols[k]] = fk * v[a]
        return out


def build_q_channel(channel, F: CPFamily, tol: float = 1e-10) -> ChannelQ:
    """Channel-composed ``Q_t = B F_t``; ``B`` must be CPTP."""
    channel = np.asarray(channel, dtype=complex)
    if channel.shape != (F.dim**2, F.dim**2):
        raise NotAChannel(f"channel shape {channel.shape} does not match dimension {F.dim}")
    if not is_cp(channel, tol):
        raise NotAChannel("B is not completely positive")
    if np.max(np.abs(unital_defect(channel))) > tol:
        raise NotAChannel("B is not trace preserving (B#(I) != I)")
    return ChannelQ(channel, F)


def build_q_kraus(ops, F: CPFamily, times=DEFAULT_CHECK_TIMES, tol: float = 1e-8) -> KrausQ:
    """Kraus family ``M_a(t)`` with ``sum_a M_a^+ M_a = F_t#(I)``."""
    dev = 0.0
    for t in times:
        Ms = ops(t)
        lhs = sum(M.conj().T @ M for M in Ms)
        dev = max(dev, float(np.max(np.abs(lhs - F.gain(t)))))
    if dev > tol:
        raise NormalizationMismatch(f"sum M^+ M deviates from F#(I) by {dev:.3e}", deviation=dev)
    return KrausQ(ops, F)


def build_q_dephasing(N: DephasingFamily, states=None, c=None,
                      times=DEFAULT_CHECK_TIMES, tol: float = 1e-8) -> DephasingQ:
    """Measure-and-prepare ``Q_t`` for a dephasing family.

    ``states`` are unit-trace PSD matrices (``c_k = f_kk * states[k]``);
    alternatively ``c`` maps ``t`` to the list of blocks ``c_k(t)``.
    """
    Q = DephasingQ(N, states=states, c=c)
    if states is not None:
        for k, st in enumerate(Q.states):
            if abs(np.trace(st) - 1) > tol:
                raise TraceMismatch(f"state {k} has trace {np.trace(st).real:.6g}")
    for t in times:
        f = np.diag(N.rate_matrix(t)).real
        for k, ck in enumerate(Q.blocks(t)):
            lo = np.linalg.eigvalsh(0.5 * (ck + ck.conj().T))[0]
            if lo < -tol * max(1.0, abs(f[k])):
                raise NotPSD(f"c_{k}({t:g}) has eigenvalue {lo:.3e}")
            dev = abs(np.trace(ck) - f[k])
            if dev > tol:
                raise TraceMismatch(f"Tr c_{k}({t:g}) - f_kk = {dev:.3e}", deviation=dev)
    return Q
