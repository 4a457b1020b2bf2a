"""Memory-kernel assembly ``K~_s = [Q~_s - (1 - s N~_s)] N~_s^{-1}``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve

from ..errors import KernelUnavailable, SingularLaplace, SingularNormalization
from ..expsum import ExpSum, laplace_quotient, zeros_of_laplace
from ..grid import TimeGrid
from ..superop import apply, dual, hermitian_sqrt_inv, sandwich, super_dim
from .families import CPFamily, SemigroupFamily
from .qfamily import ChannelQ, QFamily

COND_LIMIT = 1e12
POLE_MERGE = 1e-9


def _right_solve(A, N):
    """``A @ inv(N)`` via a linear solve, guarded by the condition number."""
    if not (np.all(np.isfinite(N)) and np.all(np.isfinite(A))):
        raise SingularLaplace("Laplace transform is not finite at this s")
    c = np.linalg.cond(N)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularLaplace(f"Laplace transform N~(s) is singular (cond {c:.3e})")
    return solve(N.T, A.T).T


def z_family(N: CPFamily) -> Callable:
    """Laplace evaluator ``Z~(s) = (1 - s N~(s)) N~(s)^{-1}``."""
    D = N.dim**2
    eye = np.eye(D)

    def Z(s):
        Ns = N.laplace(s)
        return _right_solve(eye - s * Ns, Ns)

    return Z


@dataclass
class KernelFamily:
    """``K_t = delta * dirac(t) + K_smooth(t)``.

    The smooth part is either an exponential sum ``sum_k exp(p_k t) R_k``
    (``poles``/``residues``), a sampled array on a grid, or absent.
    ``laplace_fn``, when set, is the exact Laplace evaluator used for checks.
    """

    delta: np.ndarray
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residues: Optional[np.ndarray] = None
    samples: Optional[tuple] = None  # (TimeGrid, array (N+1, D, D))
    laplace_fn: Optional[Callable] = None
    time_domain: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=complex)
        D = self.delta.shape[0]
        self.poles = np.asarray(self.poles, dtype=complex).ravel()
        if self.residues is None:
            self.residues = np.zeros((0, D, D), dtype=complex)
        self.residues = np.asarray(self.residues, dtype=complex).reshape(-1, D, D)
        self._spline = None

    @property
    def size(self) -> int:
        return self.delta.shape[0]

    @property
    def dim(self) -> int:
        return super_dim(self.delta)

    def smooth(self, times):
        """Smooth part at ``times``, shape ``(len(times), D, D)``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if not self.time_domain:
            raise KernelUnavailable("kernel is only known in the Laplace domain")
        if self.samples is not None and not len(self.poles):
            grid, vals = self.samples
            if self._spline is None:
                self._spline = CubicSpline(grid.times, vals, axis=0)
            return self._spline(times)
        if not len(self.poles):
            return np.zeros((len(times), self.size, self.size), dtype=complex)
        w = np.exp(np.multiply.outer(times, self.poles))
        return np.tensordot(w, self.residues, axes=1)

    def sample(self, grid: TimeGrid):
        if self.samples is not None:
            g, vals = self.samples
            if g == grid:
                return vals
        return self.smooth(grid.times)

    def with_samples(self, grid: TimeGrid) -> "KernelFamily":
        return KernelFamily(self.delta, self.poles, self.residues,
                            samples=(grid, self.sample(grid)),
                            laplace_fn=self.laplace_fn, time_domain=self.time_domain,
                            meta=dict(self.meta))

    def exp_terms(self):
        """``[(rate, R)]`` with ``K_smooth(t) = sum R exp(-rate t)``."""
        return [(-p, R) for p, R in zip(self.poles, self.residues)]

    def laplace(self, s):
        if self.laplace_fn is not None:
            return self.laplace_fn(s)
        return self.laplace_from_terms(s)

    def laplace_from_terms(self, s):
        if not self.time_domain or (self.samples is not None and not len(self.poles)):
            raise KernelUnavailable("no analytic time-domain terms")
        out = self.delta.copy()
        for p, R in zip(self.poles, self.residues):
            out = out + R / (s - p)
        return out

    def trace_defect(self, s) -> float:
        """``max |K~(s)#(I)|``; zero for a trace-preserving kernel."""
        d = self.dim
        return float(np.max(np.abs(apply(dual(self.laplace(s)), np.eye(d)))))

    @property
    def is_delta_only(self) -> bool:
        return self.time_domain and not len(self.poles) and self.samples is None


def _merge_terms(terms, D):
    poles, res = [], []
    for p, a, b, r in terms:
        for k, q in enumerate(poles):
            if abs(p - q) <= POLE_MERGE * max(1.0, abs(q)):
                res[k][a, b] += r
                break
        else:
            poles.append(p)
            R = np.zeros((D, D), dtype=complex)
            R[a, b] = r
            res.append(R)
    if not poles:
        return np.zeros(0, dtype=complex), np.zeros((0, D, D), dtype=complex)
    return np.array(poles), np.stack(res)


def _diagonal_time_domain(N: CPFamily, Q: QFamily):
    """Entrywise partial fractions for families with diagonal ``N~``."""
    E = Q.entry_expsums()
    if E is None:
        raise KernelUnavailable(f"{type(Q).__name__} has no closed-form entries")
    n_entries = N.entries()
    D = len(n_entries)
    delta = np.zeros((D, D), dtype=complex)
    terms = []
    zero_cache = {}
    for b in range(D):
        nb = n_entries[b]
        fb = -nb.derivative()
        key = id(nb)
        if key not in zero_cache:
            zero_cache[key] = zeros_of_laplace(nb)
        for a in range(D):
            g = E[a, b] if E[a, b] is not None else ExpSum()
            if a == b:
                g = g - fb
            if not len(g):
                continue
            ps = laplace_quotient(g, nb)
            delta[a, b] = ps.delta
            terms.extend((p, a, b, r) for p, r in zip(ps.poles, ps.residues))
    poles, residues = _merge_terms(terms, D)
    return delta, poles, residues


def assemble_kernel(N: CPFamily, Q: QFamily, *, check: bool = True,
                    times=None) -> KernelFamily:
    """Memory kernel of the normalized pair ``(N, Q)``.

    The Laplace evaluator is always exact.  A time-domain form is attached
    when one exists in closed form: channel-composed ``Q`` over a semigroup
    ``N`` (pure Dirac kernel ``(B - 1) Z``), or any ``Q`` with exponential-sum
    entries over a scalar or dephasing ``N``.  Otherwise the kernel stays in
    the Laplace domain.
    """
    if check:
        kw = {} if times is None else {"times": times}
        Q.check_normalization(**kw)
    D = N.dim**2
    eye = np.eye(D)

    def laplace_fn(s):
        Ns = N.laplace(s)
        return _right_solve(Q.laplace(s) - (eye - s * Ns), Ns)

    meta = {"family": type(N).__name__, "q": type(Q).__name__}
    if isinstance(N, SemigroupFamily) and getattr(Q, "channel", None) is not None \
            and isinstance(getattr(Q, "base", Q), ChannelQ):
        factor = getattr(Q, "factor", 1.0)
        delta = (factor * Q.channel - eye) @ N.Z
        return KernelFamily(delta, laplace_fn=laplace_fn, meta=meta)
    if N.diagonal:
        try:
            delta, poles, residues = _diagonal_time_domain(N, Q)
        except KernelUnavailable as exc:
            meta["time_domain"] = str(exc)
        else:
            return KernelFamily(delta, poles, residues, laplace_fn=laplace_fn, meta=meta)
    return KernelFamily(np.zeros((D, D), dtype=complex), laplace_fn=laplace_fn,
                        time_domain=False, meta=meta)


def alt_normalize(N: CPFamily, t: float):
    """``M_t = N_t o (rho -> X^{-1/2} rho X^{-1/2})`` with ``X = N_t#(I)``.

    Then ``M_t#(a) = X^{-1/2} N_t#(a) X^{-1/2}`` and ``M_t#(I) = I``.
    """
    X = N.dual_identity(t)
    try:
        Y = hermitian_sqrt_inv(X)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalization(str(exc)) from None
    if np.linalg.cond(X) > COND_LIMIT:
        raise SingularNormalization(f"N_t#(I) is near-singular at t = {t}")
    return N.at(t) @ sandwich(Y)
