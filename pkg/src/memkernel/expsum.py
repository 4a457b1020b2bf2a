"""Scalar exponential sums and their Laplace-domain quotients.

An :class:`ExpSum` is ``g(t) = sum_m c_m exp(p_m t)`` with complex
coefficients and exponents.  Its Laplace transform is the proper rational
function ``sum_m c_m / (s - p_m)``.  Every analytic family in this package
is built from such sums, which makes quotients like ``g~(s) / n~(s)``
invertible in closed form: a Dirac weight plus a finite pole sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import KernelUnavailable

MERGE_TOL = 1e-10


class ExpSum:
    """``g(t) = sum_m coeffs[m] * exp(exponents[m] * t)``."""

    def __init__(self, coeffs=(), exponents=(), *, drop: float = 0.0):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
        p = np.atleast_1d(np.asarray(exponents, dtype=complex)).ravel()
        if c.shape != p.shape:
            raise ValueError("coeffs and exponents must have equal length")
        merged_c, merged_p = [], []
        for ci, pi in zip(c, p):
            for k, pk in enumerate(merged_p):
                if abs(pi - pk) <= MERGE_TOL * max(1.0, abs(pk)):
                    merged_c[k] += ci
                    break
            else:
                merged_c.append(ci)
                merged_p.append(pi)
        keep = [k for k, ci in enumerate(merged_c) if abs(ci) > drop]
        self.coeffs = np.array([merged_c[k] for k in keep], dtype=complex)
        self.exponents = np.array([merged_p[k] for k in keep], dtype=complex)

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        terms = ", ".join(f"{c:.4g}*e^({p:.4g}t)" for c, p in zip(self.coeffs, self.exponents))
        return f"ExpSum({terms})"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if not len(self):
            return np.zeros(t.shape, dtype=complex)
        return np.exp(np.multiply.outer(t, self.exponents)) @ self.coeffs

    def __add__(self, other):
        if not isinstance(other, ExpSum):
            return NotImplemented
        return ExpSum(np.r_[self.coeffs, other.coeffs], np.r_[self.exponents, other.exponents])

    def __neg__(self):
        return ExpSum(-self.coeffs, self.exponents)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, ExpSum):
            c = np.multiply.outer(self.coeffs, other.coeffs).ravel()
            p = np.add.outer(self.exponents, other.exponents).ravel()
            return ExpSum(c, p)
        return ExpSum(self.coeffs * other, self.exponents)

    __rmul__ = __mul__

    def conj(self):
        return ExpSum(self.coeffs.conj(), self.exponents.conj())

    def derivative(self):
        return ExpSum(self.coeffs * self.exponents, self.exponents, drop=0.0)

    def at_zero(self) -> complex:
        return complex(self.coeffs.sum())

    def laplace(self, s):
        s = np.asarray(s, dtype=complex)
        if not len(self):
            return np.zeros(s.shape, dtype=complex)
        return (self.coeffs / (np.subtract.outer(s, self.exponents))).sum(axis=-1)

    def laplace_prime(self, s):
        s = np.asarray(s, dtype=complex)
        return -(self.coeffs / np.subtract.outer(s, self.exponents) ** 2).sum(axis=-1)

    def integral(self):
        """Exact ``int_0^inf g``; infinite when a non-decaying term survives."""
        if np.any(self.exponents.real >= 0):
            return np.inf
        return complex(np.sum(-self.coeffs / self.exponents))

    def antiderivative_from_zero(self):
        """``G(t) = int_0^t g`` as an ExpSum (exponents must be non-zero)."""
        if np.any(self.exponents == 0):
            raise ValueError("constant term has a linear antiderivative")
        c = self.coeffs / self.exponents
        return ExpSum(np.r_[c, -c.sum()], np.r_[self.exponents, 0.0])


@dataclass
class PoleSum:
    """``delta * dirac(t) + sum_k residues[k] * exp(poles[k] * t)``."""

    delta: complex = 0.0
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residues: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def smooth(self) -> ExpSum:
        return ExpSum(self.residues, self.poles)

    def laplace(self, s):
        return self.delta + self.smooth().laplace(s)


def zeros_of_laplace(n: ExpSum, polish: int = 3) -> np.ndarray:
    """Roots of ``n~(s) = sum c_m / (s - p_m)`` (numerator polynomial roots)."""
    if len(n) <= 1:
        return np.zeros(0, dtype=complex)
    num = np.zeros(len(n), dtype=complex)
    for m in range(len(n)):
        others = np.delete(n.exponents, m)
        num = P.polyadd(num, n.coeffs[m] * P.polyfromroots(others))
    num = np.trim_zeros(num, "b")
    if len(num) <= 1:
        return np.zeros(0, dtype=complex)
    roots = P.polyroots(num)
    for _ in range(polish):
        val = n.laplace(roots)
        der = n.laplace_prime(roots)
        ok = np.abs(der) > 0
        roots = np.where(ok, roots - np.where(ok, val / np.where(ok, der, 1), 0), roots)
    return roots


def laplace_quotient(g: ExpSum, n: ExpSum, *, rel_drop: float = 1e-14) -> PoleSum:
    """Time-domain form of ``g~(s) / n~(s)``.

    Requires ``n(0) != 0`` so that the quotient tends to the constant
    ``g(0) / n(0)`` at infinity; that constant is the Dirac weight.  Poles
    are the zeros of ``n~`` and those exponents of ``g`` that ``n`` does not
    share; all poles must be simple.
    """
    n0 = n.at_zero()
    if abs(n0) < 1e-14:
        raise KernelUnavailable("denominator family vanishes at t = 0")
    delta = g.at_zero() / n0
    poles, res = [], []
    scale = max(1.0, float(np.sum(np.abs(g.coeffs))))
    for z in zeros_of_laplace(n):
        d = n.laplace_prime(z)
        if abs(d) < 1e-12:
            raise KernelUnavailable(f"repeated zero of the Laplace denominator near {z}")
        poles.append(z)
        res.append(g.laplace(z) / d)
    for c, p in zip(g.coeffs, g.exponents):
        if np.any(np.abs(n.exponents - p) <= MERGE_TOL * max(1.0, abs(p))):
            continue
        nv = n.laplace(p)
        if abs(nv) < 1e-12:
            raise KernelUnavailable(f"pole of numerator coincides with a zero at {p}")
        poles.append(p)
        res.append(c / nv)
    poles = np.array(poles, dtype=complex)
    res = np.array(res, dtype=complex)
    keep = np.abs(res) > rel_drop * scale
    return PoleSum(complex(delta), poles[keep], res[keep])
