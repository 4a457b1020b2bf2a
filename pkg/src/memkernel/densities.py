"""Waiting-time densities ``f(t) = sum_i a_i exp(-b_i t)`` and their survival functions."""

from __future__ import annotations

import numpy as np

from .errors import BudgetViolation, MemKernelError
from .expsum import ExpSum, PoleSum, laplace_quotient


class WaitingDensity:
    """Exponential-sum waiting density with survival ``n(t) = 1 - int_0^t f``.

    The total mass ``int_0^inf f`` must not exceed one and ``f`` must stay
    non-negative; both are checked on construction.
    """

    def __init__(self, amplitudes, rates):
        a = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        b = np.atleast_1d(np.asarray(rates, dtype=float))
        if a.shape != b.shape or a.ndim != 1:
            raise MemKernelError("amplitudes and rates must be 1-d and equal length")
        if np.any(b <= 0):
            raise MemKernelError("waiting-density rates must be positive")
        self.amplitudes = a
        self.rates = b
        self.mass = float(np.sum(a / b))
        if self.mass > 1 + 1e-12:
            raise BudgetViolation(f"int f = {self.mass:.6g} exceeds 1")
        horizon = 40.0 / b.min()
        lo = float(np.min(self.f(np.linspace(0, horizon, 4001)).real))
        if lo < -1e-12:
            raise MemKernelError(f"waiting density is negative (min {lo:.3e})")

    @classmethod
    def exponential(cls, rate: float, weight: float = 1.0):
        """``f(t) = weight * rate * exp(-rate t)``; weight < 1 leaves mass at rest."""
        return cls([weight * rate], [rate])

    def __repr__(self):
        return f"WaitingDensity(amplitudes={self.amplitudes.tolist()}, rates={self.rates.tolist()})"

    @property
    def density(self) -> ExpSum:
        return ExpSum(self.amplitudes, -self.rates)

    @property
    def survival(self) -> ExpSum:
        c = self.amplitudes / self.rates
        return ExpSum(np.r_[c, 1.0 - c.sum()], np.r_[-self.rates, 0.0], drop=1e-15)

    def f(self, t):
        return self.density(t).real

    def n(self, t):
        return self.survival(t).real

    def laplace(self, s):
        return self.density.laplace(s)

    def kappa(self) -> PoleSum:
        """Time-domain ``kappa`` with Laplace transform ``s f~ / (1 - f~)``."""
        return laplace_quotient(self.density, self.survival)

    def to_dict(self):
        return {"amplitudes": self.amplitudes.tolist(), "rates": self.rates.tolist()}
