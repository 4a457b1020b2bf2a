from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MemKernelError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n * h`` for ``n = 0..N``."""

    h: float
    N: int

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise MemKernelError(f"grid step must be positive, got {self.h}")
        if int(self.N) != self.N or self.N < 1:
            raise MemKernelError(f"grid count must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def span(cls, T: float, h: float) -> "TimeGrid":
        return cls(h, int(round(T / h)))

    @property
    def T(self) -> float:
        return self.h * self.N

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.N + 1)

    def index_of(self, t: float) -> int:
        n = int(round(t / self.h))
        if abs(n * self.h - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= n <= self.N:
            raise MemKernelError(f"time {t} is not a grid node")
        return n
