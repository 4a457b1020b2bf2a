"""Certification of map trajectories.

Checks trace preservation and Choi positivity node by node, and the
moment hierarchy ``M_k(s) = int exp(-s t) t^k Lambda_t dt`` whose members
must all be completely positive for a legitimate evolution (necessary
conditions only).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from .errors import HorizonTooShort
from .propagate import MapTrajectory
from .superop import super_dim

DEFAULT_TOL = 1e-8
MOMENT_TOL = 1e-6
TAIL_LIMIT = 1e-10


def thread_count() -> int:
    env = os.environ.get("MEMKERNEL_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _choi_batch(maps):
    """Choi matrices of a stack of superoperators."""
    n = maps.shape[0]
    d = super_dim(maps[0])
    C = maps.reshape(n, d, d, d, d).transpose(0, 4, 2, 3, 1).reshape(n, d * d, d * d)
    return 0.5 * (C + C.conj().transpose(0, 2, 1))


def _choi_stats(maps):
    """``(min eigenvalue, spectral norm)`` of each Choi matrix."""
    def work(chunk):
        w = np.linalg.eigvalsh(_choi_batch(chunk))
        return w[:, 0], np.max(np.abs(w), axis=1)

    chunks = np.array_split(maps, max(1, min(thread_count(), len(maps))))
    chunks = [c for c in chunks if len(c)]
    if len(chunks) == 1:
        res = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            res = list(ex.map(work, chunks))
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


def trace_defects(maps) -> np.ndarray:
    """``max |Lambda#(I) - I|`` per map, from the partial trace of the superoperator."""
    d = super_dim(maps[0])
    # trace preservation is vec(I)^T Lambda = vec(I)^T
    vec_id = np.eye(d).reshape(-1, order="F")
    rows = np.einsum("a,nab->nb", vec_id, maps)
    return np.max(np.abs(rows - vec_id[None, :]), axis=1)


@dataclass
class CertReport:
    tolerances: dict
    times: list = field(default_factory=list)
    trace_defect: list = field(default_factory=list)
    min_choi_eig: list = field(default_factory=list)
    choi_scale: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def node_ok(self) -> bool:
        tol = self.tolerances.get("cp", DEFAULT_TOL)
        ttol = self.tolerances.get("trace", DEFAULT_TOL)
        return all(td <= ttol for td in self.trace_defect) and all(
            e >= -tol * max(1.0, c) for e, c in zip(self.min_choi_eig, self.choi_scale))

    @property
    def moments_ok(self) -> bool:
        tol = self.tolerances.get("moment", MOMENT_TOL)
        return all(m["min_choi_eig"] >= -tol for m in self.moments)

    @property
    def verdict(self) -> str:
        return "pass" if self.node_ok and self.moments_ok else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def merged(self, other: "CertReport") -> "CertReport":
        tol = dict(self.tolerances)
        tol.update(other.tolerances)
        return CertReport(tol, self.times + other.times, self.trace_defect + other.trace_defect,
                          self.min_choi_eig + other.min_choi_eig,
                          self.choi_scale + other.choi_scale,
                          self.moments + other.moments, self.notes + other.notes)

    def to_dict(self) -> dict:
        out = {
            "tolerances": dict(sorted(self.tolerances.items())),
            "times": self.times,
            "trace_defect": self.trace_defect,
            "min_choi_eig": self.min_choi_eig,
            "moments": self.moments,
            "verdict": self.verdict,
        }
        if self.notes:
            out["notes"] = self.notes
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def certify_trajectory(traj: MapTrajectory, tol: float = DEFAULT_TOL, stride: int = 1,
                       trace_tol: float | None = None) -> CertReport:
    """Trace defect and minimum Choi eigenvalue at every ``stride``-th node.

    A node passes when the trace defect is at most ``trace_tol`` (default
    ``tol``) and the minimum Choi eigenvalue is at least ``-tol * max(1, ||C||)``.
    """
    idx = np.arange(0, len(traj.maps), max(1, int(stride)))
    maps = traj.maps[idx]
    lo, scale = _choi_stats(maps)
    td = trace_defects(maps)
    return CertReport(
        tolerances={"cp": float(tol), "trace": float(tol if trace_tol is None else trace_tol)},
        times=[float(t) for t in traj.times[idx]],
        trace_defect=[float(x) for x in td],
        min_choi_eig=[float(x) for x in lo],
        choi_scale=[float(x) for x in scale],
    )


def _weights(grid):
    w = np.full(grid.N + 1, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def moment_maps(traj: MapTrajectory, s: float, k_max: int = 3):
    """Trapezoidal ``M_k = sum_n w_n exp(-s t_n) t_n^k Lambda_n`` for ``k = 0..k_max``."""
    t = traj.times
    base = _weights(traj.grid) * np.exp(-s * t)
    return np.stack([np.tensordot(base * t**k, traj.maps, axes=1) for k in range(k_max + 1)])


def tail_bound(s: float, k: int, T: float) -> float:
    """``int_T^inf exp(-s t) t^k dt`` (times ``sup ||Lambda||`` bounds the truncated tail)."""
    return float(math.factorial(k) / s ** (k + 1) * gammaincc(k + 1, s * T))


def bernstein_moments(traj: MapTrajectory, s_list, k_max: int = 3, tol: float = MOMENT_TOL,
                      accept_tail: bool = False) -> CertReport:
    """Moment hierarchy check at each ``s`` in ``s_list``.

    Raises :class:`HorizonTooShort` when ``exp(-s T) > 1e-10`` unless
    ``accept_tail`` is set; the tail bound is recorded either way.
    """
    s_list = np.atleast_1d(np.asarray(s_list, dtype=float))
    T = traj.grid.T
    worst = float(np.exp(-s_list.min() * T))
    if worst > TAIL_LIMIT and not accept_tail:
        raise HorizonTooShort(
            f"exp(-s T) = {worst:.2e} > {TAIL_LIMIT:g} at s = {s_list.min():g}, T = {T:g}")
    records = []
    for s in s_list:
        M = moment_maps(traj, s, k_max)
        lo, _ = _choi_stats(M)
        for k in range(k_max + 1):
            records.append({"k": k, "s": float(s), "min_choi_eig": float(lo[k]),
                            "tail_bound": tail_bound(s, k, T)})
    return CertReport(tolerances={"moment": float(tol)}, moments=records)


def certify(traj: MapTrajectory, tol: float = DEFAULT_TOL, stride: int = 1, s_list=None,
            k_max: int = 3, moment_tol: float = MOMENT_TOL, accept_tail: bool = False):
    """Node checks plus, when ``s_list`` is given, the moment hierarchy."""
    rep = certify_trajectory(traj, tol, stride)
    if s_list is not None and len(s_list):
        rep = rep.merged(bernstein_moments(traj, s_list, k_max, moment_tol, accept_tail))
    return rep


def complete_monotonicity_check(g, grid, s_list, k_max: int = 3, tol: float = 1e-10):
    """Scalar analogue: ``(-1)^k f^(k)(s) = int exp(-s t) t^k g(t) dt >= 0``.

    Returns ``(passed, table)`` where ``table[i, k]`` is the moment at
    ``s_list[i]``.
    """
    g = np.asarray(g, dtype=float)
    t = grid.times
    w = _weights(grid)
    table = np.array([[np.sum(w * np.exp(-s * t) * t**k * g) for k in range(k_max + 1)]
                      for s in s_list])
    scale = np.max(np.abs(table), axis=1, keepdims=True)
    passed = bool(np.all(table >= -tol * np.maximum(1.0, scale)))
    return passed, table
