"""Serialization: JSON matrices, kernel artifacts, trajectory CSV.

Matrices are ``{"rows", "cols", "re", "im"}`` with row-major flattened
parts.  Floats are written with 17 significant digits (CSV) or Python's
shortest round-trip repr (JSON), so reloading is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import MemKernelError
from .forge.kernel import KernelFamily
from .grid import TimeGrid
from .propagate import MapTrajectory

FMT = "%.17g"


def matrix_to_dict(M) -> dict:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise MemKernelError(f"expected a 2-d matrix, got shape {M.shape}")
    return {"rows": M.shape[0], "cols": M.shape[1],
            "re": M.real.ravel().tolist(), "im": M.imag.ravel().tolist()}


def matrix_from_dict(obj, name: str = "matrix") -> np.ndarray:
    """Decode a matrix; ``im`` may be omitted for real matrices."""
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros(rows * cols)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MemKernelError(f"{name}: malformed matrix ({exc})") from None
    if re.size != rows * cols or im.size != rows * cols:
        raise MemKernelError(f"{name}: expected {rows * cols} entries, got re={re.size}, im={im.size}")
    return (re + 1j * im).reshape(rows, cols)


def _stack_to_list(A):
    A = np.asarray(A, dtype=complex)
    return {"shape": list(A.shape), "re": A.real.ravel().tolist(), "im": A.imag.ravel().tolist()}


def _stack_from_list(obj):
    shape = tuple(obj["shape"])
    return (np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)).reshape(shape)


def kernel_to_dict(K: KernelFamily, grid: TimeGrid) -> dict:
    """Dirac part, exponential-sum terms (if any) and the smooth part sampled on ``grid``."""
    out = {
        "format": "memkernel-kernel/1",
        "grid": {"h": grid.h, "N": grid.N},
        "delta": matrix_to_dict(K.delta),
        "poles": {"re": K.poles.real.tolist(), "im": K.poles.imag.tolist()},
        "residues": _stack_to_list(K.residues),
        "samples": None if K.is_delta_only else _stack_to_list(K.sample(grid)),
        "meta": {k: v for k, v in sorted(K.meta.items()) if isinstance(v, (str, int, float))},
    }
    return out


def kernel_from_dict(obj) -> tuple[KernelFamily, TimeGrid]:
    if obj.get("format") != "memkernel-kernel/1":
        raise MemKernelError("not a kernel artifact")
    grid = TimeGrid(obj["grid"]["h"], obj["grid"]["N"])
    delta = matrix_from_dict(obj["delta"], "delta")
    poles = np.asarray(obj["poles"]["re"], dtype=float) + 1j * np.asarray(obj["poles"]["im"], dtype=float)
    residues = _stack_from_list(obj["residues"])
    samples = None if obj["samples"] is None else (grid, _stack_from_list(obj["samples"]))
    K = KernelFamily(delta, poles, residues if len(poles) else None, samples=samples,
                     meta=dict(obj.get("meta", {})))
    return K, grid


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def save_kernel(path, K: KernelFamily, grid: TimeGrid):
    write_json(path, kernel_to_dict(K, grid))


def load_kernel(path):
    return kernel_from_dict(read_json(path))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(FMT % x for x in r) + "\n")


def write_trajectory_csv(path, traj: MapTrajectory):
    """Columns ``t``, then ``re_a_b`` / ``im_a_b`` for every superoperator entry (row-major)."""
    D = traj.maps.shape[1]
    header = ["t"] + [f"{p}_{a}_{b}" for a in range(D) for b in range(D) for p in ("re", "im")]
    flat = traj.maps.reshape(len(traj.maps), -1)
    inter = np.empty((flat.shape[0], 2 * flat.shape[1]))
    inter[:, 0::2] = flat.real
    inter[:, 1::2] = flat.imag
    _write_rows(path, header, np.column_stack([traj.times, inter]))


def read_trajectory_csv(path) -> MapTrajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    vals = data[:, 1::2] + 1j * data[:, 2::2]
    D = int(round(np.sqrt(vals.shape[1])))
    if len(t) < 2:
        raise MemKernelError("trajectory needs at least two nodes")
    h = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - h)) > 1e-9 * max(1.0, t[-1]):
        raise MemKernelError("trajectory times are not uniform")
    return MapTrajectory(TimeGrid(h, len(t) - 1), vals.reshape(len(t), D, D))


def write_states_csv(path, times, states):
    """Columns ``t``, populations ``p_k``, then upper-triangle coherences re/im."""
    d = states.shape[1]
    header = ["t"] + [f"p_{k}" for k in range(d)]
    cols = [times] + [states[:, k, k].real for k in range(d)]
    for a in range(d):
        for b in range(a + 1, d):
            header += [f"re_{a}_{b}", f"im_{a}_{b}"]
            cols += [states[:, a, b].real, states[:, a, b].imag]
    _write_rows(path, header, np.column_stack(cols))


def write_populations_csv(path, times, P):
    header = ["t"] + [f"p_{k}" for k in range(P.shape[1])]
    _write_rows(path, header, np.column_stack([times, P]))
