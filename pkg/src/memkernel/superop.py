"""Dense operator and superoperator algebra.

Superoperators are ``(d*d, d*d)`` complex arrays acting on column-stacked
operators, so that ``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import MemKernelError, NotCompletelyPositive

DEFAULT_TOL = 1e-10


def _square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MemKernelError(f"{name} must be square, got shape {a.shape}")
    return a


def super_dim(S) -> int:
    """Return the Hilbert space dimension ``d`` of a ``d^2 x d^2`` superoperator."""
    n = _square(S, "superoperator").shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise MemKernelError(f"superoperator size {n} is not a perfect square")
    return d


def vectorize(rho):
    """Column-stack a square matrix into a vector of length ``d**2``."""
    rho = _square(rho, "operator")
    return rho.reshape(-1, order="F")


def devectorize(v):
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise MemKernelError(f"vector length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")


def identity_super(d: int):
    return np.eye(d * d, dtype=complex)


def left(A):
    """Superoperator of ``rho -> A rho``."""
    A = _square(A)
    return np.kron(np.eye(A.shape[0]), A)


def right(B):
    """Superoperator of ``rho -> rho B``."""
    B = _square(B)
    return np.kron(B.T, np.eye(B.shape[0]))


def sandwich(A, B=None):
    """Superoperator of ``rho -> A rho B^dagger``.

    With ``B`` omitted the map is ``rho -> A rho A^dagger``.
    """
    A = _square(A)
    B = A if B is None else _square(B)
    if A.shape != B.shape:
        raise MemKernelError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return np.kron(B.conj(), A)


def apply(S, rho):
    """Apply a superoperator to an operator."""
    rho = _square(rho, "operator")
    return devectorize(np.asarray(S) @ vectorize(rho))


def _swap(d):
    # permutation with P vec(X) = vec(X^T)
    idx = np.arange(d * d).reshape((d, d), order="F").T.reshape(-1, order="F")
    P = np.zeros((d * d, d * d))
    P[np.arange(d * d), idx] = 1.0
    return P


def dual(S):
    """Dual map under the trace pairing ``Tr(S#(a) b) = Tr(a S(b))``."""
    S = np.asarray(S)
    d = super_dim(S)
    P = _swap(d)
    return P @ S.T @ P


def choi_of(S):
    """Choi matrix ``sum_ij |i><j| (x) S(|i><j|)``."""
    S = np.asarray(S)
    d = super_dim(S)
    return S.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def super_from_choi(C):
    C = np.asarray(C)
    d = super_dim(C)
    return C.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def kraus_to_super(ops: Sequence):
    ops = list(ops)
    if not ops:
        raise MemKernelError("empty Kraus list")
    return sum(sandwich(A) for A in ops)


def kraus_from_choi(C, tol: float = DEFAULT_TOL) -> list:
    """Spectral Kraus operators of a completely positive map.

    Eigenvalues are taken in descending order; those below
    ``tol * max(1, ||C||_2)`` are dropped. Raises
    :class:`NotCompletelyPositive` when the smallest eigenvalue is below
    minus that threshold.
    """
    C = np.asarray(C)
    d = super_dim(C)
    H = 0.5 * (C + C.conj().T)
    w, V = np.linalg.eigh(H)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -tol * scale:
        raise NotCompletelyPositive(
            f"Choi matrix has eigenvalue {w[0]:.3e} < {-tol * scale:.3e}")
    ops = []
    for lam, v in zip(w[::-1], V[:, ::-1].T):
        if lam <= tol * scale:
            break
        ops.append(np.sqrt(lam) * v.reshape((d, d), order="F"))
    if not ops:
        ops.append(np.zeros((d, d), dtype=complex))
    return ops


class CPVerdict(NamedTuple):
    ok: bool
    min_eig: float
    scale: float

    def __bool__(self):
        return self.ok


def choi_min_eig(S) -> tuple[float, float]:
    """Smallest Choi eigenvalue and the spectral norm of the Choi matrix."""
    C = choi_of(S)
    w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    return float(w[0]), float(np.max(np.abs(w)))


def is_cp(S, tol: float = DEFAULT_TOL) -> CPVerdict:
    """Complete positivity test on the Choi spectrum (relative tolerance)."""
    lo, norm = choi_min_eig(S)
    scale = max(1.0, norm)
    return CPVerdict(lo >= -tol * scale, lo, scale)


def unital_defect(S, raw: bool = False):
    """``S#(I) - I``, or ``S#(I)`` itself when ``raw`` is set.

    A map is trace preserving iff the defect vanishes; a memory kernel
    satisfies the trace condition iff the raw value vanishes.
    """
    d = super_dim(S)
    out = apply(dual(S), np.eye(d))
    return out if raw else out - np.eye(d)


def transposition(d: int):
    """The (not completely positive) transposition map."""
    return _swap(d).astype(complex)


def depolarizing(d: int, p: float = 1.0):
    """``rho -> (1 - p) rho + p Tr(rho) I / d``."""
    v = vectorize(np.eye(d)).astype(complex)
    return (1 - p) * identity_super(d) + p * np.outer(v, v.conj()) / d


def check_density(rho, tol: float = 1e-12):
    """Validate a density operator and return it as a complex array."""
    rho = np.asarray(_square(rho, "density operator"), dtype=complex)
    if not np.all(np.isfinite(rho)):
        raise MemKernelError("density operator has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise MemKernelError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise MemKernelError(f"density operator trace {np.trace(rho).real} != 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -tol:
        raise MemKernelError(f"density operator has eigenvalue {lo:.3e}")
    return rho


def hermitian_sqrt_inv(X, floor: float = 1e-12):
    """``X^{-1/2}`` for a positive definite Hermitian matrix."""
    w, V = np.linalg.eigh(0.5 * (X + X.conj().T))
    if w[0] <= floor:
        raise np.linalg.LinAlgError(f"matrix not positive definite (min eig {w[0]:.3e})")
    return (V / np.sqrt(w)) @ V.conj().T


def hermitian_sqrt(X):
    w, V = np.linalg.eigh(0.5 * (X + X.conj().T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
