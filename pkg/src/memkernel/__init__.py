"""Legitimate memory kernels for non-Markovian quantum and classical master equations."""

__version__ = "0.1.0"

from .densities import WaitingDensity
from .errors import *  # noqa: F403
from .expsum import ExpSum, laplace_quotient
from .forge import (CPFamily, DephasingFamily, KernelFamily, ReducedFamily, ScalarFamily,
                    SemigroupFamily, assemble_kernel, build_q_channel, build_q_dephasing,
                    build_q_kraus, hadamard_family)
from .grid import TimeGrid
from .markov import GKSLSpec, NonHermitianHam, build_gksl, split_bz
from .propagate import (MapTrajectory, exp_embed_solve, renewal_solve, resolvent_at,
                        series_partial_sum, talbot_invert, volterra_solve)
from .superop import (choi_of, dual, is_cp, kraus_from_choi, kraus_to_super, sandwich,
                      super_from_choi)
from .verify import CertReport, bernstein_moments, certify, certify_trajectory

__all__ = [
    "WaitingDensity", "ExpSum", "laplace_quotient", "CPFamily", "DephasingFamily",
    "KernelFamily", "ReducedFamily", "ScalarFamily", "SemigroupFamily", "assemble_kernel",
    "build_q_channel", "build_q_dephasing", "build_q_kraus", "hadamard_family", "TimeGrid",
    "GKSLSpec", "NonHermitianHam", "build_gksl", "split_bz", "MapTrajectory",
    "exp_embed_solve", "renewal_solve", "resolvent_at", "series_partial_sum", "talbot_invert",
    "volterra_solve", "choi_of", "dual", "is_cp", "kraus_from_choi", "kraus_to_super",
    "sandwich", "super_from_choi", "CertReport", "bernstein_moments", "certify",
    "certify_trajectory",
]
