"""Construction of legitimate memory kernels by normalizing a CP family."""

from .families import (CPFamily, DephasingFamily, ReducedFamily, SampledFamily,
                       ScalarFamily, SemigroupFamily, hadamard_family)
from .kernel import KernelFamily, alt_normalize, assemble_kernel, z_family
from .qfamily import (ChannelQ, DephasingQ, KrausQ, QFamily, build_q_channel,
                      build_q_dephasing, build_q_kraus)

__all__ = [
    "CPFamily", "ScalarFamily", "DephasingFamily", "SemigroupFamily", "ReducedFamily",
    "SampledFamily", "hadamard_family", "QFamily", "ChannelQ", "KrausQ", "DephasingQ",
    "build_q_channel", "build_q_kraus", "build_q_dephasing", "KernelFamily",
    "assemble_kernel", "alt_normalize", "z_family",
]
