"""Weighted interacting diffusions with singular kernels.

Particle-side simulation of signed-weight vortex dynamics, a pseudo-spectral
solver for the coupled vorticity / passive-scalar limit, and the estimators
needed to check the mean-field convergence numerically.
"""

__version__ = "0.1.0"

from .kernels import (KernelSpec, admissibility_report, biot_savart,
                      evaluate as kernel_eval, periodic_multiplier, power_law,
                      zero_kernel)
from .measures import (DensityGrid, SignedEmpiricalMeasure, count_pairings,
                       entropy_estimate, enumerate_pairings, fisher_estimate,
                       gamma_moment, kde, pair, rotate_pair)
from .particles import InitialLaw, ParticleState, SimConfig, drift, simulate
from .spectral import PdeConfig, SpectralState, solve
from .weights import WeightFamily, WeightSequence, check_wr, lr_norm

__all__ = [
    "KernelSpec", "WeightSequence", "WeightFamily", "ParticleState",
    "SignedEmpiricalMeasure", "DensityGrid", "SpectralState", "SimConfig",
    "PdeConfig", "InitialLaw", "biot_savart", "power_law", "zero_kernel",
    "kernel_eval", "periodic_multiplier", "admissibility_report", "lr_norm",
    "check_wr", "drift", "simulate", "pair", "kde", "fisher_estimate",
    "entropy_estimate", "gamma_moment", "count_pairings",
    "enumerate_pairings", "rotate_pair", "solve",
]
