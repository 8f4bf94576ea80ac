"""Exciton energy-transfer dynamics for light-harvesting complexes.

A hierarchy-of-auxiliary-matrices propagator with exact treatment of the
phonon memory (high-temperature Drude-Lorentz bath) combined with Markovian
radiative-decay and reaction-center trapping channels, a secular Born-Markov
reference solver, and observables/CLI for efficiency and trapping-time
studies of the 7-site FMO complex.
"""

__version__ = "0.1.0"

from .model import (BathParams, ExcitonSystem, MarkovRates, build_fmo_system,
                    gibbs_state, spectral_density)
from .hierarchy import (ABSENT, TRUNCATED, HierarchyGraph, enumerate_hierarchy,
                        hierarchy_size, index_of)
from .heom import (ConvergenceFailure, HierarchyState, PropagationConfig,
                   PropagationDiverged, auto_truncate, bath_backaction,
                   heom_rhs, lindblad_markov, propagate, propagate_from,
                   rk4_step)
from .observables import Trajectory, efficiency, thermal_deviation, trapping_time
from .redfield import (ExcitonEigenbasis, build_generator, decoherence_rate,
                       exciton_eigenbasis, propagate_redfield)

__all__ = [
    "__version__",
    "BathParams", "ExcitonSystem", "MarkovRates", "build_fmo_system",
    "gibbs_state", "spectral_density",
    "ABSENT", "TRUNCATED", "HierarchyGraph", "enumerate_hierarchy",
    "hierarchy_size", "index_of",
    "ConvergenceFailure", "HierarchyState", "PropagationConfig",
    "PropagationDiverged", "auto_truncate", "bath_backaction", "heom_rhs",
    "lindblad_markov", "propagate", "propagate_from", "rk4_step",
    "Trajectory", "efficiency", "thermal_deviation", "trapping_time",
    "ExcitonEigenbasis", "build_generator", "decoherence_rate",
    "exciton_eigenbasis", "propagate_redfield",
]
