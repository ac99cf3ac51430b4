"""Steady-state currents and entropy production of free-fermion junctions.

Subpackages and modules:

``model``       reservoirs, form factors, junction specs
``quadrature``  adaptive Gauss-Legendre rules and energy-shell reductions
``transport``   perturbative currents, resistance, Onsager checks
``dyson``       norms, tree counts and the convergence certificate
``oracle``      exact lattice dynamics used as an independent check
``cli``         TOML-driven sweeps with CSV/JSON output
"""

from .errors import NessflowError
from .model import JunctionSpec, PairFormFactor, RadialFormFactor, ReservoirState, fermi
from .quadrature import DEFAULT_CONFIG, QuadratureConfig
from .transport import (
    TransportResult,
    currents,
    energy_current_P22,
    entropy_rate_E22,
    particle_current_J22,
    resistance,
    thermal_power_P24,
)

__version__ = "0.1.0"

__all__ = [
    "NessflowError",
    "JunctionSpec",
    "PairFormFactor",
    "RadialFormFactor",
    "ReservoirState",
    "fermi",
    "DEFAULT_CONFIG",
    "QuadratureConfig",
    "TransportResult",
    "currents",
    "energy_current_P22",
    "entropy_rate_E22",
    "particle_current_J22",
    "resistance",
    "thermal_power_P24",
    "__version__",
]
