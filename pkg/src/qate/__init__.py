"""Quasi-adiabatic thermal evolution (QATE) of Gibbs states.

Three simulation engines share one protocol layer and one benchmark layer:

* ``qate.tfim_blocks``: translation-invariant transverse-field Ising chains via
  independent 4x4 momentum blocks (N up to many thousands).
* ``qate.gaussian``: general quadratic fermion Hamiltonians through their
  Bogoliubov-de Gennes matrices.
* ``qate.exact_diag``: dense matrices for small interacting chains.

``qate.experiments`` turns JSON configurations into parameter sweeps, fits and
plot-data bundles.
"""

from .errors import ConfigurationError, DomainError, QateError, ResourceError, SingularityError
from .protocol import HamiltonianSpec, QateConfig, RampSchedule

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "HamiltonianSpec",
    "QateConfig",
    "QateError",
    "RampSchedule",
    "ResourceError",
    "SingularityError",
    "__version__",
]
