"""Exact fermionic dynamics versus Hartree / Hartree-Fock mean-field dynamics on 1D grids."""

__version__ = "0.1.0"

from . import alpha, diagnostics, fock, lattice, propagate  # noqa: E402
from .errors import (ConfigError, DegenerateInputError, IntegratorAccuracyError,  # noqa: E402
                     InternalConsistencyError, InvalidArgumentError, MflabError, PropagationError,
                     ResourceLimitError, UnsupportedError)
