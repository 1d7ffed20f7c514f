"""Ion rings in linear multipole rf traps: statics, molecular dynamics and clock shift budgets."""

from .constants import CONSTANTS, IonSpecies, builtin_ca40, species_by_name
from .trap import TrapConfig, QuadrupoleError

__all__ = ["CONSTANTS", "IonSpecies", "builtin_ca40", "species_by_name", "TrapConfig",
           "QuadrupoleError"]
__version__ = "0.1.0"
