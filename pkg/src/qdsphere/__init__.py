"""qdsphere: analysis of rational quadratic differentials on the sphere.

The pipeline runs parse -> critical inventory -> trajectory tracing ->
critical/fat/Reeb graphs -> classification -> signed measures, with an
independent polynomial-ODE oracle for cross-checking limit measures.
"""

from .core import (
    INFINITY,
    CriticalInventory,
    CriticalPoint,
    RationalQD,
    SqrtResidue,
    critical_directions,
    critical_inventory,
    parse_differential,
    sqrt_residue,
)

__version__ = "0.1.0"
