"""hopflab: numerical laboratory for boundary-point behavior of uniformly
elliptic equations on convex graph domains.

The package measures how the normal derivative of a solution at a convex
boundary point responds to the boundary's modulus of continuity: Dini
moduli keep the Hopf quotient u(0, t)/t bounded away from zero, while a
non-Dini boundary slope modulus drives it to zero.  Subpackages cover the
modulus calculus, convex boundary geometry, the elliptic operator and its
approximation, a curved-boundary finite-difference solver, barrier
certificates, and the dyadic oscillation-decay experiment.
"""

from . import barriers, convex_geometry, decay_analysis, elliptic_operator
from . import fd_solver, modulus

__all__ = [
    "barriers",
    "convex_geometry",
    "decay_analysis",
    "elliptic_operator",
    "fd_solver",
    "modulus",
]

__version__ = "0.1.0"
