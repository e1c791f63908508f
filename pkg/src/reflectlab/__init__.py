"""reflectlab: numerical laboratory for reflection positivity.

Modules
-------
sl2core      SL(2, R) group/algebra utilities, cone, semigroup, charts
oskernel     kernels, quadrature, bump bases, form matrices, Cayley constants
osquotient   radical quotients, induced operators, generator spectra, Phillips spaces
sl2series    discretised complementary series and its J-forms
heisenberg   Heisenberg group: Schroedinger model, uncorrelated subspaces, RP forms
axb          ax+b group: Q-fields, escape times, deficiency probe, no-go harness
cli          scenario runner
"""
__version__ = "0.1.0"

from . import axb, errors, heisenberg, oskernel, osquotient, sl2core, sl2series  # noqa: E402
from .errors import *  # noqa: F401,F403,E402

__all__ = ["axb", "errors", "heisenberg", "oskernel", "osquotient", "sl2core", "sl2series", "__version__"]
