"""siegellab: a numerical/combinatorial laboratory for quadratic and cubic
Siegel polynomials with bounded-type rotation number."""

from siegellab.rotation import RotationNumber

__all__ = ["RotationNumber"]
__version__ = "0.1.0"
