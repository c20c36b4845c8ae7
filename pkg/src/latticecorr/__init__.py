"""Angular pair correlations of PSL(2, Z) orbits in the hyperbolic plane."""

__version__ = "0.1.0"
