"""Numerical toolkit for Lame eigenfunctions near sector vertices.

Modules
-------
specfun
    Integer-order Bessel, Neumann and Hankel functions.
lame_core
    Fourier-Bessel expansions of Lame eigenfunctions, tractions and traces.
cgo
    Complex geometrical optics test fields, boundary integrals and remainders.
holmgren
    Coefficient systems and vanishing certificates for lines and sectors.
scattering
    Forward elastic scattering by polygons and far-field comparisons.
cli
    Command-line entry point producing JSON and CSV reports.
"""

from .errors import NumericalError, ParameterError, SchemaError
from .lame_core import CoeffSeq, LameParams, make_params

__all__ = ["CoeffSeq", "LameParams", "NumericalError", "ParameterError", "SchemaError", "make_params"]
__version__ = "0.1.0"
