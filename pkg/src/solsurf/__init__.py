"""Soliton surfaces of the ODE u_xx = f'(u)/2 from its Lax pair and wave function."""
from .elliptic import carlson_rf, carlson_rj, ellint_pi, jacobi_sn_cn_dn, weierstrass_p
from .lax import LaxEntries, SpectralPoint, lax_residual
from .potential import NamedSolution, Potential
from .sl2 import Sl2Element, euclidean, killing
from .surface import (SurfaceParams, SurfaceSample, build_surface, f_gauge, f_q1, f_sym_tafel,
                      integrate_surface)
from .symmetry import Characteristic
from .wavefunction import wave_function

__version__ = "0.1.0"

__all__ = [
    "carlson_rf", "carlson_rj", "ellint_pi", "jacobi_sn_cn_dn", "weierstrass_p",
    "LaxEntries", "SpectralPoint", "lax_residual", "NamedSolution", "Potential",
    "Sl2Element", "euclidean", "killing", "SurfaceParams", "SurfaceSample", "build_surface",
    "f_gauge", "f_q1", "f_sym_tafel", "integrate_surface", "Characteristic", "wave_function",
]
