"""Traveling waves of the Burgers-Hilbert equation ``f_t = H f + f f_x`` on the torus.

Modules: ``spectral`` (trigonometric fields, Hilbert transform, norms),
``wave`` (Taylor series and Newton continuation of the wave branch),
``bounds`` (numerical checks of the amplitude bound), ``spectrum`` (the
linearized operator), ``dynamics`` (time stepping and the modulated frame)
and ``cli``.
"""
from .spectral import TrigField, hilbert, deriv, multiply, norm
from .wave import TravelingWave, taylor_table, newton_refine, continuation

__all__ = ["TrigField", "hilbert", "deriv", "multiply", "norm",
           "TravelingWave", "taylor_table", "newton_refine", "continuation"]
__version__ = "0.1.0"
