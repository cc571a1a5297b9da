"""Hodograph solvers for the hyperbolic Monge-Ampere equation.

The nonlinear equation ``w_xx w_yy - w_xy**2 = -lambda(y)**2`` becomes, after the
hodograph change of variables, the linear damped wave equation

    2 lambda(s+t) x_st + lambda'(s+t) (x_s + x_t) = 0

in characteristic coordinates ``s = (u+p)/2``, ``t = (u-p)/2``.  This package
solves that equation through two-dimensional Volterra integral equations and
maps the result back to a physical surface.
"""

from hodograph.curvature import (
    ContractionBounds,
    CurvatureProfile,
    contraction_bounds,
    make_profile,
    u_of_y,
    y_of_u,
)
from hodograph.grid import Field, Grid, RectangleGrid, TruncatedConeGrid

__version__ = "0.1.0"

__all__ = [
    "ContractionBounds",
    "CurvatureProfile",
    "Field",
    "Grid",
    "RectangleGrid",
    "TruncatedConeGrid",
    "contraction_bounds",
    "make_profile",
    "u_of_y",
    "y_of_u",
]
