"""Numerical laboratory for plurisubharmonic interpolants near clean Lagrangian
intersections in the flat model C^n, and for reverse isoperimetric
inequalities of holomorphic curves with boundary on the model planes."""

from .jets import (
    Jet2,
    ScalarField,
    SmoothDomainError,
    apply_J,
    fd_hessian,
    grad_form_matrix,
    is_psd,
    levi_matrix,
    make_point,
    min_eigenvalue,
)
from .model import ModelParams, RegionLabel

__version__ = "0.1.0"
