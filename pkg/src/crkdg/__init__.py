"""Bound-preserving compact Runge-Kutta discontinuous Galerkin solver."""

from crkdg.basis import (
    Basis,
    ConvexDecomposition,
    QuadratureRule,
    build_decomposition,
    cfl_constants,
    gauss_lobatto_rule,
    gauss_rule,
)

__version__ = "0.1.0"
