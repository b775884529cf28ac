"""
jumpbem

A boundary-element solver for the three-dimensional Laplace jump problem: a
harmonic field inside and outside a closed surface whose trace and normal
derivative jump across it with prescribed weights. Solutions are represented
as a sum of simple and double layer potentials and computed either through a
sequential chain of boundary-operator solves or one coupled dense system.
"""

from .version import __version__

__all__ = ["__version__"]
