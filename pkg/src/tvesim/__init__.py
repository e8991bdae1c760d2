"""Two-level Galerkin simulator for quasi-static thermo-visco-elasticity with
homogeneous thermal expansion."""

__version__ = "0.1.0"
