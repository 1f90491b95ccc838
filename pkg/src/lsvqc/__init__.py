"""Subspace-restricted local compilation of many-body time evolution, with
dynamics/Green's-function simulation and gate-resource estimation."""

__version__ = "0.1.0"
