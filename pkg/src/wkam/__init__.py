"""Whiskered invariant tori of conformally symplectic maps by a quasi-Newton parameterization method."""

__version__ = "0.1.0"
