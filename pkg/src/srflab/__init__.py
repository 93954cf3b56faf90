"""Numerical laboratory for a normalized transverse Ricci flow on
quasi-regular Sasakian three- and five-manifolds."""

__version__ = "0.1.0"

from . import errors  # noqa: F401
