"""Deterministic kinetic transport solver for 1D silicon diodes.

Discontinuous Galerkin discretization of the coupled electron transport /
electrostatic field problem in (x, r, mu) phase space, with parabolic,
Kane, and tabulated spherically-averaged conduction bands.
"""

__version__ = "0.1.0"
