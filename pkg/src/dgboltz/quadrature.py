"""Small Gauss-Legendre helpers shared by projection and assembly."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_rule(n: int, lo, hi):
    """Nodes/weights of n-point Gauss-Legendre on [lo, hi].

    lo/hi may be arrays (one interval per entry); returned arrays have the
    interval axes first and the node axis last.
    """
    x, w = leggauss(n)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid = 0.5 * (lo + hi)[..., None]
    half = 0.5 * (hi - lo)[..., None]
    return mid + half * x, half * w
