"""Deterministic floating-point reductions.

Final reductions that land in reports go through ``exact_sum`` (Shewchuk
accumulation, correctly rounded, order independent), so output files do not
depend on chunking or thread count.
"""

import math

import numpy as np


def exact_sum(values) -> float:
    """Correctly rounded sum of a 1-d array or iterable of floats."""
    arr = np.asarray(values, dtype=np.float64)
    return math.fsum(arr.tolist())


def exact_weighted_power_sum(weights, values, exponent: float) -> float:
    """Correctly rounded sum of ``weights * |values|**exponent``."""
    w = np.asarray(weights, dtype=np.float64)
    v = np.abs(np.asarray(values, dtype=np.float64)) ** exponent
    return math.fsum((w * v).tolist())
