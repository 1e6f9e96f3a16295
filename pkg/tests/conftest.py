import math
from itertools import combinations

import numpy as np
import pytest


def brute_esp(z, r):
    """e_0..e_r by summing products over every subset of each size."""
    z = [float(v) for v in z]
    return np.array([1.0] + [sum(math.prod(c) for c in combinations(z, n)) for n in range(1, r + 1)])


def central_diff(f, x, h):
    """Central finite differences of scalar ``f`` at ``x`` in every coordinate."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        out[i] = (f(x + step) - f(x - step)) / (2 * h)
    return out


def five_point_diff(f, x, h):
    """Fourth-order central differences; truncation error O(h^4)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
