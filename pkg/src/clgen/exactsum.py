"""Order-independent floating point summation.

Running sums are carried as non-overlapping expansions (lists of float
partials whose exact sum is the exact sum of the inputs) and rounded once
when a value is needed.  The rounded result is the correctly rounded exact
sum, so it does not depend on how the inputs were grouped: a block-wise
parallel scan and a single left-to-right pass give identical bits.
"""

import math

import numpy as np
from numba import njit

# Non-overlapping partials of finite doubles never exceed ~40 entries.
CAPACITY = 64


@njit(cache=True, nogil=True)
def grow(parts, k, x):
    """Add ``x`` into the expansion ``parts[:k]`` in place; return new length."""
    i = 0
    for idx in range(k):
        y = parts[idx]
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo != 0.0:
            parts[i] = lo
            i += 1
        x = hi
    parts[i] = x
    return i + 1


@njit(cache=True, nogil=True)
def round_parts(parts, k):
    """Correctly rounded value of the expansion ``parts[:k]`` (half-even)."""
    if k == 0:
        return 0.0
    n = k - 1
    hi = parts[n]
    lo = 0.0
    while n > 0:
        x = hi
        n -= 1
        y = parts[n]
        hi = x + y
        yr = hi - x
        lo = y - yr
        if lo != 0.0:
            break
    if n > 0 and ((lo < 0.0 and parts[n - 1] < 0.0) or (lo > 0.0 and parts[n - 1] > 0.0)):
        y = lo * 2.0
        x = hi + y
        yr = x - hi
        if y == yr:
            hi = x
    return hi


@njit(cache=True, nogil=True)
def _accumulate(values, parts, k):
    for i in range(values.shape[0]):
        k = grow(parts, k, values[i])
    return k


@njit(cache=True, nogil=True)
def _prefix_rounded(values, parts, k, out):
    for i in range(values.shape[0]):
        k = grow(parts, k, values[i])
        out[i] = round_parts(parts, k)
    return k


def new_buffer(partials=()):
    """Fresh working buffer seeded with ``partials``; returns ``(buf, k)``."""
    buf = np.zeros(CAPACITY, dtype=np.float64)
    k = 0
    for p in partials:
        k = grow(buf, k, float(p))
    return buf, k


def partials_of(values, start=()):
    """Exact expansion of ``sum(start) + sum(values)`` as a tuple of floats."""
    buf, k = new_buffer(start)
    k = _accumulate(np.ascontiguousarray(values, dtype=np.float64), buf, k)
    return tuple(buf[:k].tolist())


def merge(a, b):
    """Exact expansion of the sum of two expansions."""
    buf, k = new_buffer(a)
    for p in b:
        k = grow(buf, k, float(p))
    return tuple(buf[:k].tolist())


def negate(a):
    return tuple(-p for p in a)


def value(partials):
    """Correctly rounded value of an expansion."""
    # math.fsum over exact partials is the correctly rounded total.
    return math.fsum(partials)


def exact_sum(values):
    return value(partials_of(values))


def exact_prefix(values, start=()):
    """Correctly rounded inclusive prefix sums, optionally offset by ``start``.

    Returns ``(prefix, partials)`` where ``partials`` is the exact expansion
    of the final running sum.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    buf, k = new_buffer(start)
    out = np.empty(values.shape[0], dtype=np.float64)
    k = _prefix_rounded(values, buf, k, out)
    return out, tuple(buf[:k].tolist())
