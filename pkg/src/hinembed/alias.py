"""Walker/Vose alias tables for O(1) sampling from fixed discrete distributions.

Several tables can share one pair of arrays: a *segmented* table stores the
tables for consecutive segments back to back, and a draw from segment ``k``
only touches ``offsets[k]:offsets[k+1]``. Heterogeneous negative sampling
keeps one segment per node type this way.
"""
import numpy as np
from numba import njit

from .rng import randint, uniform


@njit(cache=True)
def _build(weights, prob, alias):
    n = weights.shape[0]
    total = weights.sum()
    scaled = weights * (n / total)
    small = np.empty(n, np.int64)
    large = np.empty(n, np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        g = large[nl]
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            small[ns] = g
            ns += 1
        else:
            large[nl] = g
            nl += 1
    # leftovers are 1 up to rounding
    for k in range(nl):
        prob[large[k]] = 1.0
        alias[large[k]] = large[k]
    for k in range(ns):
        prob[small[k]] = 1.0
        alias[small[k]] = small[k]


@njit(cache=True, inline="always")
def draw(prob, alias, lo, hi, state):
    """Index in ``[lo, hi)`` drawn from the table stored in that slice."""
    i = lo + randint(state, hi - lo)
    if uniform(state) < prob[i]:
        return i
    return lo + alias[i]


class AliasTable:
    """Alias tables over one or more segments of a weight vector.

    Parameters
    ----------
    weights : array_like
        Non-negative weights.
    offsets : array_like, optional
        Segment boundaries ``[0, ..., len(weights)]``. Defaults to a single
        segment covering all weights. Each segment needs positive total
        weight; empty segments are allowed and cannot be drawn from.
    """

    def __init__(self, weights, offsets=None):
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        if offsets is None:
            offsets = [0, weights.size]
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.prob = np.ones(weights.size)
        self.alias = np.zeros(weights.size, dtype=np.int64)
        for lo, hi in zip(self.offsets[:-1], self.offsets[1:]):
            if hi == lo:
                continue
            seg = weights[lo:hi]
            if seg.sum() <= 0:
                raise ValueError(f"segment [{lo}, {hi}) has zero total weight")
            prob, alias = self.prob[lo:hi], self.alias[lo:hi]
            _build(seg.copy(), prob, alias)

    def __len__(self):
        return self.prob.size

    def probabilities(self, segment=0):
        """Exact distribution encoded by one segment, for checking."""
        lo, hi = self.offsets[segment], self.offsets[segment + 1]
        n = hi - lo
        p = self.prob[lo:hi] / n
        out = p.copy()
        np.add.at(out, self.alias[lo:hi], (1.0 - self.prob[lo:hi]) / n)
        return out

    def sample(self, rng, size=None, segment=0):
        """Draw indices with a numpy ``Generator`` (Python-side use)."""
        lo, hi = self.offsets[segment], self.offsets[segment + 1]
        n = hi - lo
        shape = () if size is None else size
        i = rng.integers(0, n, size=shape)
        keep = rng.random(size=shape) < self.prob[lo + i]
        return lo + np.where(keep, i, self.alias[lo + i])
