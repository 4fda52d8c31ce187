"""Helpers shared by the operator tests and the acceptance suite."""

import numpy as np

from tensorrvea import operators as ops
from tensorrvea.rng import RngStream


class FixedStream:
    """Stands in for an RngStream and hands out prepared blocks in order."""

    def __init__(self, *blocks):
        self.blocks = list(blocks)

    def uniform(self, rows, cols):
        block = np.asarray(self.blocks.pop(0), dtype=np.float64)
        assert block.shape == (rows, cols)
        return block


def pair_mean_gap(X, seed, p):
    """Pair-mean difference before clamping and its rounding allowance."""
    n, d = X.shape
    h = n // 2
    x1, x2 = X[:h], X[h : 2 * h]
    out = ops.sbx_raw(X, RngStream(seed), p)
    B = ops.sbx_spread(RngStream(seed), h, d, p)
    gap = np.abs((out[:h] + out[h : 2 * h]) / 2 - (x1 + x2) / 2)
    # the two offspring formulas are each exact up to a few roundings of terms
    # no larger than (1 + |B|) * max(|x1|, |x2|)
    allowance = 4 * np.finfo(float).eps * (1 + np.abs(B)) * np.maximum(np.abs(x1), np.abs(x2))
    return gap, allowance
