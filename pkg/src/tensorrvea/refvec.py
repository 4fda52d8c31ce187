"""Reference vectors: simplex lattice, unit scaling, neighbor angles, adaptation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import tensor_ops as T


def lattice_size(m: int, H: int) -> int:
    return math.comb(H + m - 1, m - 1)


def simplex_lattice(m: int, H: int) -> np.ndarray:
    """All compositions of ``H`` into ``m`` nonnegative parts, divided by ``H``.

    Rows are in lexicographic order of the stars-and-bars bar positions and
    sum to 1 (up to rounding of ``k / H``).
    """
    if m < 2 or H < 1:
        raise ValueError(f"simplex lattice needs m >= 2 and H >= 1, got m={m}, H={H}")
    rows = []
    for bars in itertools.combinations(range(H + m - 1), m - 1):
        edges = (-1,) + bars + (H + m - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(m)])
    return np.asarray(rows, dtype=np.float64) / H


def normalize_to_unit(V) -> np.ndarray:
    V = T.as_tensor(V)
    norms = T.row_norms(V)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero row")
    return V / T.repeat_col(norms, V.shape[1])


def gamma(V) -> np.ndarray:
    """Smallest angle from each reference vector to any other one, shape ``(r, 1)``.

    The diagonal of the pairwise angle matrix is masked to +inf before the
    row minimum, so a vector is never compared with itself.
    """
    V = T.as_tensor(V)
    r = V.shape[0]
    if r < 2:
        raise ValueError("gamma needs at least two reference vectors")
    angles = T.arccos(T.matmul(V, V.T))
    angles = np.where(np.eye(r, dtype=bool), np.inf, angles)
    g, _ = T.row_min_argmin(angles)
    if np.any(g <= 0):
        raise ValueError("duplicate reference vectors give a zero neighbor angle")
    return g


def adapt(V0, z_min, z_max, current=None) -> np.ndarray:
    """Rescale the initial vectors by the objective range and renormalize.

    If any objective has a non-positive range the adaptation is skipped and
    ``current`` (or ``V0`` if not given) is returned.
    """
    V0 = T.as_tensor(V0)
    span = T.as_tensor(z_max) - T.as_tensor(z_min)
    if np.any(span <= 0):
        return V0 if current is None else T.as_tensor(current)
    return normalize_to_unit(V0 * T.repeat_row(span, V0.shape[0]))


@dataclass(frozen=True)
class RefVectorSet:
    V0: np.ndarray
    V: np.ndarray
    gamma: np.ndarray

    @classmethod
    def from_vectors(cls, V) -> "RefVectorSet":
        V = normalize_to_unit(V)
        return cls(V0=V, V=V, gamma=gamma(V))

    @classmethod
    def lattice(cls, m: int, H: int) -> "RefVectorSet":
        return cls.from_vectors(simplex_lattice(m, H))

    @property
    def r(self) -> int:
        return self.V.shape[0]

    def adapted(self, z_min, z_max) -> "RefVectorSet":
        V = adapt(self.V0, z_min, z_max, current=self.V)
        if V is self.V:
            return self
        return RefVectorSet(V0=self.V0, V=V, gamma=gamma(V))
