"""Quality indicators: IGD, hypervolume (exact 2-D, Monte Carlo otherwise), expected utility.

Orientation is explicit. IGD and HV default to minimization; pass
``maximize=True`` to HV for return-oriented sets, which is the same as
evaluating the negated set against the negated reference point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_ops as T
from .refvec import lattice_size, simplex_lattice
from .rng import RngStream

_MC_CHUNK = 1 << 14


def igd(F, F_ref) -> float:
    """Mean distance from each reference point to its nearest solution."""
    F, F_ref = T.as_tensor(F), T.as_tensor(F_ref)
    if F.shape[0] == 0 or F_ref.shape[0] == 0:
        raise ValueError("IGD needs non-empty solution and reference sets")
    if F.shape[1] != F_ref.shape[1]:
        raise T.ShapeError("objective counts differ")

    def block(lo: int, hi: int) -> np.ndarray:
        diff = F_ref[lo:hi, None, :] - F[None, :, :]
        sq = np.zeros(diff.shape[:2])
        for j in range(diff.shape[2]):
            sq += diff[:, :, j] * diff[:, :, j]
        return np.sqrt(sq.min(axis=1))

    return float(T.map_blocks(block, F_ref.shape[0]).mean())


def _orient(F, ref, maximize: bool) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=np.float64).reshape(-1, np.size(ref))
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if maximize:
        return -F, -ref
    return F, ref


def hv_exact_2d(F, ref, maximize: bool = False) -> float:
    """Exact dominated area of a 2-objective set by a sort-and-sweep."""
    F, ref = _orient(F, ref, maximize)
    if ref.size != 2:
        raise ValueError("hv_exact_2d needs two objectives")
    F = F[np.all(F < ref, axis=1)]
    if F.shape[0] == 0:
        return 0.0
    F = F[np.lexsort((F[:, 1], F[:, 0]))]
    area = 0.0
    level = ref[1]
    for f1, f2 in F:
        if f2 < level:
            area += (ref[0] - f1) * (level - f2)
            level = f2
    return float(area)


def hv_mc(
    F,
    ref,
    samples: int = 100_000,
    seed: int = 0,
    maximize: bool = False,
    bounds=None,
) -> tuple[float, float]:
    """Monte Carlo hypervolume with its binomial standard error.

    Samples are uniform in the box between the component-wise best point of
    ``F`` and ``ref``. Passing ``bounds`` (the far corner of the box, in the
    same orientation as ``F``) fixes the box across calls, so a growing set
    always scores a nondecreasing estimate for one seed.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    F, ref = _orient(F, ref, maximize)
    F = F[np.all(F < ref, axis=1)]
    if bounds is not None:
        lo = np.asarray(bounds, dtype=np.float64).ravel()
        lo = np.minimum(-lo if maximize else lo, ref)
    elif F.shape[0] == 0:
        return 0.0, 0.0
    else:
        lo = F.min(axis=0)
    span = ref - lo
    volume = float(np.prod(span))
    if F.shape[0] == 0 or volume <= 0:
        return 0.0, 0.0
    m = ref.size
    stream = RngStream(seed)
    n_chunks = -(-samples // _MC_CHUNK)

    def chunk_hits(lo_c: int, hi_c: int) -> np.ndarray:
        hits = np.zeros(hi_c - lo_c, dtype=np.int64)
        for c in range(lo_c, hi_c):
            start = c * _MC_CHUNK
            count = min(_MC_CHUNK, samples - start)
            S = lo + span * stream.block(start * m, count * m).reshape(count, m)
            cols = [np.ascontiguousarray(S[:, j]) for j in range(m)]
            dominated = np.zeros(count, dtype=bool)
            for f in F:
                hit = cols[0] >= f[0]
                for j in range(1, m):
                    hit &= cols[j] >= f[j]
                dominated |= hit
            hits[c - lo_c] = int(dominated.sum())
        return hits

    total = int(T.map_blocks(chunk_hits, n_chunks).sum())
    frac = total / samples
    return volume * frac, volume * float(np.sqrt(frac * (1.0 - frac) / samples))


def hypervolume(F, ref, maximize: bool = False, samples: int = 100_000, seed: int = 0, bounds=None) -> float:
    """Exact for two objectives, Monte Carlo estimate otherwise."""
    if np.size(ref) == 2:
        return hv_exact_2d(F, ref, maximize)
    return hv_mc(F, ref, samples, seed, maximize, bounds)[0]


def eu(F, W) -> float:
    """Expected utility ``E_w[max_f f . w]`` over the rows of ``W`` (returns orientation)."""
    F, W = T.as_tensor(F), T.as_tensor(W)
    if F.shape[0] == 0 or W.shape[0] == 0:
        raise ValueError("EU needs non-empty solution and weight sets")
    return float(T.matmul(W, F.T).max(axis=1).mean())


def default_utility_h(m: int, target: int = 100) -> int:
    """Smallest lattice density whose weight count reaches ``target``."""
    H = 1
    while lattice_size(m, H) < target:
        H += 1
    return H


def utility_weights(m: int, H: int | None = None) -> np.ndarray:
    return simplex_lattice(m, default_utility_h(m) if H is None else H)


def normalize_dtlz(F, extent: float) -> np.ndarray:
    return T.as_tensor(F) / extent


def pooled_reference(fronts, floor_zero=()) -> np.ndarray:
    """HV reference for return-oriented sets: pooled per-objective minimum,
    lifted to 0 for the objectives listed in ``floor_zero``."""
    pooled = np.vstack([np.atleast_2d(f) for f in fronts if np.size(f)])
    ref = pooled.min(axis=0)
    for j in floor_zero:
        ref[j] = max(ref[j], 0.0)
    return ref


@dataclass(frozen=True)
class MetricContext:
    reference_front: np.ndarray | None = None
    reference_point: np.ndarray | None = None
    weights: np.ndarray | None = None
    maximize: bool = False
    hv_samples: int = 100_000
    hv_seed: int = 0
    hv_bounds: np.ndarray | None = None
    #: Objectives are divided by this before HV (front extent for DTLZ).
    hv_scale: float = 1.0

    def compute(self, names, F) -> dict[str, float]:
        out: dict[str, float] = {}
        for name in names:
            if name == "igd":
                out["igd"] = igd(F, self.reference_front)
            elif name == "hv":
                out["hv"] = hypervolume(
                    np.asarray(F) / self.hv_scale,
                    self.reference_point, self.maximize, self.hv_samples, self.hv_seed, self.hv_bounds
                )
            elif name == "eu":
                out["eu"] = eu(F, self.weights)
            else:
                raise ValueError(f"unknown metric {name!r}")
        return out
