"""Reference-vector-guided selection on whole populations, plus NSGA-II sorting.

The RVEA selection runs as a fixed pipeline of dense kernels:

1. ``translate``  - subtract the ideal point ``z*`` (column minima);
2. ``angles``     - angle of every translated objective row to every vector;
3. ``partition``  - associate each row with its closest vector, producing the
   ``(n, r)`` partition table holding the row index or -1;
4. ``apd_table``  - angle-penalized distance per (row, vector) slot, +inf on
   empty slots;
5. column-wise argmin picks one elite per non-empty vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_ops as T
from .refvec import RefVectorSet

# Debug hook for mutation testing of the equivalence suite; never flip in production.
_LOWEST_INDEX_TIES = True


@dataclass(frozen=True)
class SelectionOutcome:
    elite_indices: np.ndarray
    validity: np.ndarray
    apd_table: np.ndarray


def translate(F) -> tuple[np.ndarray, np.ndarray]:
    F = T.as_tensor(F)
    if F.shape[0] < 1:
        raise ValueError("translate needs at least one row")
    z_star = T.col_min(F)
    return F - T.repeat_row(z_star, F.shape[0]), z_star


def angles(Fp, V) -> np.ndarray:
    """Angles ``(n, r)`` between translated objectives and unit reference vectors.

    A row sitting exactly at the ideal point has zero norm; it gets angle 0
    to every vector.
    """
    Fp, V = T.as_tensor(Fp), T.as_tensor(V)
    n, r = Fp.shape[0], V.shape[0]
    cos_num = T.matmul(Fp, V.T)
    f_norm = T.repeat_col(T.row_norms(Fp), r)
    v_norm = T.repeat_row(T.row_norms(V).T, n)
    denom = f_norm * v_norm
    cos = np.divide(cos_num, denom, out=np.ones((n, r)), where=denom > 0)
    return T.arccos(cos)


def partition(Theta) -> tuple[np.ndarray, np.ndarray]:
    """Association tensor ``A`` and partition table ``T_part``.

    ``T_part[i, j] = i`` when row ``i`` is closest to vector ``j``, else -1,
    computed as ``(1 - |sign(A - I)|) * T_part - |sign(A - I)|`` with a
    three-valued sign.
    """
    Theta = T.as_tensor(Theta)
    n, r = Theta.shape
    _, assoc = T.row_min_argmin(Theta)
    A = T.repeat_col(assoc[:, None].astype(np.float64), r)
    I = T.repeat_row(np.arange(r, dtype=np.float64)[None, :], n)
    T_part = T.repeat_col(np.arange(n, dtype=np.float64)[:, None], r)
    off = np.abs(T.signum(A - I))
    return A, (1.0 - off) * T_part - off


def penalty_factor(t: float, t_max: float, alpha: float, m: int) -> float:
    return m * (t / t_max) ** alpha


def apd_table(Theta, T_part, gamma, Fp, t: float, t_max: float, alpha: float, m: int) -> np.ndarray:
    """Angle-penalized distance for every occupied (row, vector) slot; +inf elsewhere.

    Columns are independent; they are split across lanes by
    :func:`tensor_ops.map_blocks` without affecting the values.
    """
    Theta, T_part, gamma = T.as_tensor(Theta), T.as_tensor(T_part), T.as_tensor(gamma)
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    if not 0 <= t <= t_max:
        raise ValueError(f"generation t={t} outside [0, {t_max}]")
    n, r = Theta.shape
    norms = T.row_norms(Fp)
    p = penalty_factor(t, t_max, alpha, m)
    idx = T_part.astype(np.int64)

    def columns(lo: int, hi: int) -> np.ndarray:
        part = idx[:, lo:hi]
        # -1 slots read row 0 as a placeholder and are masked to +inf below
        safe = np.where(part < 0, 0, part)
        theta = Theta[safe, np.arange(lo, hi)[None, :]]
        dist = norms[safe, 0]
        g = T.repeat_row(gamma[lo:hi].T, n)
        out = (1.0 + p * theta / g) * dist
        return T.masked_replace(out, lambda _: part == -1, np.inf)

    return T.map_blocks(columns, r, axis=1)


def _column_argmin(table: np.ndarray) -> np.ndarray:
    if _LOWEST_INDEX_TIES:
        return np.argmin(table, axis=0)
    flipped = table[::-1]
    return table.shape[0] - 1 - np.argmin(flipped, axis=0)


def rv_select(X, F, refs: RefVectorSet, t: float, t_max: float, alpha: float = 2.0) -> SelectionOutcome:
    """One elite per reference vector that attracted at least one row."""
    F = T.as_tensor(F)
    if X is not None and np.shape(X)[0] != F.shape[0]:
        raise T.ShapeError("X and F row counts differ")
    if F.shape[1] != refs.V.shape[1]:
        raise T.ShapeError("objective count does not match the reference vectors")
    Fp, _ = translate(F)
    Theta = angles(Fp, refs.V)
    _, T_part = partition(Theta)
    table = apd_table(Theta, T_part, refs.gamma, Fp, t, t_max, alpha, F.shape[1])
    best = _column_argmin(table)
    valid = np.isfinite(table[best, np.arange(table.shape[1])])
    return SelectionOutcome(best[valid], valid, table)


def apd_scores(F, refs: RefVectorSet, t: float, t_max: float, alpha: float = 2.0) -> np.ndarray:
    """APD of each row against its own associated vector, shape ``(n, 1)``."""
    F = T.as_tensor(F)
    Fp, _ = translate(F)
    Theta = angles(Fp, refs.V)
    _, T_part = partition(Theta)
    table = apd_table(Theta, T_part, refs.gamma, Fp, t, t_max, alpha, F.shape[1])
    return T.row_min_argmin(table)[0]


# ------------------------------------------------------------------ NSGA-II


def dominance_matrix(F) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` dominates row ``j`` (minimization)."""
    F = T.as_tensor(F)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_sort(F) -> np.ndarray:
    """Front index per row; 0 is the nondominated set."""
    D = dominance_matrix(F)
    n = D.shape[0]
    count = D.sum(axis=0)
    rank = np.full(n, -1, dtype=np.int64)
    remaining = np.ones(n, dtype=bool)
    level = 0
    while remaining.any():
        front = remaining & (count == 0)
        rank[front] = level
        remaining &= ~front
        count = count - D[front].sum(axis=0)
        level += 1
    return rank


def crowding_distance(F_front) -> np.ndarray:
    F = T.as_tensor(F_front)
    k, m = F.shape
    if k < 1:
        raise ValueError("crowding distance needs at least one point")
    dist = np.zeros(k)
    if k <= 2:
        return np.full((k, 1), np.inf)
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        span = col[-1] - col[0]
        if span <= 0:
            continue
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist[:, None]


def rank_and_crowding(F) -> tuple[np.ndarray, np.ndarray]:
    F = T.as_tensor(F)
    rank = nondominated_sort(F)
    crowd = np.empty(F.shape[0])
    for level in np.unique(rank):
        members = np.flatnonzero(rank == level)
        crowd[members] = crowding_distance(F[members])[:, 0]
    return rank, crowd


def nsga2_select(X, F, target: int) -> np.ndarray:
    """Indices of ``target`` survivors by ascending front, then descending crowding."""
    F = T.as_tensor(F)
    n = F.shape[0]
    if target > n:
        raise ValueError(f"cannot select {target} of {n} rows")
    rank = nondominated_sort(F)
    chosen: list[int] = []
    for level in range(int(rank.max()) + 1):
        members = np.flatnonzero(rank == level)
        if len(chosen) + len(members) <= target:
            chosen.extend(members.tolist())
            if len(chosen) == target:
                break
            continue
        cd = crowding_distance(F[members])[:, 0]
        order = np.lexsort((members, -cd))
        chosen.extend(members[order[: target - len(chosen)]].tolist())
        break
    return np.asarray(chosen, dtype=np.int64)
