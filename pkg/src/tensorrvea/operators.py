"""Tensorized reproduction operators.

Every operator draws from an :class:`~tensorrvea.rng.RngStream` in a fixed
order, documented per function, so the scalar oracles can replay the exact
same randomness:

========== ================================================================
operator   draws (in order)
========== ================================================================
ga         shuffle (n-1), then sbx, then polynomial_mutation
sbx        M_c, R1, R2 (n//2 x d each), R3 (n//2 x 1)
pm         R4 (n x d), M_mut (n x d)
de         index draws (n x 3), j_rand (n x 1), crossover mask (n x d)
pso        R1 (n x d), R2 (n x d)
cso        shuffle (n-1), R1, R2, R3 (n//2 x d each)
random     n x d
========== ================================================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_ops as T
from .rng import RngStream, shuffle_indices


@dataclass(frozen=True)
class GaParams:
    pc: float = 1.0
    eta: float = 20.0
    pm: float = 1.0
    xi: float = 20.0

    def check(self, d: int) -> None:
        if not 0.0 <= self.pc <= 1.0 or not 0.0 <= self.pm / d <= 1.0:
            raise ValueError("pc and pm/d must lie in [0, 1]")
        if self.eta <= 0 or self.xi <= 0:
            raise ValueError("distribution indices must be positive")


@dataclass(frozen=True)
class SwarmState:
    velocities: np.ndarray
    personal_best_X: np.ndarray
    personal_best_score: np.ndarray

    @classmethod
    def initial(cls, X: np.ndarray) -> "SwarmState":
        return cls(np.zeros_like(X), X.copy(), np.full((X.shape[0], 1), np.inf))

    def take(self, idx) -> "SwarmState":
        idx = np.asarray(idx)
        return SwarmState(self.velocities[idx], self.personal_best_X[idx], self.personal_best_score[idx])

    @staticmethod
    def concat(a: "SwarmState", b: "SwarmState") -> "SwarmState":
        return SwarmState(
            np.vstack([a.velocities, b.velocities]),
            np.vstack([a.personal_best_X, b.personal_best_X]),
            np.vstack([a.personal_best_score, b.personal_best_score]),
        )

    def check(self, X: np.ndarray) -> None:
        n, d = X.shape
        if (
            self.velocities.shape != (n, d)
            or self.personal_best_X.shape != (n, d)
            or self.personal_best_score.shape != (n, 1)
        ):
            raise T.ShapeError("swarm state does not match the population shape")


def _bounds(L, U, n: int) -> tuple[np.ndarray, np.ndarray]:
    return T.repeat_row(T.as_tensor(L), n), T.repeat_row(T.as_tensor(U), n)


def sbx_spread(stream: RngStream, half: int, d: int, p: GaParams) -> np.ndarray:
    """Spread factors ``B`` (``half x d``) for ``half`` parent pairs."""
    Mc = stream.uniform(half, d)
    R1 = stream.uniform(half, d)
    R2 = stream.uniform(half, d)
    R3 = stream.uniform(half, 1)

    e = 1.0 / (p.eta + 1.0)
    low = T.step(0.5 - Mc)
    beta = T.sgn(R1 - 0.5) * (low * np.power(2.0 * Mc, e) + (1.0 - low) * np.power(2.0 - 2.0 * Mc, -e))
    skip = T.repeat_col(T.step(R3 - p.pc), d)
    keep = T.step(R2 - 0.5)
    return (1.0 - skip) * ((1.0 - keep) * beta + keep) + skip


def sbx_raw(X, stream: RngStream, p: GaParams = GaParams()) -> np.ndarray:
    """SBX offspring before clamping (the odd trailing row is passed through)."""
    X = T.as_tensor(X)
    n, d = X.shape
    if n < 2:
        raise ValueError("SBX needs at least two parents")
    half = n // 2
    X1, X2 = X[:half], X[half : 2 * half]
    B = sbx_spread(stream, half, d, p)
    c1 = ((1.0 + B) * X1 + (1.0 - B) * X2) / 2.0
    c2 = ((1.0 - B) * X1 + (1.0 + B) * X2) / 2.0
    return np.vstack([c1, c2, X[2 * half :]])


def sbx(X, stream: RngStream, p: GaParams, L, U) -> np.ndarray:
    """Simulated binary crossover, first half of ``X`` paired with the second half."""
    out = sbx_raw(X, stream, p)
    Lr, Ur = _bounds(L, U, out.shape[0])
    return T.clamp(out, Lr, Ur)


def polynomial_mutation(Xc, stream: RngStream, p: GaParams, L, U) -> np.ndarray:
    Xc = T.as_tensor(Xc)
    n, d = Xc.shape
    Lr, Ur = _bounds(L, U, n)
    R4 = stream.uniform(n, d)
    M = stream.uniform(n, d)

    C = T.step(p.pm / d - R4)
    # genes with C = 0 keep Xc exactly, so delta is only evaluated on the mask
    hit = np.nonzero(C)
    x, lo, hi, u = Xc[hit], Lr[hit], Ur[hit], M[hit]
    span = hi - lo
    e = p.xi + 1.0
    lower_gap = 1.0 - (x - lo) / span
    upper_gap = 1.0 - (hi - x) / span
    down = (np.power(2.0 * u + (1.0 - 2.0 * u) * np.power(lower_gap, e), 1.0 / e) - 1.0) * T.step(0.5 - u)
    up = (1.0 - np.power(2.0 * (1.0 - u) + 2.0 * (u - 0.5) * np.power(upper_gap, e), 1.0 / e)) * T.step(u - 0.5)
    delta = span * down + span * up
    out = Xc.copy()
    # rounding can leave a mutated gene a few ulps outside the box
    out[hit] = np.minimum(np.maximum(x + delta * C[hit], lo), hi)
    return out


def ga_reproduce(X, F_unused, stream: RngStream, p: GaParams, L, U) -> np.ndarray:
    X = T.as_tensor(X)
    p.check(X.shape[1])
    perm = shuffle_indices(stream, X.shape[0])
    return polynomial_mutation(sbx(X[perm], stream, p, L, U), stream, p, L, U)


def _pick_excluding(u: np.ndarray, pool: int, excluded: np.ndarray) -> np.ndarray:
    # k-th smallest index of range(pool + len(excluded)) not in `excluded`
    idx = np.floor(u * pool).astype(np.int64)
    for col in np.sort(excluded, axis=1).T:
        idx = idx + (idx >= col[:, None])
    return idx


def de_indices(U: np.ndarray, n: int) -> np.ndarray:
    """Map ``(n, 3)`` uniforms to mutually distinct donors ``r1, r2, r3 != i``."""
    i = np.arange(n)[:, None]
    r1 = _pick_excluding(U[:, 0:1], n - 1, i)
    r2 = _pick_excluding(U[:, 1:2], n - 2, np.hstack([i, r1]))
    r3 = _pick_excluding(U[:, 2:3], n - 3, np.hstack([i, r1, r2]))
    return np.hstack([r1, r2, r3])


def de_reproduce(X, stream: RngStream, L, U, F_de: float = 0.5, CR: float = 0.9) -> np.ndarray:
    """DE/rand/1/bin trial vectors, one per row."""
    X = T.as_tensor(X)
    n, d = X.shape
    if n < 4:
        raise ValueError("DE needs at least four individuals")
    idx = de_indices(stream.uniform(n, 3), n)
    j_rand = np.floor(stream.uniform(n, 1) * d).astype(np.int64)
    cross = stream.uniform(n, d) < CR
    cross |= np.arange(d)[None, :] == j_rand
    trial = X[idx[:, 0]] + F_de * (X[idx[:, 1]] - X[idx[:, 2]])
    Lr, Ur = _bounds(L, U, n)
    return T.clamp(np.where(cross, trial, X), Lr, Ur)


def pso_reproduce(
    X, state: SwarmState, scores, stream: RngStream, L, U, w: float = 0.4, c1: float = 1.5, c2: float = 1.5
) -> tuple[np.ndarray, SwarmState]:
    """One PSO step. ``scores`` (lower is better) refresh the personal bests first."""
    X = T.as_tensor(X)
    n, d = X.shape
    state.check(X)
    scores = T.as_tensor(scores)
    if scores.shape != (n, 1):
        raise T.ShapeError("scores must be (n, 1)")
    better = scores < state.personal_best_score
    pbest = np.where(better, X, state.personal_best_X)
    pbest_score = np.where(better, scores, state.personal_best_score)
    gbest = T.repeat_row(X[int(np.argmin(scores[:, 0]))][None, :], n)

    R1 = stream.uniform(n, d)
    R2 = stream.uniform(n, d)
    v = w * state.velocities + c1 * R1 * (pbest - X) + c2 * R2 * (gbest - X)
    Lr, Ur = _bounds(L, U, n)
    return T.clamp(X + v, Lr, Ur), SwarmState(v, pbest, pbest_score)


def cso_pairs(perm: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Winner and loser row of each shuffled pair; equal scores favor the lower index."""
    half = len(perm) // 2
    a, b = perm[0 : 2 * half : 2], perm[1 : 2 * half : 2]
    sa, sb = scores[a, 0], scores[b, 0]
    a_wins = (sa < sb) | ((sa == sb) & (a < b))
    return np.where(a_wins, a, b), np.where(a_wins, b, a)


def cso_reproduce(
    X, scores, stream: RngStream, L, U, state: SwarmState, phi: float = 0.1
) -> tuple[np.ndarray, SwarmState]:
    """Competitive swarm step: losers learn from winners and the mean position."""
    X = T.as_tensor(X)
    n, d = X.shape
    state.check(X)
    scores = T.as_tensor(scores)
    if scores.shape != (n, 1):
        raise T.ShapeError("scores must be (n, 1)")
    perm = shuffle_indices(stream, n)
    win, lose = cso_pairs(perm, scores)
    k = len(win)
    out = X.copy()
    vel = state.velocities.copy()
    if k == 0:
        return out, state
    R1 = stream.uniform(k, d)
    R2 = stream.uniform(k, d)
    R3 = stream.uniform(k, d)
    mean = T.repeat_row(X.mean(axis=0, keepdims=True), k)
    xl, xw = X[lose], X[win]
    v = R1 * state.velocities[lose] + R2 * (xw - xl) + phi * R3 * (mean - xl)
    Lr, Ur = _bounds(L, U, k)
    out[lose] = T.clamp(xl + v, Lr, Ur)
    vel[lose] = v
    return out, SwarmState(vel, state.personal_best_X, state.personal_best_score)


def random_reproduce(n: int, d: int, stream: RngStream, L, U) -> np.ndarray:
    Lr, Ur = _bounds(L, U, n)
    return Lr + (Ur - Lr) * stream.uniform(n, d)


# ------------------------------------------------------------ dispatching


OPERATOR_NAMES = ("ga", "de", "pso", "cso", "random")


@dataclass(frozen=True)
class Reproduction:
    """Uniform call surface over the operators used by the generation loop.

    ``__call__`` returns the offspring and, for swarm operators, the state
    aligned with the offspring rows.
    """

    name: str
    ga: GaParams = GaParams()
    de_F: float = 0.5
    de_CR: float = 0.9
    pso_w: float = 0.4
    pso_c1: float = 1.5
    pso_c2: float = 1.5
    cso_phi: float = 0.1

    def __post_init__(self):
        if self.name not in OPERATOR_NAMES:
            raise ValueError(f"unknown operator {self.name!r}; choose from {', '.join(OPERATOR_NAMES)}")

    @property
    def stateful(self) -> bool:
        return self.name in ("pso", "cso")

    @property
    def needs_scores(self) -> bool:
        return self.stateful

    def __call__(self, X, scores, state, stream, L, U):
        if self.name == "ga":
            return ga_reproduce(X, None, stream, self.ga, L, U), None
        if self.name == "de":
            return de_reproduce(X, stream, L, U, self.de_F, self.de_CR), None
        if self.name == "pso":
            return pso_reproduce(X, state, scores, stream, L, U, self.pso_w, self.pso_c1, self.pso_c2)
        if self.name == "cso":
            return cso_reproduce(X, scores, stream, L, U, state, self.cso_phi)
        return random_reproduce(X.shape[0], X.shape[1], stream, L, U), None
