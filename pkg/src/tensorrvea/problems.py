"""Batch objective evaluators: DTLZ1-4 and toy control tasks for neuroevolution.

All evaluators map a decision batch ``X`` of shape ``(n, d)`` to objectives
``(n, m)``. Optimizers always minimize; the control tasks report returns
(higher is better) and their :class:`ProblemInstance` negates them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor_ops as T
from .refvec import simplex_lattice

log = logging.getLogger(__name__)

#: Default decision dimension per DTLZ problem at m = 3.
DTLZ_DEFAULT_D = {1: 7, 2: 12, 3: 12, 4: 12}
#: Extent of the true front along each objective (used to normalize for HV).
DTLZ_PF_EXTENT = {1: 0.5, 2: 1.0, 3: 1.0, 4: 1.0}
DTLZ4_ALPHA = 100
INVALID_RETURN = -1e9


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    d: int
    m: int
    lower: np.ndarray
    upper: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray]
    maximize_returns: bool = False
    #: Objectives whose HV reference is floored at zero (return orientation).
    floor_zero: tuple[int, ...] = ()
    pf_extent: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower.shape != (1, self.d) or self.upper.shape != (1, self.d):
            raise ValueError("bounds must have shape (1, d)")
        if not np.all(self.lower < self.upper):
            raise ValueError("lower bound must be strictly below upper bound")

    def evaluate(self, X) -> np.ndarray:
        X = T.as_tensor(X)
        if X.shape[1] != self.d:
            raise T.ShapeError(f"{self.name} expects d={self.d}, got {X.shape[1]}")
        return self.evaluator(X)

    def returns(self, F: np.ndarray) -> np.ndarray:
        """Objective values in reporting orientation (returns for control tasks)."""
        return -F if self.maximize_returns else F


# --------------------------------------------------------------------- DTLZ


def int_power(x: np.ndarray, k: int) -> np.ndarray:
    """``x ** k`` for a nonnegative integer ``k`` by binary exponentiation.

    The multiplication sequence is fixed, so batch and scalar evaluations
    round identically (a vectorized ``pow`` may differ from libm by an ulp).
    """
    result = np.ones_like(x)
    base = x.copy()
    while k:
        if k & 1:
            result = result * base
        base = base * base
        k >>= 1
    return result


def _dtlz_block(pid: int, X: np.ndarray, m: int) -> np.ndarray:
    n, d = X.shape
    k = d - m + 1
    g = np.zeros(n)
    if pid in (1, 3):
        for j in range(m - 1, d):
            c = X[:, j] - 0.5
            g += c * c - np.cos(20.0 * math.pi * c)
        g = 100.0 * (k + g)
    else:
        for j in range(m - 1, d):
            c = X[:, j] - 0.5
            g += c * c
    pos = X[:, : m - 1]
    if pid == 4:
        pos = int_power(pos, DTLZ4_ALPHA)
    F = np.empty((n, m))
    if pid == 1:
        scale = 0.5 * (1.0 + g)
        for i in range(m):
            f = scale.copy()
            for j in range(m - 1 - i):
                f *= pos[:, j]
            if i > 0:
                f *= 1.0 - pos[:, m - 1 - i]
            F[:, i] = f
    else:
        scale = 1.0 + g
        for i in range(m):
            f = scale.copy()
            for j in range(m - 1 - i):
                f *= np.cos(0.5 * math.pi * pos[:, j])
            if i > 0:
                f *= np.sin(0.5 * math.pi * pos[:, m - 1 - i])
            F[:, i] = f
    return F


def dtlz_eval(pid: int, X, m: int) -> np.ndarray:
    """Evaluate DTLZ``pid`` (1-4) on a batch; rows are independent."""
    if pid not in (1, 2, 3, 4):
        raise ValueError(f"unknown DTLZ id {pid}")
    X = T.as_tensor(X)
    if X.shape[1] < m:
        raise ValueError(f"DTLZ needs d >= m, got d={X.shape[1]}, m={m}")
    return T.map_blocks(lambda lo, hi: _dtlz_block(pid, X[lo:hi], m), X.shape[0])


def dtlz_pf_reference(pid: int, m: int, H: int) -> np.ndarray:
    """Simplex-lattice points mapped onto the true front of DTLZ``pid``."""
    W = simplex_lattice(m, H)
    if pid == 1:
        return 0.5 * W
    return W / T.repeat_col(T.row_norms(W), m)


def make_dtlz(pid: int, m: int = 3, d: int | None = None) -> ProblemInstance:
    d = DTLZ_DEFAULT_D[pid] if d is None else d
    if d < m:
        raise ValueError(f"DTLZ needs d >= m, got d={d}, m={m}")
    return ProblemInstance(
        name=f"dtlz{pid}",
        d=d,
        m=m,
        lower=np.zeros((1, d)),
        upper=np.ones((1, d)),
        evaluator=lambda X: dtlz_eval(pid, X, m),
        pf_extent=DTLZ_PF_EXTENT[pid],
        meta={"pid": pid},
    )


# ---------------------------------------------------------------------- MLP


@dataclass(frozen=True)
class MlpArch:
    obs_dim: int
    act_dim: int
    hidden: int = 16

    @property
    def param_count(self) -> int:
        o, h, a = self.obs_dim, self.hidden, self.act_dim
        return o * h + h + h * a + a


@dataclass(frozen=True)
class MlpWeights:
    W1: np.ndarray  # (..., hidden, obs_dim)
    b1: np.ndarray  # (..., hidden)
    W2: np.ndarray  # (..., act_dim, hidden)
    b2: np.ndarray  # (..., act_dim)


def mlp_decode(flat, arch: MlpArch) -> MlpWeights:
    """Split flat parameters into ``W1, b1, W2, b2`` (row-major, in that order).

    ``flat`` may be ``(d,)``, ``(1, d)`` or a batch ``(n, d)``; a leading batch
    axis is kept for batches.
    """
    P = np.asarray(flat, dtype=np.float64)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if P.shape[1] != arch.param_count:
        raise ValueError(f"expected {arch.param_count} parameters, got {P.shape[1]}")
    o, h, a = arch.obs_dim, arch.hidden, arch.act_dim
    n = P.shape[0]
    cuts = np.cumsum([o * h, h, h * a])
    W1, b1, W2, b2 = np.split(P, cuts, axis=1)
    w = MlpWeights(W1.reshape(n, h, o), b1, W2.reshape(n, a, h), b2)
    if single:
        return MlpWeights(w.W1[0], w.b1[0], w.W2[0], w.b2[0])
    return w


def mlp_encode(w: MlpWeights) -> np.ndarray:
    if w.W1.ndim == 2:
        return np.concatenate([w.W1.ravel(), w.b1.ravel(), w.W2.ravel(), w.b2.ravel()])
    n = w.W1.shape[0]
    return np.concatenate(
        [w.W1.reshape(n, -1), w.b1.reshape(n, -1), w.W2.reshape(n, -1), w.b2.reshape(n, -1)], axis=1
    )


def _affine(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    # batched W (n, out, in) @ x (n, in) + b, accumulated in column order
    acc = np.zeros(b.shape)
    for j in range(W.shape[2]):
        acc += W[:, :, j] * x[:, j : j + 1]
    return acc + b


def _forward_batch(w: MlpWeights, obs: np.ndarray) -> np.ndarray:
    hidden = np.tanh(_affine(w.W1, w.b1, obs))
    return np.tanh(_affine(w.W2, w.b2, hidden))


def mlp_forward(w: MlpWeights, obs) -> np.ndarray:
    """``tanh(W2 tanh(W1 obs + b1) + b2)`` for a single (unbatched) network."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (w.W1.shape[-1],):
        raise ValueError(f"observation must have length {w.W1.shape[-1]}")
    batched = MlpWeights(w.W1[None], w.b1[None], w.W2[None], w.b2[None])
    return _forward_batch(batched, obs[None])[0]


# ------------------------------------------------------------ toy control


@dataclass(frozen=True)
class ToyEnvSpec:
    """Deterministic point-mass task with forward / height / control objectives.

    Per step with action ``(a1, a2)``::

        v <- 0.9 v + 0.1 a1;  x <- x + v;  h <- clip(0.95 h + 0.1 a2, 0, 2)

    starting from ``x = v = 0, h = 1``. Rewards are ``v`` (forward),
    ``10 (h - 1)`` (height) and ``-(a1^2 + a2^2)`` (control).
    """

    n_objectives: int = 2
    horizon: int = 100
    v_decay: float = 0.9
    v_gain: float = 0.1
    h_decay: float = 0.95
    h_gain: float = 0.1
    h_init: float = 1.0
    h_max: float = 2.0

    OBS_DIM = 4
    ACT_DIM = 2

    def __post_init__(self):
        if self.n_objectives not in (2, 3):
            raise ValueError("toy env supports 2 or 3 objectives")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def _rollout_block(P: np.ndarray, spec: ToyEnvSpec, arch: MlpArch) -> np.ndarray:
    n = P.shape[0]
    w = mlp_decode(P, arch)
    v = np.zeros(n)
    x = np.zeros(n)
    h = np.full(n, spec.h_init)
    r_fwd = np.zeros(n)
    r_hgt = np.zeros(n)
    r_ctl = np.zeros(n)
    obs = np.empty((n, ToyEnvSpec.OBS_DIM))
    for t in range(spec.horizon):
        phase = 2.0 * math.pi * t / spec.horizon
        obs[:, 0] = v
        obs[:, 1] = h
        obs[:, 2] = math.sin(phase)
        obs[:, 3] = math.cos(phase)
        act = _forward_batch(w, obs)
        a1, a2 = act[:, 0], act[:, 1]
        v = spec.v_decay * v + spec.v_gain * a1
        x = x + v
        h = np.clip(spec.h_decay * h + spec.h_gain * a2, 0.0, spec.h_max)
        r_fwd += v
        r_hgt += 10.0 * (h - spec.h_init)
        r_ctl -= a1 * a1 + a2 * a2
    if spec.n_objectives == 2:
        return np.stack([r_fwd, r_ctl], axis=1)
    return np.stack([r_fwd, r_hgt, r_ctl], axis=1)


def env_rollout(params, spec: ToyEnvSpec, arch: MlpArch, return_flags: bool = False):
    """Run every parameter row as a policy and return cumulative rewards ``(n, m)``.

    Rows with non-finite parameters are not simulated; their returns are set
    to ``INVALID_RETURN`` and they are flagged in the optional mask.
    """
    P = T.as_tensor(params)
    if P.shape[1] != arch.param_count:
        raise ValueError(f"expected {arch.param_count} parameters, got {P.shape[1]}")
    bad = ~np.all(np.isfinite(P), axis=1)
    safe = np.where(bad[:, None], 0.0, P)
    R = T.map_blocks(lambda lo, hi: _rollout_block(safe[lo:hi], spec, arch), P.shape[0])
    if bad.any():
        log.warning("%d policies with non-finite parameters penalized", int(bad.sum()))
        R[bad] = INVALID_RETURN
    return (R, bad) if return_flags else R


def make_toy(n_objectives: int, horizon: int = 100, hidden: int = 16, bound: float = 2.0) -> ProblemInstance:
    spec = ToyEnvSpec(n_objectives=n_objectives, horizon=horizon)
    arch = MlpArch(ToyEnvSpec.OBS_DIM, ToyEnvSpec.ACT_DIM, hidden)
    d = arch.param_count
    return ProblemInstance(
        name=f"toy{n_objectives}",
        d=d,
        m=n_objectives,
        lower=np.full((1, d), -bound),
        upper=np.full((1, d), bound),
        evaluator=lambda X: -env_rollout(X, spec, arch),
        maximize_returns=True,
        floor_zero=(0,) if n_objectives == 2 else (0, 1),
        meta={"spec": spec, "arch": arch},
    )


PROBLEM_NAMES = ("dtlz1", "dtlz2", "dtlz3", "dtlz4", "toy2", "toy3")


def make_problem(name: str, m: int = 3, d: int | None = None, horizon: int = 100) -> ProblemInstance:
    name = name.lower()
    if name.startswith("dtlz") and name[4:].isdigit():
        return make_dtlz(int(name[4:]), m=m, d=d)
    if name == "toy2":
        return make_toy(2, horizon=horizon)
    if name == "toy3":
        return make_toy(3, horizon=horizon)
    raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")
