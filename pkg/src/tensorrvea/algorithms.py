"""Generation loops: TensorRVEA, NSGA-II, random search, plus the nondominated archive.

All loops share one contract: a single :class:`RngStream` seeded from the
config drives every random decision, the archive receives every evaluated
point, and metrics (if requested) are logged once per generation. Wall time
only feeds the ``elapsed_ms`` column and the optional budget stop.
"""

from __future__ import annotations

import math
import time
from collections.abc import Generator
from dataclasses import dataclass, field

import numpy as np

from . import oracle as O
from . import tensor_ops as T
from .metrics import MetricContext
from .operators import GaParams, Reproduction, SwarmState, ga_reproduce, random_reproduce
from .problems import ProblemInstance, make_problem
from .refvec import RefVectorSet
from .rng import RngStream
from .selection import apd_scores, crowding_distance, nsga2_select, rank_and_crowding, rv_select


class RunError(RuntimeError):
    """An evaluator or operator failed inside a generation loop."""


@dataclass(frozen=True)
class RunConfig:
    problem: str = "dtlz2"
    operator: str = "ga"
    n: int = 105
    H: int = 13
    t_max: int = 200
    alpha: float = 2.0
    fr: float = 0.1
    seed: int = 0
    m: int = 3
    d: int | None = None
    horizon: int = 100
    budget_s: float | None = None
    metrics: tuple[str, ...] = ()
    #: ``"population"`` or ``"archive"``: which set the per-generation metrics see.
    metric_source: str = "population"
    archive_cap: int | None = None
    keep_history: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("population size n must be >= 2")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.H < 1:
            raise ValueError("lattice density H must be >= 1")
        if not 0 < self.fr <= 1:
            raise ValueError("adaptation frequency fr must lie in (0, 1]")
        if self.budget_s is not None and self.budget_s <= 0:
            raise ValueError("budget_s must be positive")
        if self.metric_source not in ("population", "archive"):
            raise ValueError("metric_source must be 'population' or 'archive'")


@dataclass(frozen=True)
class GenerationRow:
    t: int
    elapsed_ms: float
    pop_size: int
    evals: int
    metrics: dict[str, float]


@dataclass
class RunRecord:
    algorithm: str
    config: RunConfig
    rows: list[GenerationRow] = field(default_factory=list)
    initial_metrics: dict[str, float] = field(default_factory=dict)
    archive_X: np.ndarray | None = None
    archive_F: np.ndarray | None = None
    final_X: np.ndarray | None = None
    final_F: np.ndarray | None = None
    #: Archive objective sets after initialization and after every generation.
    history: list[np.ndarray] = field(default_factory=list)

    def fingerprint(self) -> tuple:
        """Everything except wall time, for determinism checks."""
        return (
            self.algorithm,
            [(r.t, r.pop_size, r.evals, sorted(r.metrics.items())) for r in self.rows],
            sorted(self.initial_metrics.items()),
            self.archive_X.tobytes(),
            self.archive_F.tobytes(),
            self.final_X.tobytes(),
            self.final_F.tobytes(),
        )


# ------------------------------------------------------------------ archive


def nondominated_rows(F) -> np.ndarray:
    """Sorted indices of the rows of ``F`` (no exact duplicates) not dominated by any other.

    Rows are ordered by objective sum, ties broken lexicographically; in that
    order only earlier rows can dominate later ones, so the first live row is
    always nondominated. Keep it, drop every row it weakly dominates, repeat.
    """
    F = T.as_tensor(F)
    total = np.zeros(F.shape[0])
    for j in range(F.shape[1]):
        total += F[:, j]
    order = np.lexsort(tuple(F.T[::-1]) + (total,))
    Fs = F[order]
    kept: list[int] = []
    while order.size:
        kept.append(int(order[0]))
        live = ~np.all(Fs[0] <= Fs[1:], axis=1)
        order, Fs = order[1:][live], Fs[1:][live]
    return np.sort(np.asarray(kept, dtype=np.int64))


class Archive:
    """Mutually nondominated (X, F) pairs, in insertion order."""

    def __init__(self, d: int, m: int, cap: int | None = None):
        if cap is not None and cap < 1:
            raise ValueError("archive cap must be >= 1")
        self.X = np.empty((0, d))
        self.F = np.empty((0, m))
        self.cap = cap

    def __len__(self) -> int:
        return self.F.shape[0]

    def update(self, X_new, F_new) -> "Archive":
        """Merge a batch, keeping the mutually nondominated subset.

        Exact duplicates of an existing objective row are dropped (the
        earliest copy wins). The archive is already mutually nondominated,
        so only batch-vs-archive and batch-vs-batch comparisons are needed.
        """
        X_new, F_new = T.as_tensor(X_new), T.as_tensor(F_new)
        if X_new.shape[0] != F_new.shape[0]:
            raise T.ShapeError("X and F row counts differ")
        _, first = np.unique(F_new, axis=0, return_index=True)
        cand = np.sort(first)
        # filtering the batch first is equivalent: whatever an archive row
        # knocks out also removes everything that row dominated
        cand = cand[nondominated_rows(F_new[cand])]
        cand = cand[~_weakly_dominated_by(F_new[cand], self.F)]
        Fc = F_new[cand]
        keep = ~_dominated_by(self.F, Fc)
        X = np.vstack([self.X[keep], X_new[cand]])
        F = np.vstack([self.F[keep], Fc])
        if self.cap is not None and F.shape[0] > self.cap:
            cd = crowding_distance(F)[:, 0]
            order = np.lexsort((np.arange(F.shape[0]), -cd))
            idx = np.sort(order[: self.cap])
            X, F = X[idx], F[idx]
        self.X, self.F = X, F
        return self


def _compare_blocks(A: np.ndarray, B: np.ndarray, strict: bool, block: int = 256) -> np.ndarray:
    # for each row of A: is it dominated (strict) or weakly dominated by some row of B
    out = np.zeros(A.shape[0], dtype=bool)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return out
    cols = [np.ascontiguousarray(B[:, j]) for j in range(B.shape[1])]
    for lo in range(0, A.shape[0], block):
        a = A[lo : lo + block]
        le = cols[0][None, :] <= a[:, :1]
        for j in range(1, len(cols)):
            le &= cols[j][None, :] <= a[:, j : j + 1]
        if strict:
            lt = cols[0][None, :] < a[:, :1]
            for j in range(1, len(cols)):
                lt |= cols[j][None, :] < a[:, j : j + 1]
            le &= lt
        out[lo : lo + block] = le.any(axis=1)
    return out


def _weakly_dominated_by(A, B) -> np.ndarray:
    return _compare_blocks(A, B, strict=False)


def _dominated_by(A, B) -> np.ndarray:
    return _compare_blocks(A, B, strict=True)


def archive_update(archive: Archive, X_new, F_new) -> Archive:
    """Functional form of :meth:`Archive.update`; the input archive is not modified."""
    out = Archive(archive.X.shape[1], archive.F.shape[1], archive.cap)
    out.X, out.F = archive.X, archive.F
    return out.update(X_new, F_new)


# ----------------------------------------------------------------- backends


class _TensorBackend:
    def __init__(self, op: Reproduction):
        self.op = op

    def random(self, n, d, stream, L, U):
        return random_reproduce(n, d, stream, L, U)

    def pool(self, k, n, stream):
        return np.floor(stream.uniform(n, 1)[:, 0] * k).astype(np.int64)

    def evaluate(self, prob: ProblemInstance, X):
        return prob.evaluate(X)

    def scores(self, F, refs, t, t_max, alpha):
        return apd_scores(F, refs, t, t_max, alpha)

    def reproduce(self, X, scores, state, stream, L, U):
        return self.op(X, scores, state, stream, L, U)

    def select(self, X, F, refs, t, t_max, alpha):
        return rv_select(X, F, refs, t, t_max, alpha).elite_indices

    def adapt(self, refs: RefVectorSet, F):
        return refs.adapted(T.col_min(F), T.col_max(F))


class _OracleBackend:
    """Same loop driven by the scalar reference kernels; single-threaded."""

    def __init__(self, op: Reproduction):
        self.op = op
        self._gamma_for = None
        self._gamma = None

    def _gam(self, refs: RefVectorSet):
        # recomputed only when the vectors change, as in the tensor pipeline
        if self._gamma_for is not refs.V:
            self._gamma_for, self._gamma = refs.V, O.oracle_gamma(refs.V)
        return self._gamma

    def random(self, n, d, stream, L, U):
        return O.oracle_random(n, d, stream, L, U)

    def pool(self, k, n, stream):
        return np.asarray([int(math.floor(stream.next_float() * k)) for _ in range(n)], dtype=np.int64)

    def evaluate(self, prob: ProblemInstance, X):
        return O.oracle_evaluate(prob, X)

    def scores(self, F, refs, t, t_max, alpha):
        return O.oracle_apd_scores(F, refs, t, t_max, alpha, self._gam(refs))

    def reproduce(self, X, scores, state, stream, L, U):
        op = self.op
        if op.name == "ga":
            return O.oracle_ga(X, stream, op.ga, L, U), None
        if op.name == "de":
            return O.oracle_de(X, stream, L, U, op.de_F, op.de_CR), None
        if op.name == "pso":
            return O.oracle_pso(X, state, scores, stream, L, U, op.pso_w, op.pso_c1, op.pso_c2)
        if op.name == "cso":
            return O.oracle_cso(X, scores, stream, L, U, state, op.cso_phi)
        return O.oracle_random(X.shape[0], X.shape[1], stream, L, U), None

    def select(self, X, F, refs, t, t_max, alpha):
        return O.oracle_rv_select(X, F, refs, t, t_max, alpha, self._gam(refs)).elite_indices

    def adapt(self, refs: RefVectorSet, F):
        z_min = [min(col) for col in F.T.tolist()]
        z_max = [max(col) for col in F.T.tolist()]
        V = O.oracle_adapt(refs.V0, z_min, z_max, refs.V)
        if V is refs.V:
            return refs
        self._gamma_for, self._gamma = V, O.oracle_gamma(V)
        return RefVectorSet(refs.V0, V, np.asarray(self._gamma)[:, None])


BACKENDS = {"tensor": _TensorBackend, "oracle": _OracleBackend}


# -------------------------------------------------------------------- loops


class _Logger:
    """Shared per-generation bookkeeping: archive, timing, metrics, budget."""

    def __init__(self, algorithm: str, cfg: RunConfig, prob: ProblemInstance, metric_ctx: MetricContext | None):
        self.cfg = cfg
        self.prob = prob
        self.ctx = metric_ctx
        self.record = RunRecord(algorithm, cfg)
        self.archive = Archive(prob.d, prob.m, cfg.archive_cap)
        self.evals = 0
        self.start = time.perf_counter()

    def _metrics(self, F_pop) -> dict[str, float]:
        if self.ctx is None or not self.cfg.metrics:
            return {}
        F = self.archive.F if self.cfg.metric_source == "archive" else F_pop
        return self.ctx.compute(self.cfg.metrics, self.prob.returns(F))

    def evaluate(self, evaluate, X, t: int) -> np.ndarray:
        try:
            F = evaluate(X)
        except Exception as exc:
            raise RunError(
                f"evaluation failed on {self.prob.name} at generation {t} (seed {self.cfg.seed}): {exc}"
            ) from exc
        if F.shape != (X.shape[0], self.prob.m):
            raise RunError(f"evaluator returned shape {F.shape} at generation {t} (seed {self.cfg.seed})")
        self.evals += X.shape[0]
        self.archive.update(X, F)
        return F

    def initial(self, F_pop) -> None:
        self.record.initial_metrics = self._metrics(F_pop)
        if self.cfg.keep_history:
            self.record.history.append(self.archive.F.copy())
        self.start = time.perf_counter()

    def generation(self, t: int, X_pop, F_pop) -> bool:
        """Log generation ``t`` (1-based); return True when the budget is spent."""
        elapsed = (time.perf_counter() - self.start) * 1000.0
        self.record.rows.append(GenerationRow(t, elapsed, X_pop.shape[0], self.evals, self._metrics(F_pop)))
        if self.cfg.keep_history:
            self.record.history.append(self.archive.F.copy())
        return self.cfg.budget_s is not None and elapsed >= self.cfg.budget_s * 1000.0

    def finish(self, X_pop, F_pop) -> RunRecord:
        rec = self.record
        rec.archive_X, rec.archive_F = self.archive.X, self.archive.F
        rec.final_X, rec.final_F = X_pop, F_pop
        return rec


def _problem(cfg: RunConfig, problem: ProblemInstance | None) -> ProblemInstance:
    return problem if problem is not None else make_problem(cfg.problem, m=cfg.m, d=cfg.d, horizon=cfg.horizon)


def tensor_rvea_run(
    cfg: RunConfig,
    backend: str = "tensor",
    metric_ctx: MetricContext | None = None,
    problem: ProblemInstance | None = None,
) -> RunRecord:
    """RVEA: reproduce n offspring, merge with parents, keep one elite per vector.

    The angle penalty uses ``t / t_max`` with ``t`` the 0-based generation
    index. Reference vectors are rescaled to the population's objective range
    every ``ceil(fr * t_max)`` generations. If fewer than ``n`` elites
    survive, the mating pool is drawn from them uniformly with replacement.
    """
    steps = rvea_steps(cfg, backend, metric_ctx, problem)
    while True:
        try:
            next(steps)
        except StopIteration as done:
            return done.value


def rvea_steps(
    cfg: RunConfig,
    backend: str = "tensor",
    metric_ctx: MetricContext | None = None,
    problem: ProblemInstance | None = None,
) -> Generator[int, None, RunRecord]:
    """:func:`tensor_rvea_run` one generation at a time.

    Yields 0 once the initial population is evaluated, then the index of each
    completed generation; the generator's return value is the record. Lets a
    caller interleave and time two pipelines generation by generation.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    prob = _problem(cfg, problem)
    op = Reproduction(cfg.operator)
    be = BACKENDS[backend](op)
    refs = RefVectorSet.lattice(prob.m, cfg.H)
    stream = RngStream(cfg.seed)
    L, U = prob.lower, prob.upper
    log = _Logger("tensor_rvea", cfg, prob, metric_ctx)
    adapt_every = max(1, math.ceil(cfg.fr * cfg.t_max))

    X = be.random(cfg.n, prob.d, stream, L, U)
    F = log.evaluate(lambda A: be.evaluate(prob, A), X, 0)
    state = SwarmState.initial(X) if op.stateful else None
    log.initial(F)
    yield 0

    for t in range(cfg.t_max):
        k = X.shape[0]
        if k < cfg.n:
            idx = be.pool(k, cfg.n, stream)
            Xp, Fp = X[idx], F[idx]
            state_p = state.take(idx) if state is not None else None
        else:
            Xp, Fp, state_p = X, F, state
        scores = be.scores(Fp, refs, t, cfg.t_max, cfg.alpha) if op.needs_scores else None
        try:
            off, off_state = be.reproduce(Xp, scores, state_p, stream, L, U)
        except Exception as exc:
            raise RunError(f"operator {op.name} failed at generation {t + 1} (seed {cfg.seed}): {exc}") from exc
        F_off = log.evaluate(lambda A: be.evaluate(prob, A), off, t + 1)

        Xc, Fc = np.vstack([X, off]), np.vstack([F, F_off])
        elites = be.select(Xc, Fc, refs, t, cfg.t_max, cfg.alpha)
        if state is not None:
            state = SwarmState.concat(state, off_state).take(elites)
        X, F = Xc[elites], Fc[elites]
        if (t + 1) % adapt_every == 0:
            refs = be.adapt(refs, F)
        stop = log.generation(t + 1, X, F)
        yield t + 1
        if stop:
            break
    return log.finish(X, F)


def _tournament(rank: np.ndarray, crowd: np.ndarray, U2: np.ndarray) -> np.ndarray:
    """Binary tournament: lower rank, then larger crowding, then lower index."""
    n = rank.shape[0]
    a = np.floor(U2[:, 0] * n).astype(np.int64)
    b = np.floor(U2[:, 1] * n).astype(np.int64)
    a_wins = (rank[a] < rank[b]) | (
        (rank[a] == rank[b]) & ((crowd[a] > crowd[b]) | ((crowd[a] == crowd[b]) & (a <= b)))
    )
    return np.where(a_wins, a, b)


def nsga2_run(
    cfg: RunConfig,
    metric_ctx: MetricContext | None = None,
    problem: ProblemInstance | None = None,
    ga: GaParams = GaParams(),
) -> RunRecord:
    """Generational NSGA-II: tournament mating, SBX + PM, rank/crowding truncation to n."""
    prob = _problem(cfg, problem)
    stream = RngStream(cfg.seed)
    L, U = prob.lower, prob.upper
    log = _Logger("nsga2", cfg, prob, metric_ctx)

    X = random_reproduce(cfg.n, prob.d, stream, L, U)
    F = log.evaluate(prob.evaluate, X, 0)
    log.initial(F)
    for t in range(cfg.t_max):
        rank, crowd = rank_and_crowding(F)
        parents = X[_tournament(rank, crowd, stream.uniform(cfg.n, 2))]
        try:
            off = ga_reproduce(parents, None, stream, ga, L, U)
        except Exception as exc:
            raise RunError(f"operator ga failed at generation {t + 1} (seed {cfg.seed}): {exc}") from exc
        F_off = log.evaluate(prob.evaluate, off, t + 1)
        Xc, Fc = np.vstack([X, off]), np.vstack([F, F_off])
        keep = nsga2_select(Xc, Fc, cfg.n)
        X, F = Xc[keep], Fc[keep]
        if log.generation(t + 1, X, F):
            break
    return log.finish(X, F)


def random_search_run(
    cfg: RunConfig, metric_ctx: MetricContext | None = None, problem: ProblemInstance | None = None
) -> RunRecord:
    """Fresh uniform samples every generation; only the archive accumulates."""
    prob = _problem(cfg, problem)
    stream = RngStream(cfg.seed)
    L, U = prob.lower, prob.upper
    log = _Logger("random", cfg, prob, metric_ctx)

    X = random_reproduce(cfg.n, prob.d, stream, L, U)
    F = log.evaluate(prob.evaluate, X, 0)
    log.initial(F)
    for t in range(cfg.t_max):
        X = random_reproduce(cfg.n, prob.d, stream, L, U)
        F = log.evaluate(prob.evaluate, X, t + 1)
        if log.generation(t + 1, X, F):
            break
    return log.finish(X, F)


ALGORITHMS = {"tensor_rvea": tensor_rvea_run, "nsga2": nsga2_run, "random": random_search_run}
