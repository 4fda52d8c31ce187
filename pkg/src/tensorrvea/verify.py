"""Oracle-equivalence suites shared by the ``verify`` subcommand and the tests.

Each suite draws seeded random instances, runs a tensorized kernel and its
scalar oracle on identical inputs (and identical random streams) and
records every mismatch together with the instance that produced it, so a
failure can be replayed from the report alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics, operators, oracle, problems, selection
from .operators import GaParams, SwarmState
from .refvec import RefVectorSet, simplex_lattice
from .rng import RngStream

APD_TOL = 1e-9
OPERATOR_TOL = 1e-12
METRIC_TOL = 1e-12


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _same_inf(a: np.ndarray, b: np.ndarray) -> bool:
    return np.array_equal(np.isinf(a), np.isinf(b))


def _close(a, b, tol: float) -> bool:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or not _same_inf(a, b):
        return False
    fin = np.isfinite(a)
    return bool(np.all(np.abs(a[fin] - b[fin]) <= tol))


# ------------------------------------------------------------- generators


def selection_instance(seed: int) -> dict:
    """Random selection problem: n <= 64, m in {2, 3}, r <= 15.

    Objective values are often drawn from a coarse grid, and rows are often
    duplicated, so equal APD values (ties) occur regularly.
    """
    g = np.random.default_rng(seed)
    m = int(g.choice([2, 3]))
    n = int(g.integers(1, 65))
    if g.random() < 0.5:
        H = int(g.integers(1, 15)) if m == 2 else int(g.integers(1, 5))
        V = simplex_lattice(m, H)
    else:
        r = int(g.integers(2, 16))
        V = g.random((r, m)) + 1e-3
    if g.random() < 0.5:
        F = g.integers(0, 5, size=(n, m)) / 4.0
    else:
        F = g.random((n, m)) * g.uniform(0.5, 10.0)
    if n > 1 and g.random() < 0.7:
        dup = g.integers(0, n, size=int(g.integers(1, n + 1)))
        F[g.integers(0, n, size=dup.size)] = F[dup]
    t_max = int(g.integers(1, 101))
    t = float(g.integers(0, t_max + 1))
    return {"seed": seed, "F": F, "V": V, "t": t, "t_max": float(t_max), "alpha": 2.0}


def operator_instance(seed: int, min_n: int = 2) -> dict:
    """Population of n <= 16 rows, d <= 8 genes inside random bounds."""
    g = np.random.default_rng(seed)
    n = int(g.integers(min_n, 17))
    d = int(g.integers(1, 9))
    L = g.uniform(-5.0, 0.0, size=(1, d))
    U = L + g.uniform(0.1, 5.0, size=(1, d))
    X = L + (U - L) * g.random((n, d))
    if g.random() < 0.2:
        X[:, 0] = L[0, 0]  # genes sitting on the bound
    scores = g.integers(0, 4, size=(n, 1)).astype(np.float64)
    state = SwarmState(
        g.normal(size=(n, d)), L + (U - L) * g.random((n, d)), g.integers(0, 4, size=(n, 1)).astype(np.float64)
    )
    ga = GaParams(pc=float(g.choice([1.0, 0.9])), eta=float(g.uniform(1, 30)), pm=float(g.uniform(0.5, d)), xi=float(g.uniform(1, 30)))
    return {"seed": seed, "X": X, "L": L, "U": U, "scores": scores, "state": state, "ga": ga, "stream_seed": seed + 7919}


def front_instance(seed: int) -> dict:
    g = np.random.default_rng(seed)
    m = int(g.choice([2, 3]))
    n = int(g.integers(1, 41))
    F = g.integers(0, 6, size=(n, m)) / 5.0 if g.random() < 0.5 else g.random((n, m))
    R = g.random((int(g.integers(1, 31)), m))
    return {"seed": seed, "F": F, "R": R}


def _jsonable(inst: dict) -> dict:
    out = {}
    for k, v in inst.items():
        if isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, SwarmState):
            out[k] = {
                "velocities": v.velocities.tolist(),
                "personal_best_X": v.personal_best_X.tolist(),
                "personal_best_score": v.personal_best_score.tolist(),
            }
        elif isinstance(v, GaParams):
            out[k] = vars(v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------- suites


def suite_rv_select(count: int = 200, first_seed: int = 0) -> SuiteResult:
    res = SuiteResult("rv_select")
    for seed in range(first_seed, first_seed + count):
        inst = selection_instance(seed)
        refs = RefVectorSet.from_vectors(inst["V"])
        args = (inst["t"], inst["t_max"], inst["alpha"])
        got = selection.rv_select(None, inst["F"], refs, *args)
        want = oracle.oracle_rv_select(None, inst["F"], refs, *args)
        res.checked += 1
        problems_found = []
        if not np.array_equal(got.elite_indices, want.elite_indices):
            problems_found.append("elite indices differ")
        if not np.array_equal(got.validity, want.validity):
            problems_found.append("validity differs")
        if not _close(got.apd_table, want.apd_table, APD_TOL):
            problems_found.append("APD tables differ")
        if problems_found:
            res.failures.append({"reason": "; ".join(problems_found), "instance": _jsonable(inst)})
    return res


def _operator_suite(name: str, count: int, first_seed: int, run) -> SuiteResult:
    res = SuiteResult(name)
    for seed in range(first_seed, first_seed + count):
        inst = operator_instance(seed, min_n=4 if name == "de" else 2)
        got, want = run(inst)
        res.checked += 1
        if not _close(got, want, OPERATOR_TOL):
            diff = float(np.max(np.abs(np.asarray(got) - np.asarray(want)))) if np.shape(got) == np.shape(want) else None
            res.failures.append({"reason": f"max abs diff {diff}", "instance": _jsonable(inst)})
    return res


def _streams(inst):
    return RngStream(inst["stream_seed"]), RngStream(inst["stream_seed"])


def _run_sbx(inst):
    a, b = _streams(inst)
    return (
        operators.sbx(inst["X"], a, inst["ga"], inst["L"], inst["U"]),
        oracle.oracle_sbx(inst["X"], b, inst["ga"], inst["L"], inst["U"]),
    )


def _run_pm(inst):
    a, b = _streams(inst)
    return (
        operators.polynomial_mutation(inst["X"], a, inst["ga"], inst["L"], inst["U"]),
        oracle.oracle_pm(inst["X"], b, inst["ga"], inst["L"], inst["U"]),
    )


def _run_ga(inst):
    a, b = _streams(inst)
    return (
        operators.ga_reproduce(inst["X"], None, a, inst["ga"], inst["L"], inst["U"]),
        oracle.oracle_ga(inst["X"], b, inst["ga"], inst["L"], inst["U"]),
    )


def _run_de(inst):
    a, b = _streams(inst)
    return (
        operators.de_reproduce(inst["X"], a, inst["L"], inst["U"]),
        oracle.oracle_de(inst["X"], b, inst["L"], inst["U"]),
    )


def _run_pso(inst):
    a, b = _streams(inst)
    X1, s1 = operators.pso_reproduce(inst["X"], inst["state"], inst["scores"], a, inst["L"], inst["U"])
    X2, s2 = oracle.oracle_pso(inst["X"], inst["state"], inst["scores"], b, inst["L"], inst["U"])
    return np.hstack([X1, s1.velocities, s1.personal_best_X]), np.hstack([X2, s2.velocities, s2.personal_best_X])


def _run_cso(inst):
    a, b = _streams(inst)
    X1, s1 = operators.cso_reproduce(inst["X"], inst["scores"], a, inst["L"], inst["U"], inst["state"])
    X2, s2 = oracle.oracle_cso(inst["X"], inst["scores"], b, inst["L"], inst["U"], inst["state"])
    return np.hstack([X1, s1.velocities]), np.hstack([X2, s2.velocities])


OPERATOR_SUITES = {"sbx": _run_sbx, "pm": _run_pm, "ga": _run_ga, "de": _run_de, "pso": _run_pso, "cso": _run_cso}


def suite_operator(name: str, count: int = 100, first_seed: int = 0) -> SuiteResult:
    return _operator_suite(name, count, first_seed, OPERATOR_SUITES[name])


def suite_nds(count: int = 100, first_seed: int = 0) -> SuiteResult:
    res = SuiteResult("nds")
    for seed in range(first_seed, first_seed + count):
        inst = front_instance(seed)
        F = inst["F"]
        res.checked += 1
        reasons = []
        if not np.array_equal(selection.nondominated_sort(F), oracle.oracle_nds(F)):
            reasons.append("ranks differ")
        target = max(1, F.shape[0] // 2)
        if selection.nsga2_select(None, F, target).tolist() != oracle.oracle_nsga2_select(F, target):
            reasons.append("survivors differ")
        if reasons:
            res.failures.append({"reason": "; ".join(reasons), "instance": _jsonable(inst)})
    return res


def suite_metric(name: str, count: int = 100, first_seed: int = 0) -> SuiteResult:
    res = SuiteResult(name)
    for seed in range(first_seed, first_seed + count):
        inst = front_instance(seed)
        if name == "igd":
            got, want = metrics.igd(inst["F"], inst["R"]), oracle.oracle_igd(inst["F"], inst["R"])
        else:
            got, want = metrics.eu(inst["F"], inst["R"]), oracle.oracle_eu(inst["F"], inst["R"])
        res.checked += 1
        if abs(got - want) > METRIC_TOL:
            res.failures.append({"reason": f"{got!r} != {want!r}", "instance": _jsonable(inst)})
    return res


def suite_dtlz(count: int = 100, first_seed: int = 0) -> SuiteResult:
    res = SuiteResult("dtlz")
    for seed in range(first_seed, first_seed + count):
        g = np.random.default_rng(seed)
        pid = int(g.integers(1, 5))
        m = int(g.integers(2, 5))
        d = int(g.integers(m, m + 12))
        X = g.random((int(g.integers(1, 20)), d))
        res.checked += 1
        if not np.array_equal(problems.dtlz_eval(pid, X, m), oracle.oracle_dtlz(pid, X, m)):
            res.failures.append({"reason": "batch and scalar differ", "instance": {"seed": seed, "pid": pid, "m": m, "X": X.tolist()}})
    return res


def run_all() -> list[SuiteResult]:
    out = [suite_rv_select()]
    out += [suite_operator(name) for name in OPERATOR_SUITES]
    out += [suite_nds(), suite_metric("igd"), suite_metric("eu"), suite_dtlz()]
    return out
