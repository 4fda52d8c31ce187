import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorrvea import metrics as M
from tensorrvea import oracle as O
from tensorrvea import tensor_ops as T
from tensorrvea.algorithms import (
    Archive,
    RunConfig,
    RunError,
    archive_update,
    nondominated_rows,
    nsga2_run,
    random_search_run,
    tensor_rvea_run,
)
from tensorrvea.problems import make_dtlz
from tensorrvea.selection import nondominated_sort

SMALL = dict(problem="dtlz2", n=15, H=4, t_max=10, m=3)


def _mutually_nondominated(F):
    return np.all(nondominated_sort(F) == 0)


# ---------------------------------------------------------------- archive


def test_dominated_insert_leaves_archive_unchanged():
    a = Archive(1, 2).update(np.zeros((2, 1)), np.array([[0.0, 1.0], [1.0, 0.0]]))
    before = a.F.copy()
    a.update(np.zeros((1, 1)), np.array([[1.0, 1.0]]))
    assert np.array_equal(a.F, before)


def test_dominating_insert_evicts_everything_it_dominates():
    a = Archive(1, 2).update(np.zeros((3, 1)), np.array([[0.5, 1.0], [1.0, 0.5], [0.0, 2.0]]))
    a.update(np.ones((1, 1)), np.array([[0.4, 0.4]]))
    assert a.F.tolist() == [[0.0, 2.0], [0.4, 0.4]]


def test_duplicates_keep_the_earliest_copy():
    a = Archive(1, 2).update(np.array([[1.0]]), np.array([[0.5, 0.5]]))
    a.update(np.array([[2.0], [3.0]]), np.array([[0.5, 0.5], [0.5, 0.5]]))
    assert a.X.tolist() == [[1.0]] and len(a) == 1


def test_functional_update_does_not_modify_input():
    a = Archive(1, 2).update(np.zeros((1, 1)), np.array([[1.0, 1.0]]))
    b = archive_update(a, np.zeros((1, 1)), np.array([[0.0, 0.0]]))
    assert a.F.tolist() == [[1.0, 1.0]] and b.F.tolist() == [[0.0, 0.0]]


def test_archive_cap_truncates_by_crowding():
    F = np.array([[0.0, 1.0], [0.1, 0.9], [0.5, 0.5], [1.0, 0.0]])
    a = Archive(1, 2, cap=3).update(np.arange(4.0)[:, None], F)
    assert len(a) == 3
    assert {0.0, 3.0} <= set(a.X[:, 0].tolist())


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31))
def test_archive_equals_rank_zero_of_insertion_history(seed):
    g = np.random.default_rng(seed)
    m = int(g.integers(2, 4))
    archive = Archive(1, m)
    history = []
    for _ in range(int(g.integers(1, 6))):
        k = int(g.integers(1, 12))
        F = g.integers(0, 4, size=(k, m)).astype(float)
        archive.update(np.zeros((k, 1)), F)
        history.append(F)
        assert _mutually_nondominated(archive.F)
    allF = np.vstack(history)
    _, first = np.unique(allF, axis=0, return_index=True)
    uniq = allF[np.sort(first)]
    want = uniq[nondominated_sort(uniq) == 0]
    assert sorted(map(tuple, archive.F.tolist())) == sorted(map(tuple, want.tolist()))


def test_nondominated_rows_matches_sort():
    F = np.unique(np.random.default_rng(1).integers(0, 8, size=(200, 3)).astype(float), axis=0)
    assert np.array_equal(nondominated_rows(F), np.nonzero(nondominated_sort(F) == 0)[0])


# ---------------------------------------------------------------- configs


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(n=1)
    with pytest.raises(ValueError):
        RunConfig(t_max=0)
    with pytest.raises(ValueError):
        RunConfig(budget_s=0)
    with pytest.raises(ValueError):
        RunConfig(metric_source="front")


# --------------------------------------------------------------- TensorRVEA


def test_single_generation_with_n_equal_r():
    rec = tensor_rvea_run(RunConfig(problem="dtlz2", n=15, H=4, t_max=1, m=3))
    assert len(rec.rows) == 1 and rec.rows[0].t == 1
    assert len(rec.archive_F) > 0
    assert rec.rows[0].evals == 30


@pytest.mark.parametrize("operator", ["ga", "de", "pso", "cso", "random"])
def test_fixed_seed_gives_identical_records(operator):
    cfg = RunConfig(operator=operator, seed=3, **SMALL)
    assert tensor_rvea_run(cfg).fingerprint() == tensor_rvea_run(cfg).fingerprint()


def test_records_are_independent_of_lane_count():
    cfg = RunConfig(seed=1, **SMALL)
    ref = tensor_rvea_run(cfg).fingerprint()
    with T.lanes(3):
        assert tensor_rvea_run(cfg).fingerprint() == ref


@pytest.mark.parametrize("operator", ["ga", "de", "pso", "cso", "random"])
def test_tensor_and_oracle_backends_agree(operator):
    cfg = RunConfig(operator=operator, seed=2, problem="dtlz1", n=12, H=3, t_max=8, m=3)
    a, b = tensor_rvea_run(cfg), tensor_rvea_run(cfg, backend="oracle")
    assert a.final_F.shape == b.final_F.shape
    assert np.max(np.abs(a.final_F - b.final_F)) <= 1e-9


def test_archive_is_mutually_nondominated_and_elapsed_grows():
    rec = tensor_rvea_run(RunConfig(seed=0, keep_history=True, **SMALL))
    assert _mutually_nondominated(rec.archive_F)
    elapsed = [r.elapsed_ms for r in rec.rows]
    assert elapsed == sorted(elapsed)
    assert len(rec.history) == len(rec.rows) + 1


def test_population_floats_with_valid_vectors():
    rec = tensor_rvea_run(RunConfig(seed=0, **SMALL))
    assert all(1 <= r.pop_size <= 15 for r in rec.rows)
    assert all(r.evals == 15 * (r.t + 1) for r in rec.rows)


def test_wall_clock_budget_stops_early():
    cfg = RunConfig(problem="dtlz2", n=105, H=13, t_max=100_000, budget_s=0.3, m=3)
    rec = tensor_rvea_run(cfg)
    assert len(rec.rows) < 100_000
    per_gen = np.diff([0.0] + [r.elapsed_ms for r in rec.rows]).max()
    assert rec.rows[-1].elapsed_ms <= 300 + per_gen


def test_evaluator_failure_carries_generation_and_seed():
    prob = make_dtlz(2)
    calls = {"n": 0}

    def flaky(X):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FloatingPointError("boom")
        return prob.evaluator(X)

    broken = type(prob)(prob.name, prob.d, prob.m, prob.lower, prob.upper, flaky, meta=prob.meta)
    with pytest.raises(RunError, match="generation 2 .*seed 7"):
        tensor_rvea_run(RunConfig(seed=7, **SMALL), problem=broken)


def test_unknown_backend_is_rejected():
    with pytest.raises(ValueError):
        tensor_rvea_run(RunConfig(**SMALL), backend="gpu")


# ---------------------------------------------------------------- NSGA-II


def test_nsga2_is_deterministic_with_fixed_population():
    cfg = RunConfig(seed=4, **SMALL)
    a, b = nsga2_run(cfg), nsga2_run(cfg)
    assert a.fingerprint() == b.fingerprint()
    assert all(r.pop_size == 15 for r in a.rows)


def test_nsga2_archive_nondominated_every_generation():
    rec = nsga2_run(RunConfig(seed=5, keep_history=True, **SMALL))
    assert all(_mutually_nondominated(F) for F in rec.history)


def test_nsga2_raises_rank_zero_fraction_on_dtlz2():
    cfg = RunConfig(problem="dtlz2", n=40, H=4, t_max=30, m=3, seed=0)
    prob = make_dtlz(2)
    X0 = O.oracle_random(40, prob.d, __import__("tensorrvea").RngStream(0), prob.lower, prob.upper)
    initial = float(np.mean(nondominated_sort(prob.evaluate(X0)) == 0))
    rec = nsga2_run(cfg)
    final = float(np.mean(nondominated_sort(rec.final_F) == 0))
    assert final >= initial


# ----------------------------------------------------------- random search


def test_random_search_bounds_and_determinism():
    cfg = RunConfig(seed=6, **SMALL)
    rec = random_search_run(cfg)
    prob = make_dtlz(2)
    assert np.all(rec.final_X >= prob.lower) and np.all(rec.final_X <= prob.upper)
    assert rec.fingerprint() == random_search_run(cfg).fingerprint()


@pytest.mark.parametrize("runner", [tensor_rvea_run, nsga2_run, random_search_run])
def test_archive_hv_is_nondecreasing(runner):
    rec = runner(RunConfig(problem="dtlz2", n=15, H=4, t_max=15, m=2, seed=8, keep_history=True))
    hv = [M.hv_exact_2d(F, [2.0, 2.0]) for F in rec.history]
    assert all(b >= a for a, b in zip(hv, hv[1:]))


def test_metrics_are_logged_per_generation():
    ctx = M.MetricContext(reference_front=np.array([[1.0, 0.0, 0.0]]), reference_point=np.ones(3), hv_samples=1000)
    rec = tensor_rvea_run(RunConfig(metrics=("igd", "hv"), **SMALL), metric_ctx=ctx)
    assert set(rec.initial_metrics) == {"igd", "hv"}
    assert all(set(r.metrics) == {"igd", "hv"} for r in rec.rows)
