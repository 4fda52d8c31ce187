import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorrvea import oracle as O
from tensorrvea import selection as S
from tensorrvea import tensor_ops as T
from tensorrvea.refvec import RefVectorSet, normalize_to_unit
from tensorrvea.verify import selection_instance


def _refs(V):
    return RefVectorSet.from_vectors(V)


# -------------------------------------------------------------- translate


def test_translate_examples():
    Fp, z = S.translate([[1.0, 4.0], [3.0, 2.0]])
    assert z.tolist() == [[1, 2]] and Fp.tolist() == [[0, 2], [2, 0]]
    Fp, _ = S.translate([[0.0, 5.0], [1.0, 6.0]])
    assert Fp[:, 0].tolist() == [0.0, 1.0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_translated_columns_have_zero_minimum(seed):
    F = np.random.default_rng(seed).normal(size=(9, 3))
    Fp, _ = S.translate(F)
    assert np.array_equal(T.col_min(Fp), np.zeros((1, 3)))


# ----------------------------------------------------------------- angles


def test_angle_examples():
    V = np.eye(2)
    Th = S.angles(np.array([[2.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), V)
    assert Th[0, 0] == 0.0 and Th[1, 1] == pytest.approx(math.pi / 2, abs=1e-15)
    assert Th[2].tolist() == [0.0, 0.0]


def test_angles_match_scalar_loop():
    g = np.random.default_rng(1)
    Fp, V = g.random((12, 3)), normalize_to_unit(g.random((7, 3)))
    Th = S.angles(Fp, V)
    for i in range(12):
        for j in range(7):
            c = sum(a * b for a, b in zip(Fp[i], V[j])) / (math.sqrt(sum(a * a for a in Fp[i])) * math.sqrt(sum(b * b for b in V[j])))
            assert abs(Th[i, j] - math.acos(max(-1.0, min(1.0, c)))) <= 1e-12


# -------------------------------------------------------------- partition


def test_partition_single_assignment_example():
    _, Tp = S.partition(np.array([[0.5, 0.4, 0.1]]))
    assert Tp.tolist() == [[-1, -1, 0]]


def test_partition_matches_nearest_vector_loop():
    g = np.random.default_rng(2)
    for _ in range(100):
        n, r = int(g.integers(1, 20)), int(g.integers(1, 10))
        Th = g.integers(0, 5, size=(n, r)).astype(float)
        A, Tp = S.partition(Th)
        for i in range(n):
            best = min(range(r), key=lambda j: (Th[i, j], j))
            assert A[i].tolist() == [best] * r
            want = [-1.0] * r
            want[best] = float(i)
            assert Tp[i].tolist() == want


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_association_is_scale_invariant(seed, scale):
    g = np.random.default_rng(seed)
    Fp, V = g.random((15, 3)), normalize_to_unit(g.random((6, 3)) + 1e-3)
    A1, _ = S.partition(S.angles(Fp, V))
    A2, _ = S.partition(S.angles(Fp * scale, V))
    assert np.array_equal(A1, A2)


# ------------------------------------------------------------------- APD


def _apd(Fp, V, t, t_max, alpha=2.0):
    refs = _refs(V)
    Th = S.angles(Fp, refs.V)
    _, Tp = S.partition(Th)
    return S.apd_table(Th, Tp, refs.gamma, Fp, t, t_max, alpha, Fp.shape[1]), Tp, Th, refs


def test_apd_at_generation_zero_is_the_norm():
    Fp = np.random.default_rng(3).random((10, 3))
    table, Tp, *_ = _apd(Fp, np.random.default_rng(4).random((5, 3)) + 0.1, 0, 10)
    norms = np.sqrt((Fp**2).sum(axis=1))
    i, j = np.nonzero(Tp >= 0)
    assert np.allclose(table[i, j], norms[i], rtol=0, atol=1e-15)
    assert np.all(np.isinf(table[Tp < 0]))


def test_apd_on_the_vector_is_the_norm():
    V = np.eye(2)
    table, *_ = _apd(np.array([[3.0, 0.0], [0.0, 0.5]]), V, 7, 10)
    assert table[0, 0] == 3.0 and table[1, 1] == 0.5


def test_apd_penalty_example():
    # m=2, t = t_max, alpha=2, theta = gamma -> 1 + 2 * 1 * 1 = 3
    Th = np.array([[math.pi / 2, math.pi]])
    Tp = np.array([[0.0, -1.0]])
    Fp = np.array([[1.0, 1.0]])
    table = S.apd_table(Th, Tp, np.array([[math.pi / 2], [math.pi / 2]]), Fp, 5, 5, 2.0, 2)
    assert table[0, 0] == pytest.approx(3 * math.sqrt(2), abs=1e-15)
    assert table[0, 1] == math.inf


def test_apd_rejects_bad_gamma_and_generation():
    Th, Tp, Fp = np.zeros((1, 2)), np.array([[0.0, -1.0]]), np.ones((1, 2))
    with pytest.raises(ValueError):
        S.apd_table(Th, Tp, np.array([[0.0], [1.0]]), Fp, 0, 1, 2.0, 2)
    with pytest.raises(ValueError):
        S.apd_table(Th, Tp, np.ones((2, 1)), Fp, 2, 1, 2.0, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_apd_columns_independent_of_lane_count(seed, lane_count):
    inst = selection_instance(seed)
    refs = _refs(inst["V"])
    Fp, _ = S.translate(inst["F"])
    Th = S.angles(Fp, refs.V)
    _, Tp = S.partition(Th)
    args = (Th, Tp, refs.gamma, Fp, inst["t"], inst["t_max"], 2.0, Fp.shape[1])
    ref = S.apd_table(*args)
    with T.lanes(lane_count):
        assert S.apd_table(*args).tobytes() == ref.tobytes()


# -------------------------------------------------------------- rv_select


def test_singleton_subpopulations_all_survive():
    V = RefVectorSet.lattice(2, 4).V
    out = S.rv_select(None, V * 2.0, _refs(V), 3, 10)
    assert sorted(out.elite_indices.tolist()) == list(range(5))
    assert out.validity.all()


def test_smaller_norm_wins_on_shared_vector():
    V = np.eye(2)
    F = np.array([[0.0, 1.0], [0.0, 3.0], [2.0, 0.0]])
    out = S.rv_select(None, F, _refs(V), 1, 2)
    assert sorted(out.elite_indices.tolist()) == [0, 2]


def test_invalid_vectors_are_flagged():
    V = normalize_to_unit([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    F = np.array([[0.0, 1.0], [0.0, 2.0], [1.0, 0.0]])
    out = S.rv_select(None, F, _refs(V), 0, 1)
    assert out.validity.tolist() == [True, False, True]
    assert np.all(np.isinf(out.apd_table[:, 1]))
    assert len(out.elite_indices) == 2


def test_ties_break_to_lowest_row():
    V = np.eye(2)
    F = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    assert sorted(S.rv_select(None, F, _refs(V), 0, 1).elite_indices.tolist()) == [0, 2]


def test_row_count_mismatch_is_rejected():
    with pytest.raises(T.ShapeError):
        S.rv_select(np.zeros((3, 2)), np.zeros((2, 2)), _refs(np.eye(2)), 0, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_selection_outcome_invariants(seed):
    inst = selection_instance(seed)
    out = S.rv_select(None, inst["F"], _refs(inst["V"]), inst["t"], inst["t_max"])
    elites = out.elite_indices
    assert len(set(elites.tolist())) == len(elites)
    cols = np.nonzero(out.validity)[0]
    for e, j in zip(elites, cols):
        assert out.apd_table[e, j] == out.apd_table[:, j].min()
    assert np.array_equal(out.validity, ~np.all(np.isinf(out.apd_table), axis=0))
    _, Tp = S.partition(S.angles(S.translate(inst["F"])[0], _refs(inst["V"]).V))
    assert np.all((Tp >= 0).sum(axis=1) == 1)
    assert np.array_equal(Tp.max(axis=1), np.arange(Tp.shape[0]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_selection_is_invariant_to_row_order(seed):
    g = np.random.default_rng(seed)
    # distinct continuous values avoid ties, whose winner is index-dependent
    F = g.random((int(g.integers(1, 40)), 3))
    refs = RefVectorSet.lattice(3, 4)
    perm = g.permutation(F.shape[0])
    a = S.rv_select(None, F, refs, 3, 10).elite_indices
    b = S.rv_select(None, F[perm], refs, 3, 10).elite_indices
    assert sorted(a.tolist()) == sorted(perm[b].tolist())


def test_apd_scores_pick_each_rows_own_slot():
    inst = selection_instance(11)
    refs = _refs(inst["V"])
    scores = S.apd_scores(inst["F"], refs, inst["t"], inst["t_max"])
    table = S.rv_select(None, inst["F"], refs, inst["t"], inst["t_max"]).apd_table
    assert np.array_equal(scores[:, 0], table.min(axis=1))
    assert np.allclose(scores[:, 0], O.oracle_apd_scores(inst["F"], refs, inst["t"], inst["t_max"])[:, 0], atol=1e-9)


def test_oracle_generation_zero_and_single_individual():
    refs = RefVectorSet.lattice(2, 3)
    F = np.array([[0.2, 0.9], [0.25, 0.95], [0.9, 0.2]])
    out = O.oracle_rv_select(None, F, refs, 0, 5)
    assert sorted(out.elite_indices.tolist()) == [0, 2]
    one = O.oracle_rv_select(None, np.array([[0.3, 0.4]]), refs, 2, 5)
    assert one.elite_indices.tolist() == [0]


# -------------------------------------------------------- NSGA-II pieces


def test_sort_examples():
    assert S.nondominated_sort([[1.0, 2.0]]).tolist() == [0]
    assert S.nondominated_sort([[3.0, 3.0], [1.0, 1.0], [2.0, 2.0]]).tolist() == [2, 0, 1]
    assert S.nondominated_sort([[1.0, 1.0], [1.0, 1.0]]).tolist() == [0, 0]


def test_sort_matches_brute_force_oracle():
    F = np.random.default_rng(5).integers(0, 6, size=(50, 3)).astype(float)
    assert np.array_equal(S.nondominated_sort(F), O.oracle_nds(F))


def test_crowding_examples():
    assert np.all(np.isinf(S.crowding_distance([[0.0, 1.0], [1.0, 0.0]])))
    cd = S.crowding_distance([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
    assert cd[1, 0] == 2.0 and np.isinf(cd[0, 0]) and np.isinf(cd[2, 0])
    flat = S.crowding_distance([[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
    assert flat[1, 0] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_crowding_is_permutation_equivariant(seed):
    g = np.random.default_rng(seed)
    F = g.random((int(g.integers(1, 20)), 3))
    perm = g.permutation(F.shape[0])
    assert np.array_equal(S.crowding_distance(F[perm]), S.crowding_distance(F)[perm])


def test_nsga2_select_examples():
    F = np.random.default_rng(6).random((20, 2))
    assert sorted(S.nsga2_select(None, F, 20).tolist()) == list(range(20))
    front = np.nonzero(S.nondominated_sort(F) == 0)[0]
    assert sorted(S.nsga2_select(None, F, front.size).tolist()) == front.tolist()
    with pytest.raises(ValueError):
        S.nsga2_select(None, F, 21)
    assert S.nsga2_select(None, F, 7).tolist() == O.oracle_nsga2_select(F, 7)
