"""Scalar loop-based reference implementations.

Everything here works element by element on Python floats and lists and
deliberately shares no code with the tensorized kernels beyond the data
types and the random stream. Each function consumes random draws in exactly
the order documented in :mod:`tensorrvea.operators`, using the scalar path
:meth:`RngStream.next_float`, so a tensorized kernel and its oracle fed copies
of one stream must agree.

These are slow on purpose. They back the equivalence tests and serve as the
sequential baseline of the scaling benchmark.
"""

from __future__ import annotations

import math

import numpy as np

from .operators import GaParams, SwarmState
from .problems import DTLZ4_ALPHA, MlpArch, ToyEnvSpec
from .rng import RngStream, shuffle_indices
from .selection import SelectionOutcome

INF = math.inf


def _rows(a) -> list[list[float]]:
    return np.asarray(a, dtype=np.float64).tolist()


def _draws(stream: RngStream, rows: int, cols: int) -> list[list[float]]:
    return [[stream.next_float() for _ in range(cols)] for _ in range(rows)]


def _step(x: float) -> float:
    return 1.0 if x >= 0 else 0.0


def _sgn(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


def _clip(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def _acos(c: float) -> float:
    return math.acos(min(1.0, max(-1.0, c)))


def _norm(v) -> float:
    s = 0.0
    for x in v:
        s += x * x
    return math.sqrt(s)


def _dot(a, b) -> float:
    s = 0.0
    for x, y in zip(a, b):
        s += x * y
    return s


# ----------------------------------------------------------------- kernels


def oracle_matmul(a, b) -> np.ndarray:
    A, B = _rows(a), _rows(b)
    n, k, p = len(A), len(B), len(B[0]) if B else 0
    out = [[0.0] * p for _ in range(n)]
    for i in range(n):
        for j in range(p):
            s = 0.0
            for q in range(k):
                s += A[i][q] * B[q][j]
            out[i][j] = s
    return np.asarray(out).reshape(n, p)


def oracle_row_norms(a) -> np.ndarray:
    return np.asarray([[_norm(row)] for row in _rows(a)])


# --------------------------------------------------------------- reference vectors


def oracle_gamma(V) -> list[float]:
    V = _rows(V)
    out = []
    for j, vj in enumerate(V):
        best = INF
        for i, vi in enumerate(V):
            if i != j:
                best = min(best, _acos(_dot(vi, vj) / (_norm(vi) * _norm(vj))))
        out.append(best)
    return out


def oracle_adapt(V0, z_min, z_max, current) -> np.ndarray:
    span = [hi - lo for lo, hi in zip(np.ravel(z_min).tolist(), np.ravel(z_max).tolist())]
    if any(s <= 0 for s in span):
        return np.asarray(current, dtype=np.float64)
    out = []
    for v in _rows(V0):
        w = [x * s for x, s in zip(v, span)]
        nw = _norm(w)
        out.append([x / nw for x in w])
    return np.asarray(out)


# ---------------------------------------------------------------- selection


def _associate(F, V):
    """Per-row translated objectives, norms, angles and nearest-vector index."""
    m = len(F[0])
    z = [min(row[k] for row in F) for k in range(m)]
    Fp = [[row[k] - z[k] for k in range(m)] for row in F]
    vnorm = [_norm(v) for v in V]
    theta, norms, assoc = [], [], []
    for f in Fp:
        nf = _norm(f)
        row = []
        for v, nv in zip(V, vnorm):
            row.append(0.0 if nf * nv == 0 else _acos(_dot(f, v) / (nf * nv)))
        best = 0
        for j in range(1, len(row)):
            if row[j] < row[best]:
                best = j
        theta.append(row)
        norms.append(nf)
        assoc.append(best)
    return theta, norms, assoc


def oracle_rv_select(X, F, refs, t: float, t_max: float, alpha: float = 2.0, gam=None) -> SelectionOutcome:
    """Reference-vector selection with explicit subpopulation lists.

    ``gam`` may carry neighbor angles from :func:`oracle_gamma` for the same
    vectors; otherwise they are recomputed here.
    """
    F = _rows(F)
    V = _rows(refs.V)
    n, r, m = len(F), len(V), len(V[0])
    gam = oracle_gamma(V) if gam is None else gam
    theta, norms, assoc = _associate(F, V)
    p = m * (t / t_max) ** alpha
    subpops: list[list[int]] = [[] for _ in range(r)]
    for i, j in enumerate(assoc):
        subpops[j].append(i)
    table = [[INF] * r for _ in range(n)]
    elites, valid = [], []
    for j in range(r):
        best, best_d = -1, INF
        for i in subpops[j]:
            d = (1.0 + p * theta[i][j] / gam[j]) * norms[i]
            table[i][j] = d
            if d < best_d:
                best, best_d = i, d
        valid.append(best >= 0)
        if best >= 0:
            elites.append(best)
    return SelectionOutcome(np.asarray(elites, dtype=np.int64), np.asarray(valid), np.asarray(table).reshape(n, r))


def oracle_apd_scores(F, refs, t: float, t_max: float, alpha: float = 2.0, gam=None) -> np.ndarray:
    F = _rows(F)
    V = _rows(refs.V)
    m = len(V[0])
    gam = oracle_gamma(V) if gam is None else gam
    theta, norms, assoc = _associate(F, V)
    p = m * (t / t_max) ** alpha
    return np.asarray([[(1.0 + p * theta[i][j] / gam[j]) * norms[i]] for i, j in enumerate(assoc)])


def _dominates(a, b) -> bool:
    strictly = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strictly = True
    return strictly


def oracle_nds(F) -> np.ndarray:
    F = _rows(F)
    n = len(F)
    rank = [-1] * n
    remaining = set(range(n))
    level = 0
    while remaining:
        front = [i for i in remaining if not any(_dominates(F[j], F[i]) for j in remaining if j != i)]
        for i in front:
            rank[i] = level
        remaining -= set(front)
        level += 1
    return np.asarray(rank, dtype=np.int64)


def oracle_crowding(F) -> list[float]:
    F = _rows(F)
    k = len(F)
    if k <= 2:
        return [INF] * k
    dist = [0.0] * k
    for j in range(len(F[0])):
        order = sorted(range(k), key=lambda i: (F[i][j], i))
        lo, hi = F[order[0]][j], F[order[-1]][j]
        if hi - lo <= 0:
            continue
        dist[order[0]] = INF
        dist[order[-1]] = INF
        for pos in range(1, k - 1):
            dist[order[pos]] += (F[order[pos + 1]][j] - F[order[pos - 1]][j]) / (hi - lo)
    return dist


def oracle_nsga2_select(F, target: int) -> list[int]:
    rank = oracle_nds(F).tolist()
    F = _rows(F)
    chosen: list[int] = []
    level = 0
    while len(chosen) < target:
        members = [i for i in range(len(F)) if rank[i] == level]
        if len(chosen) + len(members) <= target:
            chosen += members
        else:
            cd = oracle_crowding([F[i] for i in members])
            order = sorted(range(len(members)), key=lambda q: (-cd[q], members[q]))
            chosen += [members[q] for q in order[: target - len(chosen)]]
        level += 1
    return chosen


# ---------------------------------------------------------------- operators


def oracle_sbx(X, stream: RngStream, p: GaParams, L, U) -> np.ndarray:
    X = _rows(X)
    L, U = np.ravel(L).tolist(), np.ravel(U).tolist()
    n, d = len(X), len(X[0])
    half = n // 2
    Mc = _draws(stream, half, d)
    R1 = _draws(stream, half, d)
    R2 = _draws(stream, half, d)
    R3 = _draws(stream, half, 1)
    e = 1.0 / (p.eta + 1.0)
    c1s, c2s = [], []
    for k in range(half):
        x1, x2 = X[k], X[half + k]
        c1, c2 = [], []
        for j in range(d):
            if R3[k][0] >= p.pc or R2[k][j] >= 0.5:
                b = 1.0
            else:
                u = Mc[k][j]
                beta = (2.0 * u) ** e if u <= 0.5 else (2.0 - 2.0 * u) ** (-e)
                b = _sgn(R1[k][j] - 0.5) * beta
            c1.append(_clip(((1.0 + b) * x1[j] + (1.0 - b) * x2[j]) / 2.0, L[j], U[j]))
            c2.append(_clip(((1.0 - b) * x1[j] + (1.0 + b) * x2[j]) / 2.0, L[j], U[j]))
        c1s.append(c1)
        c2s.append(c2)
    rest = [X[-1]] if n % 2 else []
    return np.asarray(c1s + c2s + rest).reshape(n, d)


def oracle_pm(Xc, stream: RngStream, p: GaParams, L, U) -> np.ndarray:
    X = _rows(Xc)
    L, U = np.ravel(L).tolist(), np.ravel(U).tolist()
    n, d = len(X), len(X[0])
    R4 = _draws(stream, n, d)
    M = _draws(stream, n, d)
    e = p.xi + 1.0
    out = []
    for i in range(n):
        row = []
        for j in range(d):
            x = X[i][j]
            if R4[i][j] > p.pm / d:
                row.append(x)
                continue
            span = U[j] - L[j]
            u = M[i][j]
            delta = 0.0
            if u <= 0.5:
                base = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - (x - L[j]) / span) ** e
                delta += span * (base ** (1.0 / e) - 1.0)
            if u >= 0.5:
                base = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - (U[j] - x) / span) ** e
                delta += span * (1.0 - base ** (1.0 / e))
            row.append(_clip(x + delta, L[j], U[j]))
        out.append(row)
    return np.asarray(out).reshape(n, d)


def oracle_ga(X, stream: RngStream, p: GaParams, L, U) -> np.ndarray:
    perm = shuffle_indices(stream, len(X))
    X = np.asarray(X)[perm]
    return oracle_pm(oracle_sbx(X, stream, p, L, U), stream, p, L, U)


def oracle_de(X, stream: RngStream, L, U, F_de: float = 0.5, CR: float = 0.9) -> np.ndarray:
    X = _rows(X)
    L, U = np.ravel(L).tolist(), np.ravel(U).tolist()
    n, d = len(X), len(X[0])
    picks = _draws(stream, n, 3)
    jr = _draws(stream, n, 1)
    cr = _draws(stream, n, d)
    out = []
    for i in range(n):
        taken = [i]
        donors = []
        for u in picks[i]:
            pool = [k for k in range(n) if k not in taken]
            choice = pool[int(math.floor(u * len(pool)))]
            donors.append(choice)
            taken.append(choice)
        r1, r2, r3 = donors
        j_rand = int(math.floor(jr[i][0] * d))
        row = []
        for j in range(d):
            if cr[i][j] < CR or j == j_rand:
                v = X[r1][j] + F_de * (X[r2][j] - X[r3][j])
            else:
                v = X[i][j]
            row.append(_clip(v, L[j], U[j]))
        out.append(row)
    return np.asarray(out).reshape(n, d)


def oracle_pso(X, state: SwarmState, scores, stream: RngStream, L, U, w=0.4, c1=1.5, c2=1.5):
    X = _rows(X)
    L, U = np.ravel(L).tolist(), np.ravel(U).tolist()
    n, d = len(X), len(X[0])
    sc = [row[0] for row in _rows(scores)]
    vel = _rows(state.velocities)
    pb = _rows(state.personal_best_X)
    pbs = [row[0] for row in _rows(state.personal_best_score)]
    for i in range(n):
        if sc[i] < pbs[i]:
            pb[i] = list(X[i])
            pbs[i] = sc[i]
    g = 0
    for i in range(1, n):
        if sc[i] < sc[g]:
            g = i
    R1 = _draws(stream, n, d)
    R2 = _draws(stream, n, d)
    out, nv = [], []
    for i in range(n):
        xr, vr = [], []
        for j in range(d):
            v = w * vel[i][j] + c1 * R1[i][j] * (pb[i][j] - X[i][j]) + c2 * R2[i][j] * (X[g][j] - X[i][j])
            vr.append(v)
            xr.append(_clip(X[i][j] + v, L[j], U[j]))
        out.append(xr)
        nv.append(vr)
    new_state = SwarmState(np.asarray(nv), np.asarray(pb), np.asarray(pbs)[:, None])
    return np.asarray(out), new_state


def oracle_cso(X, scores, stream: RngStream, L, U, state: SwarmState, phi: float = 0.1):
    X = _rows(X)
    L, U = np.ravel(L).tolist(), np.ravel(U).tolist()
    n, d = len(X), len(X[0])
    sc = [row[0] for row in _rows(scores)]
    vel = _rows(state.velocities)
    perm = shuffle_indices(stream, n).tolist()
    k = n // 2
    if k == 0:
        return np.asarray(X), state
    R1 = _draws(stream, k, d)
    R2 = _draws(stream, k, d)
    R3 = _draws(stream, k, d)
    mean = []
    for j in range(d):
        s = 0.0
        for i in range(n):
            s += X[i][j]
        mean.append(s / n)
    out = [list(row) for row in X]
    for q in range(k):
        a, b = perm[2 * q], perm[2 * q + 1]
        if sc[a] < sc[b] or (sc[a] == sc[b] and a < b):
            win, lose = a, b
        else:
            win, lose = b, a
        for j in range(d):
            v = R1[q][j] * vel[lose][j] + R2[q][j] * (X[win][j] - X[lose][j]) + phi * R3[q][j] * (mean[j] - X[lose][j])
            vel[lose][j] = v
            out[lose][j] = _clip(X[lose][j] + v, L[j], U[j])
    return np.asarray(out), SwarmState(np.asarray(vel), state.personal_best_X, state.personal_best_score)


def oracle_random(n: int, d: int, stream: RngStream, L, U) -> np.ndarray:
    L, U = np.ravel(L).tolist(), np.ravel(U).tolist()
    return np.asarray([[L[j] + (U[j] - L[j]) * stream.next_float() for j in range(d)] for _ in range(n)])


# ----------------------------------------------------------------- problems


def _int_power(x: float, k: int) -> float:
    result, base = 1.0, x
    while k:
        if k & 1:
            result *= base
        base *= base
        k >>= 1
    return result


def oracle_dtlz_row(pid: int, x, m: int) -> list[float]:
    x = list(x)
    d = len(x)
    k = d - m + 1
    g = 0.0
    for j in range(m - 1, d):
        c = x[j] - 0.5
        g += c * c - math.cos(20.0 * math.pi * c) if pid in (1, 3) else c * c
    if pid in (1, 3):
        g = 100.0 * (k + g)
    pos = [_int_power(xi, DTLZ4_ALPHA) if pid == 4 else xi for xi in x[: m - 1]]
    f = []
    for i in range(m):
        if pid == 1:
            v = 0.5 * (1.0 + g)
            for j in range(m - 1 - i):
                v *= pos[j]
            if i > 0:
                v *= 1.0 - pos[m - 1 - i]
        else:
            v = 1.0 + g
            for j in range(m - 1 - i):
                v *= math.cos(0.5 * math.pi * pos[j])
            if i > 0:
                v *= math.sin(0.5 * math.pi * pos[m - 1 - i])
        f.append(v)
    return f


def oracle_dtlz(pid: int, X, m: int) -> np.ndarray:
    return np.asarray([oracle_dtlz_row(pid, row, m) for row in _rows(X)]).reshape(-1, m)


def oracle_mlp_forward(flat, arch: MlpArch, obs) -> list[float]:
    o, h, a = arch.obs_dim, arch.hidden, arch.act_dim
    w = list(np.ravel(flat).tolist())
    W1 = [w[r * o : (r + 1) * o] for r in range(h)]
    b1 = w[o * h : o * h + h]
    base = o * h + h
    W2 = [w[base + r * h : base + (r + 1) * h] for r in range(a)]
    b2 = w[base + h * a : base + h * a + a]
    hidden = [math.tanh(_dot(W1[r], obs) + b1[r]) for r in range(h)]
    return [math.tanh(_dot(W2[r], hidden) + b2[r]) for r in range(a)]


def oracle_rollout_row(flat, spec: ToyEnvSpec, arch: MlpArch) -> list[float]:
    v, h = 0.0, spec.h_init
    fwd = hgt = ctl = 0.0
    for t in range(spec.horizon):
        ph = 2.0 * math.pi * t / spec.horizon
        a1, a2 = oracle_mlp_forward(flat, arch, [v, h, math.sin(ph), math.cos(ph)])
        v = spec.v_decay * v + spec.v_gain * a1
        h = _clip(spec.h_decay * h + spec.h_gain * a2, 0.0, spec.h_max)
        fwd += v
        hgt += 10.0 * (h - spec.h_init)
        ctl -= a1 * a1 + a2 * a2
    return [fwd, ctl] if spec.n_objectives == 2 else [fwd, hgt, ctl]


def oracle_evaluate(problem, X) -> np.ndarray:
    """Row-by-row evaluation of a :class:`ProblemInstance` in minimization form."""
    if "pid" in problem.meta:
        return oracle_dtlz(problem.meta["pid"], X, problem.m)
    spec, arch = problem.meta["spec"], problem.meta["arch"]
    rows = []
    for x in _rows(X):
        if all(math.isfinite(v) for v in x):
            rows.append([-r for r in oracle_rollout_row(x, spec, arch)])
        else:
            rows.append([1e9] * problem.m)
    return np.asarray(rows).reshape(-1, problem.m)


# ------------------------------------------------------------------ metrics


def oracle_igd(F, F_ref) -> float:
    F, R = _rows(F), _rows(F_ref)
    total = 0.0
    for r in R:
        best = INF
        for f in F:
            s = 0.0
            for a, b in zip(r, f):
                s += (a - b) * (a - b)
            best = min(best, math.sqrt(s))
        total += best
    return total / len(R)


def oracle_eu(F, W) -> float:
    F, W = _rows(F), _rows(W)
    total = 0.0
    for w in W:
        total += max(_dot(w, f) for f in F)
    return total / len(W)
