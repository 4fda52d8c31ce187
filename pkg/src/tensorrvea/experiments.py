"""Experiment families behind the CLI: bench, scale, neuro, ops and verify.

Output contract
---------------
Every CSV starts with ``#``-prefixed preamble lines carrying the artifact
version, the seed and the full effective config (JSON), followed by a header
row. Floats are written with ``repr`` (shortest round-trip form), so files are
byte-identical for identical config and seed, independent of the lane count.
Wall-clock measurements never enter those files: they go to ``timing.csv``
and the ``scale`` family's table, which are excluded from byte-identity.

``summary.json`` is validated against the bundled ``summary_schema.json``.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import tensor_ops as T
from .algorithms import ALGORITHMS, RunConfig, RunRecord, rvea_steps
from .config import ExperimentConfig
from .metrics import MetricContext, pooled_reference, utility_weights
from .problems import dtlz_pf_reference, make_problem
from .verify import run_all

log = logging.getLogger(__name__)

CSV_SCHEMAS = {
    "bench": ["run_id", "algorithm", "problem", "seed", "t", "evals", "igd", "hv"],
    "neuro": ["run_id", "algorithm", "env", "seed", "t", "evals", "archive_size", "hv", "eu"],
    "ops": ["run_id", "operator", "env", "seed", "t", "evals", "archive_size", "hv", "eu"],
    "archive": ["run_id", "env", "seed", "f1", "f2", "f3"],
    "timing": ["run_id", "t", "elapsed_ms"],
    "scale": ["series", "n", "d", "m", "gens", "tensor_ms", "oracle_ms", "speedup", "status"],
    "verify": ["suite", "checked", "failures", "status"],
}


# ------------------------------------------------------------------ output


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def preamble(cfg: ExperimentConfig) -> list[str]:
    return [
        f"# artifact_version={__version__}",
        f"# seed={cfg.seed}",
        "# config=" + json.dumps(cfg.as_dict(), sort_keys=True),
    ]


def write_csv(path: Path, cfg: ExperimentConfig, schema: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in preamble(cfg):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_SCHEMAS[schema])
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    """Rows of an artifact CSV as dicts of strings (preamble skipped)."""
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def summary_schema() -> dict:
    return json.loads(resources.files("tensorrvea").joinpath("summary_schema.json").read_text(encoding="utf-8"))


def _stats(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"runs": int(v.size), "median": float(med), "q1": float(q1), "q3": float(q3), "iqr": float(q3 - q1)}


def summarize(final: dict[tuple, dict[str, list[float]]], keys: tuple[str, ...]) -> list[dict]:
    """``final`` maps a group tuple to metric -> list of final values."""
    out = []
    for group in sorted(final):
        for metric in sorted(final[group]):
            out.append({"group": dict(zip(keys, group)), "metric": metric, **_stats(final[group][metric])})
    return out


def write_summary(path: Path, cfg: ExperimentConfig, results: list[dict]) -> dict:
    doc = {
        "artifact_version": __version__,
        "family": cfg.family,
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "results": results,
    }
    jsonschema.validate(doc, summary_schema())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def prepare_out(out: str | os.PathLike) -> Path:
    """Create ``out`` and prove it is writable before any run starts."""
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {str(path)!r} is not writable: {exc}") from exc
    return path


# ----------------------------------------------------------------- helpers


def _run_config(cfg: ExperimentConfig, problem: str, m: int, seed: int, **kw) -> RunConfig:
    base = dict(
        problem=problem,
        operator=cfg.operator,
        n=cfg.pop,
        H=cfg.lattice_for(m),
        t_max=cfg.gens,
        alpha=cfg.alpha,
        fr=cfg.fr,
        seed=seed,
        m=m,
        d=cfg.dim,
        horizon=cfg.horizon,
        budget_s=cfg.budget_s,
        archive_cap=cfg.archive_cap,
    )
    base.update(kw)
    return RunConfig(**base)


def _run(algorithm: str, rc: RunConfig, ctx=None) -> RunRecord:
    fn = ALGORITHMS[algorithm]
    return fn(rc, metric_ctx=ctx)


def _timing_rows(run_id: str, rec: RunRecord):
    return [(run_id, r.t, r.elapsed_ms) for r in rec.rows]


# ------------------------------------------------------------------ bench


def cmd_bench(cfg: ExperimentConfig, out: Path) -> dict:
    """All algorithms on DTLZ problems; IGD and normalized HV of the population."""
    rows, timing = [], []
    final: dict[tuple, dict[str, list[float]]] = {}
    for problem in cfg.problems:
        prob = make_problem(problem, m=cfg.m, d=cfg.dim)
        if "pid" not in prob.meta:
            raise ValueError(f"bench runs DTLZ problems only, got {problem!r}")
        ref_h = cfg.igd_ref_h or cfg.lattice_for(cfg.m)
        ctx = MetricContext(
            reference_front=dtlz_pf_reference(prob.meta["pid"], cfg.m, ref_h),
            reference_point=np.ones(cfg.m),
            hv_samples=cfg.hv_samples,
            hv_seed=cfg.seed,
            hv_scale=prob.pf_extent,
        )
        for algorithm in cfg.algorithms:
            for rep in range(cfg.reps):
                seed = cfg.seed + rep
                run_id = f"{algorithm}-{problem}-{seed}"
                rc = _run_config(cfg, problem, cfg.m, seed, metrics=("igd", "hv"))
                rec = _run(algorithm, rc, ctx)
                for r in rec.rows:
                    rows.append((run_id, algorithm, problem, seed, r.t, r.evals, r.metrics["igd"], r.metrics["hv"]))
                timing += _timing_rows(run_id, rec)
                last = rec.rows[-1].metrics
                for metric in ("igd", "hv"):
                    final.setdefault((algorithm, problem), {}).setdefault(metric, []).append(last[metric])
                log.info("bench %s done: igd=%.4g", run_id, last["igd"])
    write_csv(out / "bench.csv", cfg, "bench", rows)
    write_csv(out / "timing.csv", cfg, "timing", timing)
    return write_summary(out / "summary.json", cfg, summarize(final, ("algorithm", "problem")))


# ------------------------------------------------------------ neuro / ops


def _control_family(cfg: ExperimentConfig, out: Path, variants: list[tuple[str, str, str]], schema: str) -> dict:
    """Shared driver for neuro and ops.

    ``variants`` lists ``(label, algorithm, operator)``. Metrics are computed
    after all runs of an environment finish, because the HV reference point
    (pooled minimum of final archive returns, floored at zero for forward and
    height) and the sampling box (pooled maximum) need every run.
    """
    rows, timing, archive_rows = [], [], []
    final: dict[tuple, dict[str, list[float]]] = {}
    for env in cfg.problems:
        prob = make_problem(env, horizon=cfg.horizon)
        if not prob.maximize_returns:
            raise ValueError(f"{cfg.family} runs control tasks only, got {env!r}")
        recs = []
        for label, algorithm, operator in variants:
            for rep in range(cfg.reps):
                seed = cfg.seed + rep
                rc = _run_config(cfg, env, prob.m, seed, operator=operator, d=None, keep_history=True)
                rec = _run(algorithm, rc)
                recs.append((f"{label}-{env}-{seed}", label, seed, rec))
                log.info("%s %s-%s-%d done", cfg.family, label, env, seed)
        finals = [prob.returns(rec.archive_F) for *_, rec in recs]
        ctx = MetricContext(
            reference_point=pooled_reference(finals, prob.floor_zero),
            weights=utility_weights(prob.m),
            maximize=True,
            hv_samples=cfg.hv_samples,
            hv_seed=cfg.seed,
            hv_bounds=np.vstack(finals).max(axis=0),
        )
        for run_id, label, seed, rec in recs:
            for r, F in zip(rec.rows, rec.history[1:]):
                vals = ctx.compute(("hv", "eu"), prob.returns(F))
                rows.append((run_id, label, env, seed, r.t, r.evals, F.shape[0], vals["hv"], vals["eu"]))
            for metric in ("hv", "eu"):
                final.setdefault((label, env), {}).setdefault(metric, []).append(vals[metric])
            timing += _timing_rows(run_id, rec)
            for f in prob.returns(rec.archive_F):
                archive_rows.append((run_id, env, seed, *f, *[""] * (3 - f.size)))
    write_csv(out / f"{schema}.csv", cfg, schema, rows)
    write_csv(out / f"{schema}_archive.csv", cfg, "archive", archive_rows)
    write_csv(out / "timing.csv", cfg, "timing", timing)
    keys = ("algorithm" if schema == "neuro" else "operator", "env")
    return write_summary(out / "summary.json", cfg, summarize(final, keys))


def cmd_neuro(cfg: ExperimentConfig, out: Path) -> dict:
    """TensorRVEA, NSGA-II and random search on the toy control tasks."""
    return _control_family(cfg, out, [(a, a, cfg.operator) for a in cfg.algorithms], "neuro")


def cmd_ops(cfg: ExperimentConfig, out: Path) -> dict:
    """TensorRVEA with each reproduction operator on the toy control tasks."""
    return _control_family(cfg, out, [(op, "tensor_rvea", op) for op in cfg.operators], "ops")


# ------------------------------------------------------------------ scale


def scale_point(n: int, d: int, cfg: ExperimentConfig) -> tuple[float, float]:
    """Median per-generation milliseconds of the tensor and scalar-oracle pipelines.

    The two runs advance in lockstep, one generation each in turn, so slow
    phases of a shared host hit both medians alike.
    """
    rc = RunConfig(problem="dtlz1", n=n, d=d, m=cfg.m, H=cfg.lattice_for(cfg.m), t_max=cfg.gens, seed=cfg.seed,
                   alpha=cfg.alpha, fr=cfg.fr, operator=cfg.operator)
    tensor, oracle = rvea_steps(rc), rvea_steps(rc, backend="oracle")
    next(tensor)
    with T.lanes(1):
        next(oracle)
    tensor_s, oracle_s = [], []
    for _ in range(cfg.gens):
        t0 = time.perf_counter()
        next(tensor)
        t1 = time.perf_counter()
        with T.lanes(1):
            next(oracle)
        tensor_s.append(t1 - t0)
        oracle_s.append(time.perf_counter() - t1)
    return 1000.0 * float(np.median(tensor_s)), 1000.0 * float(np.median(oracle_s))


def cmd_scale(cfg: ExperimentConfig, out: Path) -> dict:
    """Per-generation wall time of the tensor and scalar-oracle pipelines on DTLZ1."""
    points = [("population", n, cfg.scale_dim) for n in cfg.pop_sizes]
    points += [("dimension", cfg.scale_pop, d) for d in cfg.dims]
    rows, final = [], {}
    for series, n, d in points:
        try:
            tensor_ms, oracle_ms = scale_point(n, d, cfg)
        except MemoryError:
            log.warning("scale point n=%d d=%d skipped: out of memory", n, d)
            rows.append((series, n, d, cfg.m, cfg.gens, "", "", "", "skipped"))
            continue
        speedup = oracle_ms / tensor_ms
        rows.append((series, n, d, cfg.m, cfg.gens, tensor_ms, oracle_ms, speedup, "ok"))
        final[(series, str(n), str(d))] = {"speedup": [speedup], "tensor_ms": [tensor_ms], "oracle_ms": [oracle_ms]}
        log.info("scale %s n=%d d=%d: %.2f ms vs %.2f ms (x%.1f)", series, n, d, tensor_ms, oracle_ms, speedup)
    write_csv(out / "scale.csv", cfg, "scale", rows)
    return write_summary(out / "summary.json", cfg, summarize(final, ("series", "n", "d")))


# ----------------------------------------------------------------- verify


def cmd_verify(cfg: ExperimentConfig, out: Path) -> tuple[dict, bool]:
    """Oracle-equivalence suites; failing instances go to ``verify_failures.json``."""
    suites = run_all()
    rows = [(s.name, s.checked, len(s.failures), "pass" if s.passed else "fail") for s in suites]
    write_csv(out / "verify.csv", cfg, "verify", rows)
    failures = {s.name: s.failures for s in suites if s.failures}
    fail_path = out / "verify_failures.json"
    if failures:
        with open(fail_path, "w", encoding="utf-8") as fh:
            json.dump(failures, fh, indent=1, sort_keys=True)
    elif fail_path.exists():
        fail_path.unlink()
    final = {(s.name,): {"failures": [float(len(s.failures))]} for s in suites}
    doc = write_summary(out / "summary.json", cfg, summarize(final, ("suite",)))
    return doc, not failures


COMMANDS = {"bench": cmd_bench, "scale": cmd_scale, "neuro": cmd_neuro, "ops": cmd_ops, "verify": cmd_verify}
