import json
import os
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from tensorrvea import selection
from tensorrvea.cli import main
from tensorrvea.config import ConfigError, build_config, load_file
from tensorrvea.experiments import CSV_SCHEMAS, read_csv, summary_schema

BENCH = ["bench", "--reps", "2", "--gens", "4", "--pop", "15", "--lattice-h", "4", "--problem", "dtlz1,dtlz2"]
NEURO_TOML = 'family = "neuro"\nhorizon = 8\npop = 12\ngens = 3\nreps = 2\nhv_samples = 500\nlattice_h = 4\n'
OPS_TOML = 'family = "ops"\nhorizon = 8\npop = 12\ngens = 3\nreps = 2\nhv_samples = 500\nlattice_h = 4\n'


def _run(argv, out):
    return main([*argv, "--out", str(out)])


def _config(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _preamble(path):
    with open(path) as fh:
        return [line for line in fh if line.startswith("#")]


# ------------------------------------------------------------ config errors


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = _config(tmp_path, 'family = "bench"\npopulation = 10\n')
    assert _run(["bench", "--config", cfg], tmp_path / "o") == 2
    assert "population" in capsys.readouterr().err


def test_family_mismatch_exits_2(tmp_path, capsys):
    cfg = _config(tmp_path, 'family = "ops"\n')
    assert _run(["bench", "--config", cfg], tmp_path / "o") == 2
    assert "family" in capsys.readouterr().err


def test_malformed_toml_and_bad_values_exit_2(tmp_path):
    assert _run(["bench", "--config", _config(tmp_path, "pop = [")], tmp_path / "o") == 2
    assert _run(["bench", "--operator", "bogus"], tmp_path / "o") == 2
    assert _run(["bench", "--config", str(tmp_path / "missing.toml")], tmp_path / "o") == 2


@pytest.mark.skipif(os.geteuid() == 0, reason="root can write anywhere")
def test_unwritable_output_exits_2(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir(mode=0o500)
    assert _run(BENCH, locked / "out") == 2


def test_output_path_that_is_a_file_exits_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run(BENCH, blocker / "out") == 2
    assert "not writable" in capsys.readouterr().err


def test_config_precedence():
    cfg = build_config("bench", {"pop": 20, "gens": 7}, {"pop": 30, "gens": None})
    assert (cfg.pop, cfg.gens) == (30, 7)
    assert build_config("neuro").pop == 512
    with pytest.raises(ConfigError):
        build_config("bench", {"problems": 3})


# ------------------------------------------------------------------ bench


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    assert _run(BENCH, out) == 0
    return out


def test_bench_rows_cover_every_run_and_generation(bench_dir):
    rows = read_csv(bench_dir / "bench.csv")
    assert list(rows[0]) == CSV_SCHEMAS["bench"]
    assert len(rows) == 3 * 2 * 2 * 4
    assert {r["algorithm"] for r in rows} == {"tensor_rvea", "nsga2", "random"}
    assert sorted({int(r["t"]) for r in rows}) == [1, 2, 3, 4]


def test_bench_preamble_carries_version_seed_and_config(bench_dir):
    pre = _preamble(bench_dir / "bench.csv")
    assert pre[0].startswith("# artifact_version=") and pre[1] == "# seed=0\n"
    cfg = json.loads(pre[2][len("# config="):])
    assert cfg["pop"] == 15 and cfg["problems"] == ["dtlz1", "dtlz2"]
    assert "out" not in cfg and "lanes" not in cfg


def test_bench_summary_recomputes_from_csv(bench_dir):
    doc = json.loads((bench_dir / "summary.json").read_text())
    jsonschema.validate(doc, summary_schema())
    rows = read_csv(bench_dir / "bench.csv")
    for entry in doc["results"]:
        g = entry["group"]
        finals = [float(r[entry["metric"]]) for r in rows
                  if r["algorithm"] == g["algorithm"] and r["problem"] == g["problem"] and r["t"] == "4"]
        assert entry["runs"] == len(finals) == 2
        assert entry["median"] == float(np.median(finals))


def test_bench_timing_is_separate(bench_dir):
    timing = read_csv(bench_dir / "timing.csv")
    assert len(timing) == len(read_csv(bench_dir / "bench.csv"))
    assert "elapsed_ms" not in CSV_SCHEMAS["bench"]


def test_bench_is_byte_identical_across_repeats_and_lanes(bench_dir, tmp_path):
    assert _run(BENCH, tmp_path / "a") == 0
    assert _run([*BENCH, "--lanes", "3"], tmp_path / "b") == 0
    for name in ("bench.csv", "summary.json"):
        ref = (bench_dir / name).read_bytes()
        assert (tmp_path / "a" / name).read_bytes() == ref
        assert (tmp_path / "b" / name).read_bytes() == ref


def test_bench_seed_changes_output(bench_dir, tmp_path):
    assert _run([*BENCH, "--seed", "1"], tmp_path / "s") == 0
    assert (tmp_path / "s" / "bench.csv").read_bytes() != (bench_dir / "bench.csv").read_bytes()


# ----------------------------------------------------------- neuro / ops


@pytest.mark.parametrize("family,text", [("neuro", NEURO_TOML), ("ops", OPS_TOML)])
def test_control_families_are_reproducible(tmp_path, family, text):
    cfg = _config(tmp_path, text)
    assert _run([family, "--config", cfg], tmp_path / "a") == 0
    assert _run([family, "--config", cfg, "--lanes", "3"], tmp_path / "b") == 0
    for name in (f"{family}.csv", f"{family}_archive.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_csv(tmp_path / "a" / f"{family}.csv")
    variants = 3 if family == "neuro" else 5
    assert len(rows) == variants * 2 * 2 * 3
    assert all(np.isfinite(float(r["hv"])) and np.isfinite(float(r["eu"])) for r in rows)
    jsonschema.validate(json.loads((tmp_path / "a" / "summary.json").read_text()), summary_schema())


def test_ops_operator_flag_runs_one_operator(tmp_path):
    assert _run(["ops", "--config", _config(tmp_path, OPS_TOML), "--operator", "de", "--problem", "toy2"], tmp_path / "o") == 0
    assert {r["operator"] for r in read_csv(tmp_path / "o" / "ops.csv")} == {"de"}


def test_bench_rejects_control_tasks(tmp_path):
    assert _run(["bench", "--problem", "toy2", "--gens", "1", "--reps", "1"], tmp_path / "o") == 2


# ------------------------------------------------------------------ scale


def test_scale_single_points(tmp_path):
    argv = ["scale", "--pop", "32", "--dim", "16", "--gens", "3"]
    assert _run(argv, tmp_path / "s") == 0
    rows = read_csv(tmp_path / "s" / "scale.csv")
    assert [(r["series"], r["n"], r["d"]) for r in rows] == [("population", "32", "100"), ("dimension", "100", "16")]
    for r in rows:
        assert r["status"] == "ok"
        assert float(r["speedup"]) == float(r["oracle_ms"]) / float(r["tensor_ms"])


def test_scale_records_skipped_points(tmp_path, monkeypatch):
    from tensorrvea import experiments

    def no_memory(n, d, cfg):
        raise MemoryError

    monkeypatch.setattr(experiments, "scale_point", no_memory)
    assert _run(["scale", "--pop", "32", "--dim", "16", "--gens", "2"], tmp_path / "s") == 0
    rows = read_csv(tmp_path / "s" / "scale.csv")
    assert all(r["status"] == "skipped" and r["speedup"] == "" for r in rows)


# ----------------------------------------------------------------- verify


def test_verify_passes_and_reports_counts(tmp_path, capsys):
    assert _run(["verify"], tmp_path / "v") == 0
    out = capsys.readouterr().out
    assert "rv_select   200 instances checked, 0 failed  PASS" in out
    rows = read_csv(tmp_path / "v" / "verify.csv")
    assert {r["status"] for r in rows} == {"pass"}
    assert not (tmp_path / "v" / "verify_failures.json").exists()


def test_verify_detects_broken_tie_break(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(selection, "_LOWEST_INDEX_TIES", False)
    assert _run(["verify"], tmp_path / "v") == 1
    failures = json.loads((tmp_path / "v" / "verify_failures.json").read_text())
    assert set(failures) == {"rv_select"}
    assert "instance" in failures["rv_select"][0]
    assert "FAIL" in capsys.readouterr().out


def test_module_entry_point_prints_help():
    res = subprocess.run([sys.executable, "-m", "tensorrvea", "--help"], capture_output=True, text=True, check=True)
    for family in ("bench", "scale", "neuro", "ops", "verify"):
        assert family in res.stdout


@pytest.mark.parametrize("path", sorted(Path(__file__).resolve().parents[1].glob("configs/*.toml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    values = load_file(str(path))
    assert build_config(values["family"], values).family == values["family"]
