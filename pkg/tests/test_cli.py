import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

PY = [sys.executable, "-m", "placelink.cli"]


def run(args, **kw):
    return subprocess.run(PY + [str(a) for a in args], capture_output=True, text=True, **kw)


def run_pipeline(workdir: Path, seed=0, n=150):
    workdir.mkdir(parents=True, exist_ok=True)
    steps = [
        ["generate", "--out", workdir / "data", "--n-restaurants", n, "--seed", seed],
        ["block", "--restaurants", workdir / "data/restaurants.csv", "--pois", workdir / "data/pois.csv",
         "--out", workdir / "blocked.csv"],
        ["featurize", "--restaurants", workdir / "data/restaurants.csv", "--pois", workdir / "data/pois.csv",
         "--blocked", workdir / "blocked.csv", "--out", workdir / "pairs.csv"],
        ["bootstrap", "--pairs", workdir / "pairs.csv", "--truth", workdir / "data/truth.csv",
         "--out", workdir / "labeled.csv", "--initial-n", 200, "--round-n", 600, "--seed", seed],
        ["train", "--labeled", workdir / "labeled.csv", "--kind", "forest",
         "--out", workdir / "model.json", "--seed", seed],
        ["evaluate", "--labeled", workdir / "labeled.csv", "--model", workdir / "model.json",
         "--out", workdir / "metrics.csv", "--summary-out", workdir / "summary.txt"],
        ["matchrate", "--pairs", workdir / "pairs.csv", "--model", workdir / "model.json",
         "--restaurants", workdir / "data/restaurants.csv", "--pois", workdir / "data/pois.csv",
         "--out", workdir / "matches.csv"],
        ["importance", "--model", workdir / "model.json", "--out", workdir / "importances.csv"],
        ["histogram", "--pairs", workdir / "pairs.csv", "--out", workdir / "histograms.csv"],
    ]
    for step in steps:
        proc = run(step)
        assert proc.returncode == 0, f"{step[0]} failed:\n{proc.stdout}\n{proc.stderr}"
    return workdir


def artifact_snapshot(workdir: Path) -> dict:
    """Filename -> content, with run-metadata timestamps and argv removed."""
    snap = {}
    for path in sorted(workdir.rglob("*")):
        if not path.is_file():
            continue
        key = str(path.relative_to(workdir))
        if path.name.endswith(".meta.json"):
            doc = json.loads(path.read_text())
            doc.pop("ts", None)
            doc.pop("argv", None)
            snap[key] = json.dumps(doc, sort_keys=True)
        else:
            snap[key] = path.read_bytes()
    return snap


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("pipe"), seed=3)


class TestPipeline:
    def test_all_artifacts_exist(self, pipeline_dir):
        for name in ("data/restaurants.csv", "data/pois.csv", "data/truth.csv", "blocked.csv",
                     "pairs.csv", "labeled.csv", "model.json", "metrics.csv", "summary.txt",
                     "matches.csv", "importances.csv", "histograms.csv"):
            assert (pipeline_dir / name).exists(), name

    def test_metrics_row_sane(self, pipeline_dir):
        with open(pipeline_dir / "metrics.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert 0.5 <= float(rows[0]["accuracy"]) <= 1.0
        assert rows[0]["model_kind"] == "FOREST"

    def test_meta_written_beside_outputs(self, pipeline_dir):
        meta = json.loads((pipeline_dir / "pairs.csv.meta.json").read_text())
        assert meta["command"] == "featurize"
        assert "pairs.csv" in meta["outputs"]
        assert meta["kernel_backend"] in ("numba", "numpy")
        assert "config_hash" in meta

    def test_importances_file_shape(self, pipeline_dir):
        lines = (pipeline_dir / "importances.csv").read_text().strip().splitlines()
        assert lines[0] == "feature,importance"
        assert len(lines) == 5
        total = sum(float(l.split(",")[1]) for l in lines[1:])
        assert abs(total - 1.0) < 1e-6


class TestDeterminism:
    def test_rerun_byte_identical(self, tmp_path):
        a = run_pipeline(tmp_path / "a", seed=5, n=120)
        b = run_pipeline(tmp_path / "b", seed=5, n=120)
        snap_a, snap_b = artifact_snapshot(a), artifact_snapshot(b)
        assert snap_a.keys() == snap_b.keys()
        for key in snap_a:
            assert snap_a[key] == snap_b[key], f"artifact differs: {key}"

    def test_different_seed_differs(self, tmp_path, pipeline_dir):
        other = run_pipeline(tmp_path / "c", seed=6)
        assert (other / "pairs.csv").read_bytes() != (pipeline_dir / "pairs.csv").read_bytes()


class TestErrorPaths:
    def test_precision_out_of_range_is_config_error(self, pipeline_dir):
        proc = run(["block", "--restaurants", pipeline_dir / "data/restaurants.csv",
                    "--pois", pipeline_dir / "data/pois.csv",
                    "--out", pipeline_dir / "nope.csv", "--precision", "13"])
        assert proc.returncode == 2
        assert proc.stderr.startswith("error: ConfigError:")

    def test_missing_input_file(self, tmp_path):
        proc = run(["block", "--restaurants", tmp_path / "missing.csv",
                    "--pois", tmp_path / "missing2.csv", "--out", tmp_path / "out.csv"])
        assert proc.returncode == 3
        assert "does not exist" in proc.stderr

    def test_malformed_input_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,name,street,lat,lon\nx,name,,91,0\n")
        proc = run(["block", "--restaurants", bad, "--pois", bad, "--out", tmp_path / "out.csv"])
        assert proc.returncode == 4
        assert "error: LoadError:" in proc.stderr

    def test_unknown_config_section(self, tmp_path, pipeline_dir):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"wat": {}}')
        proc = run(["--config", cfg, "histogram", "--pairs", pipeline_dir / "pairs.csv",
                    "--out", tmp_path / "h.csv"])
        assert proc.returncode == 2


class TestExperimentCommand:
    def test_two_country_grid(self, tmp_path):
        for code, seed in (("ID", 21), ("SG", 22)):
            d = tmp_path / code
            d.mkdir()
            r = run(["generate", "--out", d, "--country", code, "--preset",
                     "--n-restaurants", 120, "--seed", seed])
            assert r.returncode == 0, r.stderr
            for step in (
                ["block", "--restaurants", d / "restaurants.csv", "--pois", d / "pois.csv",
                 "--out", d / "blocked.csv", "--country", code],
                ["featurize", "--restaurants", d / "restaurants.csv", "--pois", d / "pois.csv",
                 "--blocked", d / "blocked.csv", "--out", d / "pairs.csv", "--country", code],
                ["bootstrap", "--pairs", d / "pairs.csv", "--truth", d / "truth.csv",
                 "--out", d / "labeled.csv", "--initial-n", 150, "--round-n", 400, "--seed", seed],
            ):
                r = run(step)
                assert r.returncode == 0, r.stderr
        proc = run(["experiment", "--dataset", f"ID={tmp_path}/ID/labeled.csv",
                    "--dataset", f"SG={tmp_path}/SG/labeled.csv",
                    "--kinds", "tree,gbm", "--out", tmp_path / "grid.csv", "--seed", 1])
        assert proc.returncode == 0, proc.stderr
        with open(tmp_path / "grid.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 3 * 2
        regimes = {r["regime"] for r in rows}
        assert regimes == {"ID", "SG", "MERGED"}


class TestConfigFile:
    def test_config_defaults_respected(self, tmp_path, pipeline_dir):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"blocking": {"top_k": 2}}))
        proc = run(["--config", cfg, "featurize",
                    "--restaurants", pipeline_dir / "data/restaurants.csv",
                    "--pois", pipeline_dir / "data/pois.csv",
                    "--blocked", pipeline_dir / "blocked.csv",
                    "--out", tmp_path / "pairs_k2.csv"])
        assert proc.returncode == 0, proc.stderr
        with open(tmp_path / "pairs_k2.csv") as fh:
            rows = list(csv.DictReader(fh))
        counts = {}
        for row in rows:
            counts[row["restaurant_id"]] = counts.get(row["restaurant_id"], 0) + 1
        assert max(counts.values()) <= 2
