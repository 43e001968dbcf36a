import csv
import json
import shutil
import subprocess
import sys

import pytest

from firesat.cli import main
from firesat.constellation import WalkerChromosome, expand
from firesat.coverage import CoverageEvaluator, RegionConfig, build_grid
from firesat.errors import FixtureMissing
from firesat.replay import fixture_dir, load_fixtures

SQUARE = {"name": "square", "spacing_km": 100.0,
          "area_of_interest": [[-30, 140], [-30, 150], [-20, 150], [-20, 140]]}
TOY = WalkerChromosome(7000.0, 0.0, 35.0, 3, 1, 1)


@pytest.fixture
def inputs(tmp_path):
    (tmp_path / "region.json").write_text(json.dumps(SQUARE))
    (tmp_path / "toy.json").write_text(TOY.to_json())
    return tmp_path


def manifest(out):
    return json.loads((out / "run_manifest.json").read_text())


def test_evaluate_matches_library(inputs):
    out = inputs / "out"
    code = main(["evaluate", "--chromosome", str(inputs / "toy.json"), "--region", str(inputs / "region.json"),
                 "--dt", "300", "--out-dir", str(out)])
    assert code == 0
    ev = CoverageEvaluator(build_grid(RegionConfig.from_dict(SQUARE)), dt=300.0)
    assert (out / "coverage.json").read_text() == ev.evaluate(expand(TOY)).to_json() + "\n"
    m = manifest(out)
    assert m["status"] == "success" and m["seed"] == 0
    assert {"config_hash", "wall_time_s", "outputs"} <= set(m)
    assert list(csv.reader((out / "hourly_visible.csv").open()))[0] == ["hour", "mean_visible_satellites"]


def test_evaluate_ground_tracks(inputs):
    out = inputs / "out"
    assert main(["evaluate", "--chromosome", str(inputs / "toy.json"), "--region", str(inputs / "region.json"),
                 "--dt", "600", "--track-sats", "2", "--track-dt", "3600", "--out-dir", str(out)]) == 0
    rows = list(csv.DictReader((out / "ground_track.csv").open()))
    assert len(rows) == 2 * 25


def test_detect_bundled_scene(tmp_path, capsys):
    assert main(["detect", "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "fire_report.json").read_text())
    assert report["n_fire"] == 10
    rows = list(csv.DictReader((tmp_path / "fire_pixels.csv").open()))
    assert len(rows) == 10 and {r["class"] for r in rows} == {"FireDay"}
    spec = json.loads((fixture_dir() / "synthetic_scene_spec.json").read_text())
    lat0, dlat, lon0, dlon = spec["geotransform"]
    fires = [p for p in spec["pixels"] if p["class"] == "FireDay"]
    planted = sorted((lat0 + p["row"] * dlat, lon0 + p["col"] * dlon) for p in fires)
    found = sorted((float(r["lat"]), float(r["lon"])) for r in rows)
    assert found == pytest.approx(planted)
    assert "10 fire pixels" in capsys.readouterr().out


def test_optimize_deterministic(inputs):
    cfg = {"seed": 3, "dt": 1800, "region": "region.json",
           "ga": {"bounds": {"planes": [1, 3], "per_plane": [1, 3]}}}
    (inputs / "cfg.json").write_text(json.dumps(cfg))
    outs = []
    for k in range(2):
        out = inputs / f"run{k}"
        assert main(["optimize", "--config", str(inputs / "cfg.json"), "--population", "6",
                     "--generations", "2", "--out-dir", str(out)]) == 0
        outs.append(out)
    assert (outs[0] / "best_chromosome.json").read_bytes() == (outs[1] / "best_chromosome.json").read_bytes()
    assert (outs[0] / "archive.json").read_bytes() == (outs[1] / "archive.json").read_bytes()
    assert manifest(outs[0])["seed"] == 3


def test_latency_sweep(tmp_path):
    target = tmp_path / "sweep.csv"
    assert main(["latency-sweep", "--nodes", "1..100", "--out", str(target), "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(target.open()))
    assert len(rows) == 100
    assert float(rows[34]["total"]) == pytest.approx(1.39, abs=0.02)
    assert json.loads(target.with_suffix(".json").read_text())["plateau_n"] == 35


def test_latency_sweep_budget_file(tmp_path):
    (tmp_path / "b.json").write_text(json.dumps({"clock_rate_hz": 400e6}))
    assert main(["latency-sweep", "--nodes", "1..5", "--budget", str(tmp_path / "b.json"),
                 "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert float(rows[0]["t8"]) == pytest.approx(241878560 / 400e6)


def test_propagate_and_expand(tmp_path):
    assert main(["expand", "--out-dir", str(tmp_path)]) == 0
    assert manifest(tmp_path)["n_sats"] == 3990
    assert main(["propagate", "--sat", "131", "--duration", "600", "--dt", "300", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "propagation.csv").open()))
    assert [float(rows[1][k]) for k in ("x_eci", "y_eci", "z_eci")] == pytest.approx(
        [3992.528582679375, -4263.16791238027, 3966.140066336774], abs=1e-6)


def test_replay_schema(tmp_path):
    assert main(["replay-paper", "--dt", "600", "--subsample", "10", "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "replay.json").read_text())
    for entry in report["entries"].values():
        assert {"paper_value", "computed_value", "relative_error", "comparison"} <= set(entry)
    assert report["entries"]["swath_km"]["relative_error"] < 1e-3
    assert report["entries"]["n_sats"]["computed_value"] == 3990


def test_tampered_fixture(tmp_path, capsys):
    fixtures = tmp_path / "fx"
    shutil.copytree(fixture_dir(), fixtures)
    (fixtures / "australia_region.json").unlink()
    with pytest.raises(FixtureMissing, match="australia_region.json"):
        load_fixtures(fixtures)
    out = tmp_path / "out"
    assert main(["replay-paper", "--fixtures", str(fixtures), "--out-dir", str(out)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    payload = json.loads(err[0])
    assert payload["error"] == "FixtureMissing" and "australia_region.json" in payload["message"]
    assert manifest(out)["status"] == "failure"


def test_missing_config_path(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"region": "nope.json"}))
    assert main(["expand", "--config", str(tmp_path / "cfg.json"), "--out-dir", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "CliError"


def test_locked_output_dir(tmp_path, capsys):
    (tmp_path / ".firesat.lock").write_text("1")
    assert main(["expand", "--out-dir", str(tmp_path)]) == 2
    assert "locked" in json.loads(capsys.readouterr().err)["message"]


def test_phasing_override_flag(tmp_path, capsys):
    chrom = tmp_path / "c.json"
    chrom.write_text(WalkerChromosome(7334.9, 0.04, 141.39, 95, 9, 42).to_json())
    assert main(["expand", "--chromosome", str(chrom), "--out-dir", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "BoundViolation"
    assert main(["expand", "--chromosome", str(chrom), "--allow-phasing-override", "--out-dir", str(tmp_path)]) == 0


def test_console_script_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "firesat.cli", "latency-sweep", "--nodes", "1..3",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["plateau_method"] == "marginal"
