import json
import shutil
from pathlib import Path

import pytest

from phonoprep import cli
from phonoprep.analysis import synthetic_sets

from test_experiments import SMALL

DATA = Path(synthetic_sets.__file__).resolve().parents[1] / "data" / "synthetic"


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def manifest(out):
    return json.loads((Path(out) / "manifest.json").read_text())


def test_sweep_writes_artifacts_and_manifest(tmp_path, small_cfg, capsys):
    out = tmp_path / "run"
    assert cli.main(["sweep", str(small_cfg), "--out", str(out)]) == cli.EXIT_OK
    m = manifest(out)
    assert m["status"] == "ok" and m["exit_code"] == 0 and m["subcommand"] == "sweep"
    names = {o["path"] for o in m["outputs"]}
    assert {"population_map.csv", "diagnostics.csv"} <= names
    assert m["inputs"][0]["path"] == str(small_cfg) and len(m["config_fingerprint"]) == 64
    assert json.loads(capsys.readouterr().out)["invalid_cells"] == 0


def test_sweep_artifacts_are_byte_identical(tmp_path, small_cfg):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert cli.main(["sweep", str(small_cfg), "--out", str(out), "--area-pi", "2,2,1"]) == 0
    for name in ("population_map.csv", "diagnostics.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    hashes = [{o["path"]: o["sha256"] for o in manifest(out)["outputs"]} for out in outs]
    assert hashes[0] == hashes[1]


def test_grid_override(tmp_path, small_cfg):
    out = tmp_path / "o"
    assert cli.main(["sweep", str(small_cfg), "--out", str(out), "--detuning-nm", "-0.5,0,2", "--area-pi", "1,1,1"]) == 0
    rows = (out / "population_map.csv").read_text().splitlines()
    assert len(rows) == 4 and len(rows[-1].split(",")) == 3


def test_missing_config_exits_2_with_manifest(tmp_path):
    out = tmp_path / "fail"
    code = cli.main(["sweep", str(tmp_path / "absent.cfg"), "--out", str(out)])
    assert code == cli.EXIT_CONFIG
    m = manifest(out)
    assert m["status"] == "failed" and m["exit_code"] == 2 and m["error"]["type"] == "ConfigError"


def test_usage_errors_exit_2(tmp_path, small_cfg):
    assert cli.main(["sweep"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", str(small_cfg), "--preset", "fig3c_la_only"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", str(small_cfg), "--area-pi", "1,2"]) == cli.EXIT_CONFIG
    assert cli.main(["bogus"]) == cli.EXIT_CONFIG


def test_missing_data_exits_3(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["fit", "trpl", str(tmp_path / "none.csv"), "--out", str(out)]) == cli.EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nx,3\n")
    assert cli.main(["fit", "trpl", str(bad), "--out", str(out)]) == cli.EXIT_DATA
    assert manifest(out)["error"]["type"] == "DataError"


def test_manifest_falls_back_to_environment_directory(monkeypatch, tmp_path):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["sweep"]) == cli.EXIT_CONFIG
    assert manifest(tmp_path / "env")["status"] == "failed"


def test_budget_exits_5(tmp_path, small_cfg):
    out = tmp_path / "b"
    assert cli.main(["sweep", str(small_cfg), "--out", str(out), "--budget", "1e-9"]) == cli.EXIT_BUDGET
    m = manifest(out)
    assert m["error"]["type"] == "BudgetExceeded" and m["exit_code"] == 5


def test_failed_sweep_exits_4_and_keeps_partial_map(tmp_path, small_cfg):
    text = small_cfg.read_text().replace("[solver]", "[solver]\ninvariant_tol = 1e-300")
    small_cfg.write_text(text)
    out = tmp_path / "s"
    assert cli.main(["sweep", str(small_cfg), "--out", str(out)]) == cli.EXIT_SOLVER
    assert (out / "diagnostics.csv").exists()
    assert manifest(out)["error"]["type"] == "SweepFailed"


def test_output_directory_precedence(tmp_path, small_cfg, monkeypatch):
    env_dir = tmp_path / "from-env"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(env_dir))
    explicit = tmp_path / "explicit"
    assert cli.main(["env", str(small_cfg), "--out", str(explicit)]) == 0
    assert (explicit / "environment.json").exists() and not env_dir.exists()
    assert cli.main(["env", str(small_cfg)]) == 0
    assert (env_dir / "environment.json").exists()
    monkeypatch.delenv(cli.OUTPUT_ENV)
    monkeypatch.chdir(tmp_path)
    assert cli.main(["env", str(small_cfg)]) == 0
    assert (tmp_path / "phonoprep-out" / "small_env" / "environment.json").exists()


def test_env_preset(tmp_path, capsys):
    out = tmp_path / "e"
    assert cli.main(["env", "--preset", "compressed", "--out", str(out)]) == 0
    report = json.loads((out / "environment.json").read_text())
    assert [r["mode"] for r in report["modes"]] == ["LA", "SM1", "SM2", "BM"]
    assert "total S" in capsys.readouterr().out


def test_propagate(tmp_path, small_cfg):
    out = tmp_path / "p"
    assert cli.main(["propagate", str(small_cfg), "--detuning", "-0.5", "--area-pi", "4", "--out", str(out)]) == 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0].startswith("t_ps,") and len(rows) == 61 + 1
    assert 0 <= manifest(out)["summary"]["final_population"] <= 1


@pytest.mark.parametrize("kind, name", [("spectrum", "spectrum.csv"), ("trpl", "trpl.csv"), ("g2", "g2.csv"),
                                        ("diffusion", "frames.csv")])
def test_fit_bundled_sets(tmp_path, kind, name):
    out = tmp_path / kind
    assert cli.main(["fit", kind, str(DATA / kind / name), "--out", str(out)]) == 0
    record = json.loads((out / f"fit_{kind}.json").read_text())
    assert record and manifest(out)["inputs"][0]["sha256"]


def test_gen_synthetic_reproduces_bundled_set(tmp_path):
    out = tmp_path / "g"
    assert cli.main(["gen-synthetic", "trpl", "--out", str(out)]) == 0
    for p in (DATA / "trpl").iterdir():
        assert (out / p.name).read_bytes() == p.read_bytes()
    assert cli.main(["gen-synthetic", "trpl", "--seed", "5", "--out", str(tmp_path / "h")]) == 0
    assert (tmp_path / "h" / "trpl.csv").read_bytes() != (DATA / "trpl" / "trpl.csv").read_bytes()


def test_version(capsys):
    assert cli.main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("phonoprep ")


def test_console_script_installed():
    assert shutil.which("phonoprep") is not None
