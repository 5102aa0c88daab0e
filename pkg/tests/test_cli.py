import json

import pytest

from fiducial.cli import main


def run(tmp_path, *argv):
    return main([str(a) for a in argv])


@pytest.fixture
def data_file(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("-0.5\n-0.2\n0\n0.3\n0.6\n")
    return path


def test_density_writes_output_and_manifest(tmp_path, data_file):
    out = tmp_path / "r.csv"
    assert main(["density", "--model", "normal-ls", "--data", str(data_file), "--grid", "80x80",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "mu,sigma,density"
    assert len(lines) == 1 + 80 * 80
    man = json.loads((tmp_path / "r.csv.manifest.json").read_text())
    assert man["subcommand"] == "density"
    assert man["config"]["model"] == {"name": "normal-ls", "n": 5}
    assert set(man["outputs"]) == {"r.csv"}


def test_sample_rerun_from_manifest_is_byte_identical(tmp_path, data_file):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["sample", "--model", "normal-ls", "--data", str(data_file), "--eps", "0.4", "--n-draws", "300",
                 "--seed", "9", "--workers", "2", "--out", str(a)]) == 0
    assert main(["sample", "--config", str(tmp_path / "a.csv.manifest.json"), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.csv.manifest.json").read_text())
    assert ma["config"] == mb["config"]
    assert list(ma["outputs"].values()) == list(mb["outputs"].values())


def test_slp_demo_csv(tmp_path):
    out = tmp_path / "slp.csv"
    assert main(["slp-demo", "--n", "5", "--grid", "200", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "model,p,H_lower,H_half,H_upper"
    assert len(lines) == 401
    summary = json.loads((tmp_path / "slp.csv.summary.json").read_text())
    assert summary["upper_bounds_coincide"]


def test_slp_pair_json(tmp_path, capsys):
    assert main(["slp-pair", "--theta", "0,1", "--reps", "2000", "--seed", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["theta"] == [0.0, 1.0]
    assert rep["verdict"] in ("SLP-pair", "not-SLP-pair", "inconclusive")


def test_bounds_and_fisher(tmp_path, capsys):
    assert main(["bounds", "--model", "geometric", "--data", "3", "--level", "0.9", "--format", "json"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["direction"] == "increasing"
    assert obj["interval"]["lo"] < obj["interval"]["hi"]
    assert main(["fisher", "--x", "0.5", "--format", "json"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["summary"]["sup_norm"] < 1e-5


def test_wcp_and_coverage(tmp_path, capsys):
    assert main(["wcp-demo", "--seed", "2", "--n-draws", "2000", "--m", "2"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["summary"]["ks_conditional"] < 0.05
    assert main(["coverage", "--model", "location", "--xi-true", "0", "--reps", "100", "--seed", "3"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj[0]["reps"] == 100


@pytest.mark.parametrize("argv", [
    ["sample", "--model", "location", "--data", "0", "--eps", "0.1"],              # missing seed
    ["density", "--model", "normal-ls", "--data", "1,2", "--bogus"],              # unknown flag
    ["density", "--model", "weibull", "--data", "1,2"],                           # unknown model
    ["coverage", "--model", "location", "--xi-true", "0", "--reps", "10", "--seed", "1"],
    ["nosuch"],
])
def test_config_errors_exit_2(tmp_path, argv):
    out = tmp_path / "o.csv"
    assert main(argv + ["--out", str(out)] if argv != ["nosuch"] else argv) == 2
    assert not list(tmp_path.iterdir())


def test_numerical_failure_exits_3_without_partial_output(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["fisher", "--cdf", "exponential-rate", "--x", "2", "--out", str(out)]) == 3
    assert main(["sample", "--model", "location", "--n", "2", "--data", "0,1", "--eps", "1e-4",
                 "--budget", "1000", "--seed", "1", "--out", str(out)]) == 3
    assert not list(tmp_path.iterdir())


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('n = 4\n[grid]\ncounts = 50\n')
    assert main(["slp-demo", "--config", str(cfg), "--n", "3", "--format", "json"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["summary"]["n"] == 3
    assert len(obj["p"]) == 50


def test_config_error_reports_field_path(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 1\n[model]\nname = "two-instrument"\nsigma1 = "a"\nsigma2 = 10\n')
    assert main(["sample", "--config", str(cfg), "--data", "0,1", "--eps", "0"]) == 2
    assert "model.sigma1" in capsys.readouterr().err
