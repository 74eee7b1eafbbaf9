import json
import subprocess
import sys

import pytest
import yaml

from qsep import cli, files
from qsep.config import ConfigError, parse_config, setting_seed

SG_CONFIG = {
    "experiment": "SG",
    "model": {"variant": "QuantumSG"},
    "settings": "sg-axes-6",
    "N": 2000,
    "seed": 12345,
}


def write_config(tmp_path, **overrides):
    raw = {**SG_CONFIG, **overrides}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def simulate_run(tmp_path, name="out", **overrides):
    cfg = write_config(tmp_path, **overrides)
    out = tmp_path / name
    assert cli.main(["simulate", str(cfg), "--out", str(out)]) == 0
    return out


def csvs(out):
    return sorted(str(p) for p in out.glob("setting_*.csv"))


class TestSimulate:
    def test_aligned_all_up(self, tmp_path):
        out = simulate_run(tmp_path, N=10, settings=[{"a": [0, 0, 1]}])
        lines = (out / "setting_000.csv").read_text().splitlines()
        assert lines[0] == "index,x"
        assert [line.split(",")[1] for line in lines[1:]] == ["1"] * 10
        meta = files.read_json(out / "setting_000.json")
        assert meta["N"] == 10 and meta["model"] == {"variant": "QuantumSG"}

    def test_empty_run_header_only(self, tmp_path):
        out = simulate_run(tmp_path, N=0, settings=[{"a": [1, 0, 0]}])
        assert (out / "setting_000.csv").read_text() == "index,x\n"

    def test_reruns_are_byte_identical(self, tmp_path):
        a, b = simulate_run(tmp_path, "a"), simulate_run(tmp_path, "b")
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()

    def test_manifest_echoes_config(self, tmp_path):
        out = simulate_run(tmp_path)
        manifest = files.read_json(out / "run.json")
        assert manifest["meta"]["config"] == SG_CONFIG
        assert manifest["meta"]["seed"] == 12345
        assert len(manifest["settings"]) == 6
        assert manifest["settings"][2]["seed"] == setting_seed(12345, 2)

    def test_eprb_dataset_round_trip(self, tmp_path):
        out = simulate_run(tmp_path, experiment="EPRB", model={"variant": "QuantumEPRB"},
                           settings="eprb-axes-9+6", N=300)
        path = csvs(out)[0]
        ds = files.read_dataset(path)
        assert ds.N == 300 and ds.events.shape == (300, 2)
        assert files.events_to_csv(ds) == open(path).read()


class TestExitCodes:
    def test_unknown_config_key(self, tmp_path):
        cfg = write_config(tmp_path, colour="blue")
        assert cli.main(["simulate", str(cfg)]) == 2

    def test_missing_file(self, tmp_path):
        assert cli.main(["stats", str(tmp_path / "nope.csv")]) == 2

    def test_invalid_model(self, tmp_path):
        cfg = write_config(tmp_path, model={"variant": "Quantum"})
        assert cli.main(["simulate", str(cfg)]) == 2

    def test_model_kind_mismatch_is_contract(self, tmp_path):
        cfg = write_config(tmp_path, model={"variant": "QuantumEPRB"}, N=10)
        assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_small_n_compliance_is_contract(self, tmp_path):
        out = simulate_run(tmp_path, N=20)
        assert cli.main(["test", *csvs(out)]) == 1

    def test_corrupt_dataset(self, tmp_path):
        out = simulate_run(tmp_path, N=5)
        path = out / "setting_000.csv"
        path.write_text(path.read_text().replace(",1\n", ",2\n", 1))
        assert cli.main(["stats", str(path)]) == 2

    def test_bad_evidence_model(self, tmp_path):
        out = simulate_run(tmp_path, N=5)
        assert cli.main(["evidence", csvs(out)[0], "--epsilon", "0.1", "--model", "{}"]) == 2


def test_config_validation():
    with pytest.raises(ConfigError):
        parse_config({**SG_CONFIG, "N": -1})
    with pytest.raises(ConfigError):
        parse_config({k: v for k, v in SG_CONFIG.items() if k != "seed"})
    with pytest.raises(ConfigError):
        parse_config({**SG_CONFIG, "settings": [{"a": [0, 0, 2]}]})
    cfg = parse_config({**SG_CONFIG, "model": {"variant": "ScaledCosine", "lam": 0.9, "phi": "pi"}})
    assert cfg.model.phi == pytest.approx(3.141592653589793)


def test_pipeline(tmp_path):
    out = simulate_run(tmp_path, N=20000)
    stats_path, sep_path = tmp_path / "stats.json", tmp_path / "sep.json"
    assert cli.main(["stats", *csvs(out), "-o", str(stats_path)]) == 0
    stats = files.read_json(stats_path)
    assert len(stats["records"]) == 6 and stats["meta"]["seed"][0] == setting_seed(12345, 0)
    assert cli.main(["separate", str(stats_path), "-o", str(sep_path)]) == 0
    sep = files.read_json(sep_path)
    assert sep["verdict"] == "SeparablePure"
    assert set(sep) >= {"coefficients", "rho_real", "rho_imag", "eigenvalues", "purity",
                        "residuals", "meta"}
    assert len(sep["meta"]["config_hash"]) == 64

    test_path = tmp_path / "test.json"
    assert cli.main(["test", *csvs(out), "-o", str(test_path)]) == 0
    assert files.read_json(test_path)["verdict"] == "pass"

    ev_path = tmp_path / "ev.json"
    assert cli.main(["evidence", csvs(out)[0], "--epsilon", "0.05", "-o", str(ev_path)]) == 0
    ev = files.read_json(ev_path)
    assert ev["theta"] == pytest.approx(1.5707963267948966)
    assert ev["predicted_mean_Ev"] == pytest.approx(-20000 * 0.05 ** 2 / 2)


def test_fisher_command(tmp_path):
    out = simulate_run(tmp_path, experiment="EPRB", model={"variant": "QuantumEPRB"},
                       settings="theta-grid-17", N=50000)
    stats_path, fisher_path = tmp_path / "stats.json", tmp_path / "fisher.json"
    png = tmp_path / "fisher.png"
    assert cli.main(["stats", *csvs(out), "-o", str(stats_path)]) == 0
    assert cli.main(["fisher", str(stats_path), "-o", str(fisher_path), "--plot", str(png)]) == 0
    report = files.read_json(fisher_path)
    assert report["fit"]["K"] == 1
    assert report["fit"]["phi"] == pytest.approx(3.141592653589793)
    assert len(report["estimates"]) == 15
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_stdout_report(tmp_path, capsys):
    out = simulate_run(tmp_path, N=100)
    assert cli.main(["stats", csvs(out)[0]]) == 0
    assert json.loads(capsys.readouterr().out)["records"][0]["N"] == 100


def test_demo_bundle_is_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["demo", "--out", str(a)]) == 0
    assert cli.main(["demo", "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == ["demo_report.json", "e_theta.png", "e_theta_curves.csv",
                     "fisher_eprb.png", "summary.txt"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    report = files.read_json(a / "demo_report.json")
    assert report["verdicts"] == ["SeparablePure", "SeparablePure", "NotSeparable"]
    assert report["separations"]["sg_mixed"]["verdict"] == "SeparableMixed"
    assert report["inference"]["EPRB scaled 0.9"]["compliance"]["verdict"] == "fail"
    header = (a / "e_theta_curves.csv").read_text().splitlines()[0]
    assert header == "model,theta_deg,theta,E_measured,se,E_exact"


def test_console_module():
    proc = subprocess.run([sys.executable, "-m", "qsep.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "qsep" in proc.stdout
