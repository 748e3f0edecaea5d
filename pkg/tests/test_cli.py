import json

import numpy as np
import pytest

from pwdpd.cli import main, scenario_preset
from pwdpd.errors import ConfigError, DivergenceError
from pwdpd.signals import read_iq


def test_generate_writes_bundle(tmp_path, capsys):
    stem = tmp_path / "wave"
    rc = main(["generate", "--fft", "256", "--active", "180", "--scs", "15000",
               "--oversampling", "2", "--symbols", "2", "--seed", "5",
               "--cfr-target", "6.5", "--output", str(stem)])
    assert rc == 0
    sig = read_iq(stem)
    assert sig.sample_rate == pytest.approx(256 * 15000 * 2)
    grid = np.load(str(stem) + ".grid.npy")
    assert grid.shape == (2, 180)
    assert "PAPR" in capsys.readouterr().out


def test_generate_then_simulate_and_evaluate(tmp_path, capsys):
    stem = tmp_path / "w"
    assert main(["generate", "--fft", "256", "--active", "180", "--scs", "120000",
                 "--oversampling", "4", "--symbols", "16", "--output", str(stem)]) == 0
    rc = main(["simulate", "--plant", "array8-deep", "--input", str(stem),
               "--output", str(tmp_path / "z"), "--drive-rms", "0.56",
               "--channel-bw", "40e6".replace("e6", "000000")])
    assert rc == 0
    z = read_iq(tmp_path / "z")
    assert len(z) == len(read_iq(stem))
    assert "ACLR" in capsys.readouterr().out


def test_partition_subcommand(tmp_path, capsys):
    rc = main(["partition", "--plant", "doherty-n3", "--output",
               str(tmp_path / "part.json")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "u_k" in out and "share" in out
    data = json.loads((tmp_path / "part.json").read_text())
    assert data["edges"][0] == 0.0


def test_complexity_subcommand(tmp_path, capsys):
    rc = main(["complexity", "--preset", "reference", "--json-out",
               str(tmp_path / "ledger.json")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "926" in out and "27,847" in out
    ledger = json.loads((tmp_path / "ledger.json").read_text())
    assert ledger["pwcl_orth_pruned"]["learn_est"] == pytest.approx(323.2032)


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "nonsense", "seed": 1}))
    assert main(["scenario", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["scenario", "--preset", "missing-preset", "--out", str(tmp_path)]) == 2
    assert main(["train", "--plant", "not-a-preset.json", "--output",
                 str(tmp_path / "m")]) == 2


def test_degenerate_region_exit_code(tmp_path):
    # a partition whose top region can never be populated
    part = tmp_path / "part.json"
    part.write_text(json.dumps({"edges": [0.0, 0.9999999, 1.0], "orders": None,
                                "target_error": None}))
    rc = main(["train", "--plant", "doherty-n3", "--method", "pw_ila",
               "--family", "memoryless", "--order", "5",
               "--block-size", "2000", "--iterations", "1",
               "--partition", str(part), "--output", str(tmp_path / "m")])
    assert rc == 3


def test_divergence_exit_code(tmp_path, monkeypatch):
    import pwdpd.cli as cli_mod

    def boom(config, outdir, workers=1):
        raise DivergenceError("test divergence", [])

    monkeypatch.setattr(cli_mod, "run_scenario", boom)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "complexity", "seed": 0}))
    assert main(["scenario", "--config", str(cfg), "--out", str(tmp_path)]) == 4


def test_scenario_preset_loader():
    cfg = scenario_preset("complexity-ledger")
    assert cfg["kind"] == "complexity"
    with pytest.raises(ConfigError):
        scenario_preset("not-there")


def test_scenario_bit_reproducibility(tmp_path):
    cfg = scenario_preset("linear-sanity")
    for name in ("a", "b"):
        assert main(["scenario", "--preset", "linear-sanity",
                     "--out", str(tmp_path), "--name", name]) == 0
    m_a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    m_b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert m_a["artifacts"] == m_b["artifacts"]
    assert len(m_a["artifacts"]) >= 5
    assert cfg == m_a["config"]


def test_linear_sanity_scenario_results(tmp_path):
    assert main(["scenario", "--preset", "linear-sanity",
                 "--out", str(tmp_path), "--name", "lin"]) == 0
    metrics = json.loads((tmp_path / "lin" / "metrics.json").read_text())["methods"]
    assert metrics["none"]["evm_percent"] < 0.1
    assert metrics["none"]["aclr_dbc"] > 55
    assert metrics["pwcl_orth"]["evm_percent"] < 0.1
    assert metrics["pwcl_orth"]["aclr_dbc"] > 55
    assert metrics["pwcl_orth"]["gamma_norm"] < 1e-3


def test_descriptor_export_round_trip():
    from pwdpd.basis import BasisSpec, descriptors_json
    spec = BasisSpec("gmp", 5, 2, 1)
    desc = descriptors_json(spec)
    assert len(desc) == spec.n_basis_single
    assert desc[0] == {"family": "aligned", "order": 1, "lags": [0]}
    assert json.dumps(desc)  # JSON-ready


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("PWDPD_OUT", str(tmp_path))
    assert main(["scenario", "--preset", "complexity-ledger", "--name", "led"]) == 0
    assert (tmp_path / "led" / "metrics.json").exists()


def test_sweep_parallel_workers(tmp_path):
    cfg = scenario_preset("powersweep")
    cfg["offsets_db"] = [-1.0, 0.0]
    cfg["methods"] = ["none"]
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path),
                 "--name", "par", "--workers", "2"]) == 0
    rows = json.loads((tmp_path / "par" / "metrics.json").read_text())["rows"]
    assert [r["offset_db"] for r in rows] == [-1.0, 0.0]


def test_partition_demo_scenario(tmp_path):
    assert main(["scenario", "--preset", "partition-demo",
                 "--out", str(tmp_path), "--name", "pd"]) == 0
    metrics = json.loads((tmp_path / "pd" / "metrics.json").read_text())
    assert metrics["taylor"]["method"] == "taylor"
    assert metrics["kmeans"]["method"] == "kmeans"
    assert len(metrics["taylor"]["edges"]) == len(metrics["kmeans"]["edges"])
    assert (tmp_path / "pd" / "partition_taylor.json").exists()


def test_scenario_failure_writes_error_record(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "nonsense", "seed": 1}))
    rc = main(["scenario", "--config", str(bad), "--out", str(tmp_path), "--name", "x"])
    assert rc == 2
    record = json.loads((tmp_path / "x" / "error.json").read_text())
    assert record["error"] == "ConfigError"
    assert "nonsense" in record["message"]
