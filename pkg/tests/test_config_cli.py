import json

import pytest

from netsched import config as cfg_mod
from netsched.cli import main


def test_config_roundtrip_identity():
    cfg = cfg_mod.preset("exp1")
    text = cfg.to_json()
    again = cfg_mod.loads(text)
    assert again.to_json() == text
    assert again == cfg


def test_config_defaults_fill_in():
    cfg = cfg_mod.loads('{"horizon": 5000}')
    assert cfg.horizon == 5000
    assert cfg.scheduler.beta == 1.0
    assert cfg.adversary.kind == "cyclic-arrival"


def test_config_rejects_unknown_keys():
    with pytest.raises(cfg_mod.ConfigError, match="unknown key"):
        cfg_mod.loads('{"horizont": 10}')
    with pytest.raises(cfg_mod.ConfigError, match="scheduler"):
        cfg_mod.loads('{"scheduler": {"betta": 2}}')


def test_config_rejects_bad_version_and_kind():
    with pytest.raises(cfg_mod.ConfigError, match="version"):
        cfg_mod.loads('{"version": 99}')
    with pytest.raises(cfg_mod.ConfigError, match="kind"):
        cfg_mod.loads('{"adversary": {"kind": "martian"}}')


def test_config_malformed_json_has_line_diagnostic():
    with pytest.raises(cfg_mod.ConfigError, match=r"line 2"):
        cfg_mod.loads('{\n  "horizon": ,\n}')


def test_unknown_preset():
    with pytest.raises(cfg_mod.ConfigError):
        cfg_mod.preset("nope")


def test_cli_malformed_config_exits_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"horizon": }')
    rc = main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "config error" in capsys.readouterr().err


def test_cli_exponential_simulate(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["simulate", "--preset", "exp-exponential", "--n", "4", "--eps", "0.2",
               "--horizon", "100000", "--out", str(out)])
    assert rc in (0, 3)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reached"] >= summary["target"]
    lines = (out / "trace.csv").read_text().strip().splitlines()
    assert lines[0].startswith("slot,max_queue")
    assert len(lines) == summary["slots"] + 1


def test_cli_simulate_constant_stable_and_unstable(tmp_path):
    out1 = tmp_path / "stable"
    cfg = cfg_mod.ExperimentConfig(
        horizon=20_000,
        adversary=cfg_mod.AdversaryConfig(kind="constant", rate_idx=0, gamma_idx=0,
                                          load=0.02,
                                          c_table=((0.0,) * 3,) * 3),
    )
    p = tmp_path / "cfg.json"
    p.write_text(cfg.to_json())
    rc = main(["simulate", "--config", str(p), "--out", str(out1)])
    assert rc == 0
    assert json.loads((out1 / "summary.json").read_text())["verdict"] == "stable"

    cfg_bad = cfg_mod.from_dict({**cfg.to_dict(),
                                 "adversary": {**cfg.to_dict()["adversary"], "load": 5.0}})
    p.write_text(cfg_bad.to_json())
    rc = main(["simulate", "--config", str(p), "--out", str(tmp_path / "u")])
    assert rc == 3  # unstable verdict exit code


def test_cli_probe_writes_table(tmp_path):
    out = tmp_path / "probe"
    cfg = cfg_mod.ExperimentConfig(probe=cfg_mod.ProbeConfig(window=3000, tol=0.01))
    p = tmp_path / "cfg.json"
    p.write_text(cfg.to_json())
    rc = main(["probe", "--config", str(p), "--out", str(out)])
    assert rc == 0
    table = json.loads((out / "c_table.json").read_text())
    assert len(table["c"]) == 3 and len(table["c"][0]) == 3
    assert all(0 < table["c"][i][j] < 2 for i in range(3) for j in range(3))
    lines = (out / "c_table.csv").read_text().strip().splitlines()
    assert len(lines) == 10  # header + 9 pairs


def test_cli_probe_zero_gamma_errors(tmp_path, capsys):
    cfg = cfg_mod.ExperimentConfig(grid=cfg_mod.GridConfig(gamma_low=0.0, gamma_high=0.0))
    p = tmp_path / "cfg.json"
    p.write_text(cfg.to_json())
    rc = main(["probe", "--config", str(p), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_cli_audit_scenarios(tmp_path):
    for scenario in ("exponential", "parallel", "chain"):
        out = tmp_path / scenario
        rc = main(["audit", "--scenario", scenario, "--n", "3", "--eps", "0.2",
                   "--slots", "80", "--out", str(out)])
        assert rc == 0
        rep = json.loads((out / "audit.json").read_text())
        assert rep["compliant"] and rep["n_bad"] == 0
        assert rep["n_packets"] > 0


def test_cli_bounds(tmp_path, capsys):
    out = tmp_path / "b"
    rc = main(["bounds", "--n", "2", "--out", str(out)])
    assert rc == 0
    payload = json.loads((out / "bounds.json").read_text())
    assert payload["m_ladder"] == ["100", "0"]
    rc = main(["bounds", "--n", "10"])
    assert rc == 0
    assert "budget exceeded" in capsys.readouterr().out


def test_cli_simulate_cyclic_preset_desk_scale(tmp_path):
    # end-to-end exp1 preset at a tiny scale: probe then rotate arrivals
    out = tmp_path / "exp1"
    cfg = cfg_mod.ExperimentConfig(
        horizon=6000,
        adversary=cfg_mod.AdversaryConfig(kind="cyclic-arrival", rate_idx=0),
        probe=cfg_mod.ProbeConfig(window=2000, tol=0.01),
    )
    p = tmp_path / "cfg.json"
    p.write_text(cfg.to_json())
    rc = main(["simulate", "--config", str(p), "--out", str(out)])
    assert rc in (0, 3)
    summary = json.loads((out / "summary.json").read_text())
    assert "c_table" in summary and summary["slots"] == 6000
