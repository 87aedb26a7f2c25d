"""Tests for JSON config parsing and the command line interface."""

import csv
import io
import json
import math

import pytest

from keyage import analysis, config
from keyage.cli import main
from keyage.csvio import COLUMNS


BASE = {
    "network": {"kind": "shn", "n": 6, "lambda_e": 100.0},
    "lambda_s": 10.0,
    "threshold": {"k": 2},
    "scheme": ["memory", "memoryless"],
}


def _cfg(tmp_path, name="cfg.json", **extra):
    data = dict(BASE)
    data.update(extra)
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def _parse_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_load_minimal_config_defaults():
    cfg = config.load_config(json.dumps(BASE), "inline")
    assert cfg.lambda_s == 10.0
    assert cfg.threshold_kind == "k"
    assert cfg.k == 2
    assert cfg.schemes == ["memory", "memoryless"]
    assert cfg.warmup == 0.0
    assert cfg.batches == 30
    assert cfg.exact_threshold == 16


def test_config_scheme_string_form():
    cfg = config.load_config(json.dumps({**BASE, "scheme": "memory"}), "inline")
    assert cfg.schemes == ["memory"]


def test_config_rejects_k_and_beta_alpha_together():
    bad = {**BASE, "threshold": {"k": 2, "beta": 0.5, "alpha": 0.9}}
    with pytest.raises(config.ConfigError, match="not both"):
        config.load_config(json.dumps(bad), "inline")


def test_config_rejects_unknown_keys():
    with pytest.raises(config.ConfigError, match="nonsense"):
        config.load_config(json.dumps({**BASE, "nonsense": 1}), "inline")
    bad = {**BASE, "network": {"kind": "shn", "n": 6, "lambda_e": 1.0, "zap": 2}}
    with pytest.raises(config.ConfigError, match="zap"):
        config.load_config(json.dumps(bad), "inline")


def test_config_parse_error_reports_position():
    with pytest.raises(config.ConfigError, match="inline:1:"):
        config.load_config("{broken", "inline")


def test_config_beta_alpha_resolution():
    cfg = config.load_config(json.dumps({
        **BASE, "threshold": {"beta": 0.5, "alpha": 0.5}}), "inline")
    kvec, resolved = config.resolve_k_vector(6, cfg.threshold_kind, cfg.k,
                                             cfg.beta, cfg.alpha)
    assert tuple(kvec) == (3,) * 6
    assert resolved


def test_config_beta_alpha_unreachable():
    cfg = config.load_config(json.dumps({
        **BASE, "threshold": {"beta": 0.5, "alpha": 1.0}}), "inline")
    with pytest.raises(config.ConfigError, match="n-1"):
        config.resolve_k_vector(6, cfg.threshold_kind, cfg.k, cfg.beta, cfg.alpha)


def test_config_sweep_validation():
    ok = {**BASE, "sweep": [{"parameter": "lambda_e", "values": [1.0, 2.0]}]}
    cfg = config.load_config(json.dumps(ok), "inline")
    assert cfg.sweep == [("lambda_e", [1.0, 2.0])]
    dup = {**BASE, "sweep": [{"parameter": "k", "values": [1]},
                             {"parameter": "k", "values": [2]}]}
    with pytest.raises(config.ConfigError, match="swept twice"):
        config.load_config(json.dumps(dup), "inline")
    bad_param = {**BASE, "sweep": [{"parameter": "horizon", "values": [1.0]}]}
    with pytest.raises(config.ConfigError):
        config.load_config(json.dumps(bad_param), "inline")
    beta_with_k = {**BASE, "sweep": [{"parameter": "beta", "values": [0.5]}]}
    with pytest.raises(config.ConfigError, match="beta"):
        config.load_config(json.dumps(beta_with_k), "inline")


def test_config_explicit_network_cannot_sweep_n():
    data = {
        "network": {"kind": "explicit", "n": 2, "edges": [[1, 2, 3.0], [2, 1, 3.0]]},
        "lambda_s": 1.0,
        "threshold": {"k": 1},
        "sweep": [{"parameter": "n", "values": [2, 3]}],
    }
    with pytest.raises(config.ConfigError):
        config.load_config(json.dumps(data), "inline")


def test_cli_requires_config(capsys):
    assert main(["analyze"]) == 2
    assert "requires --config" in capsys.readouterr().err


def test_cli_analyze_values(tmp_path, capsys):
    assert main(["analyze", "--config", _cfg(tmp_path), "--deterministic"]) == 0
    out = capsys.readouterr().out
    rows = _parse_rows(out)
    assert [r["scheme"] for r in rows] == ["memory", "memoryless"]
    assert all(r["node_id"] == "all" for r in rows)
    assert math.isclose(float(rows[0]["analytic_age"]), 0.225, rel_tol=1e-12)
    assert math.isclose(float(rows[1]["analytic_age"]), 0.2375, rel_tol=1e-12)
    assert "# command = analyze" in out


def test_cli_output_schema(tmp_path, capsys):
    main(["analyze", "--config", _cfg(tmp_path), "--deterministic"])
    header = [ln for ln in capsys.readouterr().out.splitlines()
              if not ln.startswith("#")][0]
    assert header == ",".join(COLUMNS)


def test_cli_simulate_rows_and_determinism(tmp_path):
    cfgp = _cfg(tmp_path, horizon=50.0, seed=7, batches=10)
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["simulate", "--config", cfgp, "--deterministic",
                 "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfgp, "--deterministic",
                 "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = _parse_rows(out1.read_text())
    # 6 per-node rows plus one pooled row per scheme
    assert len(rows) == 14
    per_node = [r for r in rows if r["scheme"] == "memory" and r["node_id"] != "all"]
    assert len(per_node) == 6
    for r in per_node:
        assert float(r["ci_half_width"]) > 0
        assert float(r["empirical_age"]) > 0
        assert r["horizon"] == "50.0"
        assert r["seed"] == "7"
        assert math.isclose(float(r["analytic_age"]), 0.225, rel_tol=1e-12)


def test_cli_simulate_requires_horizon_and_seed(tmp_path, capsys):
    assert main(["simulate", "--config", _cfg(tmp_path)]) == 2
    assert "horizon" in capsys.readouterr().err
    cfgp = _cfg(tmp_path, "h.json", horizon=10.0)
    assert main(["simulate", "--config", cfgp]) == 2
    assert "seed" in capsys.readouterr().err
    # --seed on the command line fills the gap
    assert main(["simulate", "--config", cfgp, "--seed", "3"]) == 0


def test_cli_seed_flag_overrides_config(tmp_path, capsys):
    cfgp = _cfg(tmp_path, horizon=20.0, seed=7)
    assert main(["simulate", "--config", cfgp, "--seed", "8",
                 "--deterministic"]) == 0
    out = capsys.readouterr().out
    assert "# seed = 8" in out
    assert all(r["seed"] == "8" for r in _parse_rows(out))


def test_cli_emit_event_log(tmp_path):
    cfgp = _cfg(tmp_path, scheme="memory", horizon=5.0, seed=2)
    log = tmp_path / "events.csv"
    assert main(["simulate", "--config", cfgp, "--deterministic",
                 "--out", str(tmp_path / "s.csv"),
                 "--emit-event-log", str(log)]) == 0
    lines = log.read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header.split(",")[:4] == ["time", "kind", "src", "dst"]
    assert header.count("age_") == 6
    kinds = {ln.split(",")[1] for ln in lines
             if ln and not ln.startswith("#") and not ln.startswith("time")}
    assert kinds == {"update", "edge"}


def test_cli_emit_event_log_needs_single_scheme(tmp_path, capsys):
    cfgp = _cfg(tmp_path, horizon=5.0, seed=2)
    assert main(["simulate", "--config", cfgp,
                 "--emit-event-log", str(tmp_path / "e.csv")]) == 2
    assert "scheme" in capsys.readouterr().err


def test_cli_sweep_analytic_grid(tmp_path, capsys):
    cfgp = _cfg(tmp_path, sweep=[
        {"parameter": "lambda_e", "values": [25.0, 50.0, 100.0, 200.0]},
        {"parameter": "k", "values": [2, 4]},
    ])
    assert main(["sweep", "--config", cfgp, "--deterministic"]) == 0
    out = capsys.readouterr().out
    rows = _parse_rows(out)
    assert len(rows) == 16  # 4 rates x 2 requirements x 2 schemes
    pick = [r for r in rows if r["scheme"] == "memory"
            and r["k"] == "2" and r["lambda_e_or_edge_profile_id"] == "100.0"]
    assert len(pick) == 1
    assert math.isclose(float(pick[0]["analytic_age"]), 0.225, rel_tol=1e-12)
    assert "# sweep_parameters" in out


def test_cli_sweep_simulated_parallel_matches_serial(tmp_path):
    cfgp = _cfg(tmp_path, horizon=20.0, seed=11, batches=5, sweep=[
        {"parameter": "lambda_e", "values": [50.0, 100.0]},
        {"parameter": "k", "values": [2, 3]},
    ])
    a = tmp_path / "serial.csv"
    b = tmp_path / "par.csv"
    assert main(["sweep", "--config", cfgp, "--deterministic",
                 "--out", str(a)]) == 0
    assert main(["sweep", "--config", cfgp, "--deterministic", "--jobs", "3",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _parse_rows(a.read_text())
    # per point and scheme: one analytic row plus 6 node rows plus pooled row
    assert len(rows) == 4 * 2 * 8
    assert {r["k"] for r in rows} == {"2", "3"}


def test_cli_critical_rate(tmp_path, capsys):
    cfgp = _cfg(tmp_path, critical_rate={
        "n": 30, "k": [2], "epsilon": [0.1], "bracket": [0.5, 1e5]})
    assert main(["critical-rate", "--config", cfgp, "--deterministic"]) == 0
    rows = _parse_rows(capsys.readouterr().out)
    assert len(rows) == 1
    ref = analysis.critical_gossip_rate(2, 30, 10.0, 0.1, (0.5, 1e5))
    assert math.isclose(float(rows[0]["lambda_e_or_edge_profile_id"]),
                        ref.rate, rel_tol=1e-9)
    assert float(rows[0]["analytic_age"]) <= 0.1


def test_cli_precision(tmp_path, capsys):
    cfgp = _cfg(tmp_path, precision={"beta": [0.5], "alpha_grid": [0.5, 0.9]})
    assert main(["precision", "--config", cfgp, "--deterministic"]) == 0
    rows = _parse_rows(capsys.readouterr().out)
    # two alphas x two schemes
    assert len(rows) == 4
    assert {r["alpha"] for r in rows} == {"0.5", "0.9"}
    k_of = {(r["alpha"], r["scheme"]): r["k"] for r in rows}
    assert k_of[("0.5", "memory")] == "3"
    row = [r for r in rows if r["alpha"] == "0.5" and r["scheme"] == "memory"][0]
    assert math.isclose(float(row["analytic_age"]),
                        analysis.shn_age_memory(6, 3, 100.0, 10.0), rel_tol=1e-12)


def test_cli_validate_quick(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["validate", "--quick", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "OK (" in text
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert all(c["passed"] for c in report["checks"])


def test_cli_rejects_bad_config_with_message(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({**BASE, "threshold": {"k": 2, "beta": 0.5,
                                                   "alpha": 0.9}}))
    assert main(["analyze", "--config", str(p)]) == 2
    assert "not both" in capsys.readouterr().err
