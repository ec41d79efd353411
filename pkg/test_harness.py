#!/usr/bin/env python3
"""Test run configuration, the registry, reports and the command line"""

import csv
import json
import math

import pytest

from towerlab.cli import main
from towerlab.core.exceptions import ConfigurationError, InvalidParameterError, TowerLabError
from towerlab.harness import (Registry, RunConfig, SweepSpec, apply_overrides, load_config,
                              load_thresholds, parallel_map, recompute_verdicts, report, run)
from towerlab.harness.config import parse_override
from towerlab.utils.constants import REGISTRY_ENV, ExitCodes, ExperimentKinds
from towerlab.utils.json_support import sha256_canonical_json


@pytest.fixture
def registry(tmp_path):
    return Registry(tmp_path / "registry")


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# ========================================
# CONFIG
# ========================================

def test_parse_override():
    assert parse_override("domain.radius=2") == ("domain.radius", 2)
    assert parse_override("method=newton") == ("method", "newton")
    assert parse_override("p=[1, 1.05]") == ("p", [1, 1.05])
    with pytest.raises(ConfigurationError):
        parse_override("no-equals-sign")


def test_apply_overrides_nested():
    data = apply_overrides({"domain": "disk", "k": 1}, ["domain.radius=2", "k=3"])
    assert data == {"domain": {"kind": "disk", "radius": 2}, "k": 3}


def test_sweep_is_geometric():
    values = SweepSpec(1e-2, 1e-5, 4).values()
    assert values == pytest.approx((1e-2, 1e-3, 1e-4, 1e-5), rel=1e-12)
    with pytest.raises(InvalidParameterError):
        SweepSpec(1e-2, 1e-2, 4)


def test_lambda_or_sweep_required():
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"kind": "params"})
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"kind": "params", "lambda": 1e-3,
                             "sweep": {"from": 1e-2, "to": 1e-4, "points": 3}})
    assert RunConfig.from_dict({"kind": "limit-checks"}).lambdas == ()


def test_error_names_the_line(tmp_path):
    path = _write(tmp_path / "bad.json", '{\n  "kind": "params",\n  "lambda": -1\n}\n')
    with pytest.raises(ConfigurationError) as info:
        load_config(path)
    assert info.value.line == 3
    assert "lambda" in str(info.value)


def test_unknown_key_rejected(tmp_path):
    path = _write(tmp_path / "bad.json", '{\n  "kind": "params",\n  "lambda": 0.001,\n  "lamda": 2\n}\n')
    with pytest.raises(ConfigurationError) as info:
        load_config(path)
    assert info.value.line == 4


def test_invalid_json_line(tmp_path):
    path = _write(tmp_path / "broken.json", '{\n  "kind": "params",\n  "lambda": \n}\n')
    with pytest.raises(ConfigurationError) as info:
        load_config(path)
    assert info.value.line is not None


def test_overrides_apply_after_file(tmp_path):
    path = _write(tmp_path / "run.json", json.dumps({"kind": "params", "k": 2, "lambda": 1e-3}))
    config = load_config(path, ["k=3", "domain.radius=2.0"])
    assert config.k == 3
    assert config.domain.radius == 2.0
    assert config.lambdas == (1e-3,)


def test_config_echo_is_stable():
    config = RunConfig.from_dict({"kind": "params", "k": 2, "lambda": 1e-3})
    again = RunConfig.from_dict(config.to_dict())
    assert sha256_canonical_json(config.to_dict()) == sha256_canonical_json(again.to_dict())


def test_threshold_overrides_merge():
    merged = load_thresholds({"solve": {"path_gap": 1e-6}})
    assert merged["version"] == 1
    assert merged["solve"]["path_gap"] == 1e-6
    assert merged["solve"]["phi_bound"] == 10.0


def test_parallel_map_keeps_order():
    assert parallel_map(lambda x: x * x, [3, 1, 2], workers=3) == [9, 1, 4]


# ========================================
# RUNS AND REGISTRY
# ========================================

def test_params_run_recorded(registry):
    config = RunConfig.from_dict({"kind": "params", "k": 3,
                                  "sweep": {"from": 1e-2, "to": 1e-6, "points": 3}})
    record = run(config, registry)
    assert record.passed
    assert set(record.verdicts) == {"alternating_sum", "exponent_identity", "scale_balance", "d_drift"}
    (stored,) = list(registry.records())
    assert stored.record_id == record.record_id
    assert recompute_verdicts(stored) == record.verdicts


def test_registry_never_overwrites(registry):
    config = RunConfig.from_dict({"kind": "params", "lambda": 1e-3})
    record = run(config)
    first = registry.write(record)
    second = registry.write(record)
    assert first != second
    assert len(registry.paths()) == 2
    assert len(registry.select(kind="params", k=1, verdict="pass")) == 2
    assert registry.select(kind="solve") == []


def test_limit_checks_run(registry):
    record = run(RunConfig.from_dict({"kind": "limit-checks", "alphas": [2, 6, 10]}), registry)
    masses = {check["alpha"]: check["mass"] for check in record.payload["checks"]}
    for alpha, mass in masses.items():
        assert mass == pytest.approx(4 * math.pi * alpha, rel=1e-8)
    assert record.verdicts["mass_alpha2"]
    assert record.verdicts["stereographic_alpha6"]


def test_ansatz_theta_spread_verdict(registry):
    config = RunConfig.from_dict({"kind": "ansatz", "k": 3,
                                  "sweep": {"from": 1e-2, "to": 1e-5, "points": 4}})
    record = run(config, registry)
    assert not record.verdicts["theta_3"]
    assert not record.passed
    assert float(record.payload["theta"]["ratios"]["3"]) > 2.0
    (stored,) = list(registry.records())
    assert recompute_verdicts(stored) == record.verdicts


def test_linear_spectrum_reports_floor(registry):
    config = RunConfig.from_dict({"kind": "linear-spectrum", "k": 1, "modes": [0, 1, 2],
                                  "sweep": {"from": 1e-2, "to": 1e-4, "points": 3}})
    record = run(config, registry)
    assert set(record.verdicts) == {"even_band", "full_collapse"}
    floor = record.payload["full"]["floor"]
    assert floor["lambda"] == pytest.approx(1e-4)
    assert floor["factor"] == 2.0
    assert floor["sigma_min"] == pytest.approx(record.payload["full"]["sigma_min"][-1])
    assert "floor" not in record.payload["even"]


def test_residual_scan_report(registry, tmp_path):
    config = RunConfig.from_dict({"kind": "residual-scan", "k": 1,
                                  "sweep": {"from": 1e-2, "to": 1e-5, "points": 4}})
    record = run(config, registry)
    assert record.verdicts["residual_p1"]
    bundle = report(registry, tmp_path / "report", kind="residual-scan")
    with open(bundle.csv_path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "ln_lambda,ln_norm,ln_reference"
    rows = list(csv.reader(line for line in lines[1:] if not line.startswith("#")))
    assert len(rows) == 8
    assert sum(line.startswith("# ") for line in lines) == 2
    summary = json.loads(bundle.summary_path.read_text(encoding="utf-8"))
    assert summary["records"] == 1
    assert summary["by_kind"]["residual-scan"]["passed"] == 1


def test_empty_report(registry, tmp_path):
    bundle = report(registry, tmp_path / "empty", kind="solve")
    assert bundle.empty
    assert bundle.csv_path.read_text(encoding="utf-8").strip() == "ln_lambda,ln_norm,ln_reference"


def test_execution_error_writes_nothing(registry):
    config = RunConfig.from_dict({"kind": "solve", "lambda": 1e-3, "domain": "rectangle"})
    with pytest.raises(TowerLabError):
        run(config, registry)
    assert registry.paths() == []


# ========================================
# COMMAND LINE
# ========================================

def test_cli_params(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(REGISTRY_ENV, str(tmp_path / "reg"))
    assert main(["params", "--k", "2", "--lambda", "1e-3"]) == ExitCodes.OK
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is True
    assert len(list((tmp_path / "reg").glob("*.json"))) == 1


def test_cli_bad_lambda(tmp_path, monkeypatch):
    monkeypatch.setenv(REGISTRY_ENV, str(tmp_path / "reg"))
    assert main(["params", "--lambda", "-1"]) == ExitCodes.EXECUTION_ERROR
    assert not (tmp_path / "reg").exists()


def test_cli_incomplete_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv(REGISTRY_ENV, str(tmp_path / "reg"))
    assert main(["ansatz", "--lambda-from", "1e-2"]) == ExitCodes.EXECUTION_ERROR


def test_cli_failed_check(tmp_path, monkeypatch):
    monkeypatch.setenv(REGISTRY_ENV, str(tmp_path / "reg"))
    argv = ["params", "--lambda", "1e-3", "--override", 'thresholds={"params": {"balance_tol": -1}}']
    assert main(argv) == ExitCodes.CHECK_FAILED
    assert len(list((tmp_path / "reg").glob("*.json"))) == 1


def test_cli_report(tmp_path, monkeypatch):
    monkeypatch.setenv(REGISTRY_ENV, str(tmp_path / "reg"))
    assert main(["params", "--lambda", "1e-3"]) == ExitCodes.OK
    assert main(["report", "--kind", ExperimentKinds.PARAMS, "--output",
                 str(tmp_path / "out")]) == ExitCodes.OK
    assert (tmp_path / "out" / "summary.json").exists()
