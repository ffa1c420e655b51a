import json
from pathlib import Path

import pytest

from limitexec import cli
from limitexec.errors import NumericalFailure

GOLDEN = Path(__file__).parent / "golden"
SHORT = {"problem": {"q0": 100, "delta_size": 50, "horizon_s": 10, "mu": 0.0, "sigma": 0.3,
                     "gamma": 0.001, "penalty": {"constant": 3.0}},
         "intensity": {"exponential": {"A": 0.1, "k": 0.3}},
         "solver": {"dt": 0.5}}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


@pytest.mark.parametrize("sub", ["validate-intensity", "solve", "quotes", "constrained",
                                 "asymptotic", "limit", "mm"])
def test_subcommands_run(tmp_path, sub):
    cfg = dict(SHORT, limit={"dq": 12.5, "dt": 0.5}, market_maker={"Q": 100})
    out = tmp_path / "out"
    assert cli.main([sub, "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 0
    m = _manifest(out)
    assert m["subcommand"] == sub
    for f in m["outputs"]:
        assert (out / f).exists()


def test_study_and_multi(tmp_path):
    cfg = dict(SHORT, limit={"dq": 12.5, "dt": 0.5, "deltas": [50, 25]},
               comparison={"factor": 2}, multi_asset={"correlation": [[1, 0.5], [0.5, 1]]})
    p = _write(tmp_path, cfg)
    assert cli.main(["study", "--config", str(p), "--out", str(tmp_path / "s")]) == 0
    s = _manifest(tmp_path / "s")["summary"]
    assert len(s["sup_errors"]) == 2 and "quote_gap_refined_lots" in s
    assert cli.main(["multi", "--config", str(p), "--out", str(tmp_path / "m")]) == 0


def test_simulate_with_seed_and_dt(tmp_path):
    cfg = dict(SHORT, simulate={"paths": 500, "dump_paths": True})
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", str(_write(tmp_path, cfg)), "--out", str(out),
                     "--seed", "5", "--dt", "0.1"]) == 0
    m = _manifest(out)
    assert m["config"]["simulate"]["seed"] == 5 and m["config"]["simulate"]["dt"] == 0.1
    assert "paths.csv" in m["outputs"]


def test_manifest_is_byte_identical_on_rerun(tmp_path):
    cfg = dict(SHORT, simulate={"paths": 300, "seed": 3})
    p = _write(tmp_path, cfg)
    for out in ("a", "b"):
        assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / out)]) == 0
    for f in ("manifest.json", "simulation.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("sub", ["solve", "validate-intensity"])
def test_golden_manifest(tmp_path, sub):
    out = tmp_path / "g"
    assert cli.main([sub, "--config", str(_write(tmp_path, SHORT)), "--out", str(out)]) == 0
    got = _manifest(out)
    want = json.loads((GOLDEN / f"{sub}.json").read_text())
    # the kernel backend is environment-dependent; results are not
    got.pop("backend")
    want.pop("backend")
    assert got == want


def test_preset_runs(tmp_path):
    assert cli.main(["validate-intensity", "--preset", "fig3", "--out", str(tmp_path)]) == 0
    assert _manifest(tmp_path)["summary"]["all_passed"] is True


def test_exit_code_config_errors(tmp_path):
    bad = dict(SHORT, problem=dict(SHORT["problem"], gamma=-1))
    assert cli.main(["solve", "--config", str(_write(tmp_path, bad)), "--out", str(tmp_path)]) == 2
    extra = dict(SHORT, bogus=1)
    assert cli.main(["solve", "--config", str(_write(tmp_path, extra)), "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{")
    assert cli.main(["solve", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2
    assert cli.main(["solve", "--config", str(_write(tmp_path, SHORT)), "--dt", "0.7",
                     "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as ei:
        cli.main(["solve", "--preset", "nope"])
    assert ei.value.code == 2


def test_config_error_names_field(tmp_path):
    bad = dict(SHORT, solver={"dt": 0.5, "scheme": "leapfrog"})
    with pytest.raises(cli.ConfigError) as ei:
        cli.validate_config(bad)
    assert ei.value.field == "solver.scheme"


def test_exit_code_precondition(tmp_path):
    cfg = dict(SHORT, problem=dict(SHORT["problem"], mu=1.0))
    assert cli.main(["asymptotic", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path)]) == 2


def test_exit_code_resource_limit(tmp_path):
    cfg = dict(SHORT, multi_asset={"node_cap": 2})
    assert cli.main(["multi", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path)]) == 2


def test_exit_code_numerical_failure(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalFailure("no bracket", bracket=(0.0, 1.0))
    monkeypatch.setattr(cli, "solve_theta", boom)
    assert cli.main(["solve", "--config", str(_write(tmp_path, SHORT)), "--out", str(tmp_path)]) == 3
