import json
from pathlib import Path

import pytest

from transportlab.cli import main
from transportlab.errors import ValidationError
from transportlab.experiments import default_config, list_experiments, run, validate


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def small_commutator_config(drift=None):
    cfg = default_config("commutator-study")
    cfg["seed"] = 1
    cfg["grid"] = {"lo": [-2.2], "hi": [2.2], "n": [1127]}
    cfg["ladder"] = [0.2, 0.1, 0.05]
    cfg["pointwise_ladder"] = [0.2, 0.1]
    if drift:
        cfg["drift"] = drift
    return cfg


def test_list_experiments_table():
    rows = list_experiments()
    ids = [r[0] for r in rows]
    assert len(ids) == len(set(ids)) and len(ids) >= 6
    anchors = dict((r[0], r[2]) for r in rows)
    assert "compressible shear flow" in anchors["shear-uniqueness"]
    assert "commutator" in anchors["commutator-study"]


def test_validate_clean_defaults():
    for exp_id, _, _ in list_experiments():
        cfg = default_config(exp_id)
        cfg["seed"] = 7
        assert validate(cfg) == [], exp_id


def test_validate_reports_violations():
    cfg = small_commutator_config()
    cfg["ladder"] = [0.2, 0.1, 0.001]  # eps < 2h
    msgs = validate(cfg)
    assert any("eps >= 2h" in m for m in msgs)

    cfg = small_commutator_config()
    del cfg["seed"]
    assert any("seed" in m for m in msgs + validate(cfg))

    assert validate({"experiment": "nope"}) != []
    assert validate({}) != []

    cfg = small_commutator_config(drift={"name": "unknown-drift"})
    assert validate(cfg) != []


def test_run_commutator_constant_drift(tmp_path):
    cfg = small_commutator_config(drift={"name": "constant", "params": {"c": [2.0]}})
    cfg["pointwise"] = False
    report = run(cfg, tmp_path)
    assert report.passed
    assert max(report.metrics["l1_values"]) <= 1e-10
    data = json.loads((tmp_path / "commutator-study-report.json").read_text())
    assert data["passed"] is True
    assert (tmp_path / "commutator-l1.csv").exists()


def test_run_refuses_invalid_config(tmp_path):
    cfg = small_commutator_config()
    cfg["ladder"] = [0.0001]
    with pytest.raises(ValidationError):
        run(cfg, tmp_path)


def test_reproducibility_byte_identical(tmp_path):
    cfg = small_commutator_config()
    r1 = run(cfg, tmp_path / "a")
    r2 = run(cfg, tmp_path / "b")
    for name in ("commutator-l1.csv", "commutator-pointwise.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert r1.metrics == r2.metrics


def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfg = default_config("anisotropy-study")
    cfg["seed"] = 9
    path = write_config(tmp_path, cfg)
    code = main(["run", "--config", path, "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS] rank-one-smallness" in out
    assert (tmp_path / "out" / "anisotropy-study-report.json").exists()

    # budget 1 cannot shrink Lambda on orthogonal vectors: check fails -> 1
    cfg["budget"] = 1
    path = write_config(tmp_path, cfg, "fail.json")
    code = main(["run", "--config", path, "--out", str(tmp_path / "out2")])
    assert code == 1
    assert "[FAIL] rank-one-smallness" in capsys.readouterr().out


def test_cli_validate_and_list(tmp_path, capsys):
    cfg = small_commutator_config()
    path = write_config(tmp_path, cfg)
    assert main(["validate", "--config", path]) == 0
    cfg["ladder"] = [0.00001]
    path2 = write_config(tmp_path, cfg, "bad.json")
    assert main(["validate", "--config", path2]) == 2
    assert main(["list"]) == 0
    assert "shear-uniqueness" in capsys.readouterr().out


def test_cli_missing_config_file():
    assert main(["run", "--config", "/does/not/exist.json"]) == 2


def test_cli_seed_override(tmp_path):
    cfg = default_config("anisotropy-study")
    path = write_config(tmp_path, cfg)  # no seed in file
    code = main(["run", "--config", path, "--seed", "33", "--out", str(tmp_path / "o")])
    assert code == 0
    data = json.loads((tmp_path / "o" / "anisotropy-study-report.json").read_text())
    assert data["config"]["seed"] == 33


def test_shipped_configs_validate():
    for path in sorted(Path(__file__).resolve().parent.parent.glob("configs/*.json")):
        cfg = json.loads(path.read_text())
        assert validate(cfg) == [], path.name
