import json

import pytest

from escapelab import __version__
from escapelab.cli import compare_golden, main, recipe_runs
from escapelab.experiment import ConfigError, ExperimentConfig, default_threads, run

INI = """
[system]
name = doubling
[potential]
kind = geometric
[hole]
center = 1/3
levels = 1..10
[analysis]
kind = escape
"""


def read_report(out_dir):
    (path,) = [p for p in out_dir.iterdir() if p.suffix == ".json"]
    return path.read_bytes(), json.loads(path.read_text())


def test_ini_and_json_configs_agree():
    a = ExperimentConfig.from_text(INI)
    doc = {"system": {"name": "doubling"}, "potential": {"kind": "geometric"},
           "hole": {"center": "1/3", "levels": "1..10"}, "analysis": {"kind": "escape"}}
    b = ExperimentConfig.from_text(json.dumps(doc))
    assert a.digest == b.digest
    assert a.get("tolerances", "tol") == "1e-13"  # defaults are recorded


@pytest.mark.parametrize("text, fragment", [
    ("[hole]\nradius = 3\n", "unknown key 'radius'"),
    ("[holes]\ncenter = 0\n", "unknown section [holes]"),
    ("[hole]\ncenter 0\n", "line 2"),
    ('{"hole": {"center": 0,}}', "line 1"),
])
def test_config_errors_carry_context(text, fragment):
    with pytest.raises(ConfigError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        ExperimentConfig.from_text(text)


def test_report_is_self_describing(tmp_path):
    assert main(["escape", "--center", "0", "--levels", "1..12", "--out-dir", str(tmp_path)]) == 0
    _, rep = read_report(tmp_path)
    assert rep["version"] == __version__
    assert len(rep["config_hash"]) == 16
    assert rep["tolerances"] == {"tol": 1e-13}
    assert rep["summary"]["extrapolated_limit"]["provenance"] == "extrapolated"
    assert rep["summary"]["theoretical_limit"] == {"value": 0.5, "provenance": "theory"}
    assert (tmp_path / f"escape-{rep['config_hash']}.csv").read_text().startswith("n,mu_Un,lambda_n,R_n,ratio,side")


def test_flags_and_config_file_give_identical_reports(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(INI.replace("[analysis]", "[tolerances]\ntol = 1e-13\n[output]\nformat = both\n[analysis]"))
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a")])
    main(["escape", "--center", "1/3", "--levels", "1..10", "--out-dir", str(tmp_path / "b")])
    assert read_report(tmp_path / "a")[0] == read_report(tmp_path / "b")[0]


def test_montecarlo_reports_are_byte_identical(tmp_path):
    args = ["montecarlo", "--hole", "0", "--k", "3", "--samples", "20000", "--seed", "7"]
    assert main(args + ["--threads", "1", "--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "4", "--out-dir", str(tmp_path / "b")]) == 0
    a, rep = read_report(tmp_path / "a")
    assert a == read_report(tmp_path / "b")[0]
    assert rep["summary"]["exact"]["value"] == pytest.approx(0.125)


def test_exit_codes(capsys):
    assert main(["escape", "--system", "no-such-system"]) == 1
    assert "unknown system" in capsys.readouterr().err
    assert main(["escape", "--potential", "bernoulli:0.5"]) == 1
    # a fat annulus violates the thinness threshold, which is only a warning
    assert main(["wbt", "--center", "0.5", "--radii", "0.3", "--beta", "1.0"]) == 2
    assert "warning:" in capsys.readouterr().out


def test_dimdrop_cli(capsys):
    assert main(["dimdrop", "--system", "cantor3", "--center", "nonperiodic", "--levels", "1..10"]) == 0
    out = capsys.readouterr().out
    assert "extrapolated_limit" in out and "[theory]" in out


def test_induce_cli(tmp_path):
    assert main(["induce", "--F", "1", "--center", "2/3", "--levels", "2..12", "--out-dir", str(tmp_path)]) == 0
    _, rep = read_report(tmp_path)
    assert rep["summary"]["kac_gap"]["value"] <= rep["summary"]["kac_width"]["value"]
    assert rep["summary"]["ldp_gap_negative"]["value"] is True
    assert len(rep["transfer"]) == 11


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("ESCAPELAB_THREADS", "3")
    assert default_threads() == 3


def test_reproduce_matches_golden(capsys):
    assert main(["reproduce", "kac-ldp-suite"]) == 0
    assert "all values match golden" in capsys.readouterr().out


def test_reproduce_detects_drift_and_missing_golden(tmp_path, capsys):
    golden = tmp_path / "kac-ldp-suite.golden.json"
    assert main(["reproduce", "kac-ldp-suite", "--golden-dir", str(tmp_path)]) == 1
    assert "missing" in capsys.readouterr().err
    main(["reproduce", "kac-ldp-suite", "--golden-dir", str(tmp_path), "--update-golden"])
    doc = json.loads(golden.read_text())
    doc["runs"]["doubling-lebesgue"]["kac_lhs"] = 2.1
    golden.write_text(json.dumps(doc))
    assert main(["reproduce", "kac-ldp-suite", "--golden-dir", str(tmp_path)]) == 1
    assert "golden mismatch: doubling-lebesgue.kac_lhs" in capsys.readouterr().out


def test_compare_golden_tolerances():
    golden = {"rtol": 1e-6, "atol": 0.0, "runs": {"a": {"x": 1.0, "ok": True}}}
    assert compare_golden({"a": {"x": 1.0 + 1e-8, "ok": True}}, golden) == []
    assert len(compare_golden({"a": {"x": 1.1, "ok": False}}, golden)) == 2


def test_recipes_are_valid_configs():
    for name in ("bunimovich-yurchenko", "ferguson-pollicott-drop", "kac-ldp-suite"):
        for spec in recipe_runs(name):
            ExperimentConfig(spec["config"])
