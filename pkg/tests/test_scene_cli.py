"""Scene validation, report schema conformance, CLI behavior, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from finslergeo import cli
from finslergeo.scene import SceneError, load_scene, parse_report, render_json, run_scene

REPO = Path(__file__).resolve().parents[1]
SCHEMA_DIR = REPO / "docs" / "schemas"


def szabo_scene(**options):
    doc = {
        "lagrangian": {
            "catalog": "szabo-counterexample",
            "overrides": {"p": 2, "c": 1, "m": 0, "phi": "x"},
        }
    }
    if options:
        doc["options"] = options
    return doc


def minkowski_scene():
    return {
        "chart": {"dim": 4},
        "lagrangian": {"dsl": {"source": "dx0^2 - dx1^2 - dx2^2 - dx3^2"}},
        "samples": [
            {"x": [0, 0, 0, 0], "xdot": [1, 0, 0, 0], "label": "timelike"},
            {"x": [0, 0, 0, 0], "xdot": [1, 1, 0, 0], "label": "null"},
        ],
    }


# -- validation --------------------------------------------------------------------


def test_missing_lagrangian_pointer():
    with pytest.raises(SceneError) as err:
        load_scene({"chart": {"dim": 4}})
    assert err.value.pointer == "/lagrangian"


def test_bad_sample_length_pointer():
    doc = minkowski_scene()
    doc["samples"][1]["xdot"] = [1, 0]
    with pytest.raises(SceneError) as err:
        load_scene(doc)
    assert err.value.pointer == "/samples/1/xdot"


def test_bad_expression_pointer():
    doc = {
        "chart": {"dim": 2},
        "lagrangian": {
            "family": {
                "alpha": [["1", "0"], ["0", "oops"]],
                "beta": ["1", "0"],
                "c": 1,
                "m": 0,
                "p": 2,
            }
        },
        "samples": [{"x": [0, 0], "xdot": [1, 0.1]}],
    }
    with pytest.raises(SceneError) as err:
        load_scene(doc)
    assert err.value.pointer == "/lagrangian/family/alpha/1/1"


def test_two_lagrangian_kinds_rejected():
    doc = minkowski_scene()
    doc["lagrangian"]["catalog"] = "minkowski4"
    with pytest.raises(SceneError) as err:
        load_scene(doc)
    assert err.value.pointer == "/lagrangian"


def test_chart_dim_mismatch_with_catalog():
    doc = {"chart": {"dim": 3}, "lagrangian": {"catalog": "minkowski4"}}
    with pytest.raises(SceneError) as err:
        load_scene(doc)
    assert err.value.pointer == "/chart/dim"


def test_unknown_convention_rejected():
    with pytest.raises(SceneError) as err:
        load_scene(szabo_scene(signature_convention="+-+-"))
    assert err.value.pointer == "/options/signature_convention"


def test_scene_schema_accepts_fixture_scenes():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((SCHEMA_DIR / "scene.schema.json").read_text())
    for doc in (szabo_scene(), minkowski_scene()):
        jsonschema.validate(doc, schema)
    shipped = json.loads((REPO / "scenes" / "szabo.json").read_text())
    jsonschema.validate(shipped, schema)


# -- reports -----------------------------------------------------------------------


def test_report_json_round_trip():
    scn = load_scene(minkowski_scene())
    report, _ = run_scene(scn, "report")
    text = render_json(report)
    assert parse_report(text) == report


def test_float_formatting_17_digits():
    text = render_json({"v": 0.1})
    assert "0.1000000000000000" in text
    assert json.loads(text)["v"] == 0.1


def test_reports_validate_against_schema():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((SCHEMA_DIR / "report.schema.json").read_text())
    for doc, sub in [
        (szabo_scene(), "report"),
        (szabo_scene(), "obstruction"),
        (szabo_scene(), "causal"),
        (minkowski_scene(), "report"),
        (minkowski_scene(), "probe"),
        (minkowski_scene(), "berwald"),
    ]:
        scn = load_scene(doc)
        report, _ = run_scene(scn, sub)
        jsonschema.validate(report, schema)


def test_nonmetricity_report_with_reference_metric():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((SCHEMA_DIR / "report.schema.json").read_text())
    ref = [
        ["v*(x)", "1", "0", "0"],
        ["1", "0", "0", "0"],
        ["0", "0", "1", "0"],
        ["0", "0", "0", "1"],
    ]
    scn = load_scene(szabo_scene(reference_metric=ref))
    report, code = run_scene(scn, "nonmetricity")
    jsonschema.validate(report, schema)
    qs = [e["Q_norm"] for e in report["geometry"]["nonmetricity"]["per_base_point"]]
    assert max(qs) > 0.1


def test_nonmetricity_requires_reference_metric():
    scn = load_scene(szabo_scene())
    with pytest.raises(SceneError):
        run_scene(scn, "nonmetricity")


def test_exit_codes():
    report, code = run_scene(load_scene(szabo_scene()), "report")
    assert code == 2
    assert not report["geometry"]["obstruction"]["metrizability_necessary_condition_met"]
    report, code = run_scene(load_scene(minkowski_scene()), "report")
    assert code == 0
    # flat geometry: all curvature zero in the per-sample blocks
    for s in report["samples"]:
        assert np.max(np.abs(np.array(s["ricci"]))) == 0.0


def test_causal_on_nonfamily_warns():
    report, code = run_scene(load_scene(minkowski_scene()), "causal")
    assert code == 0
    assert any("family" in w for w in report["warnings"])


def test_sample_errors_recorded_not_fatal():
    doc = szabo_scene()
    doc["samples"] = [
        {"x": [0, 1, 0.5, 0.3], "xdot": [0.0, 1.0, 0.1, 0.1], "label": "beta-zero"},
        {"x": [0, 1, 0.5, 0.3], "xdot": [1.0, 1.0, 0.1, 0.1], "label": "good"},
    ]
    report, code = run_scene(load_scene(doc), "probe")
    adm = report["samples"][0]["admissibility"]
    assert not adm["in_A"] and adm["failure_reason"] is not None
    assert report["samples"][1]["admissibility"]["in_A"]


def test_threads_do_not_change_report():
    r1, _ = run_scene(load_scene(szabo_scene()), "report")
    r2, _ = run_scene(load_scene(szabo_scene(threads=4)), "report")
    r1["metadata"].pop("subcommand")
    r2["metadata"].pop("subcommand")
    assert render_json(r1["samples"]) == render_json(r2["samples"])


# -- CLI ---------------------------------------------------------------------------


def _write_scene(tmp_path, doc, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_cli_report_counterexample(tmp_path, capsys):
    p = _write_scene(tmp_path, szabo_scene())
    code = cli.main(["report", str(p), "--out", str(tmp_path / "out")])
    assert code == 2
    out = capsys.readouterr().out
    assert "NON-METRIZABLE" in out
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["metadata"]["subcommand"] == "report"


def test_cli_minkowski_exit_zero(tmp_path):
    p = _write_scene(tmp_path, minkowski_scene())
    assert cli.main(["report", str(p), "--out", str(tmp_path / "out")]) == 0


def test_cli_causal_p_minus_two_warns(tmp_path, capsys):
    doc = {"lagrangian": {"catalog": "szabo-counterexample", "overrides": {"p": -2}}}
    p = _write_scene(tmp_path, doc)
    code = cli.main(["causal", str(p), "--out", str(tmp_path / "out")])
    assert code == 0
    out = capsys.readouterr().out
    assert "NOT viable" in out
    assert "warning" in out


def test_cli_scene_error_exit_one(tmp_path, capsys):
    p = _write_scene(tmp_path, {"lagrangian": {"catalog": "nope"}})
    assert cli.main(["probe", str(p)]) == 1
    assert "scene error" in capsys.readouterr().err


def test_cli_missing_file_exit_one(tmp_path):
    assert cli.main(["probe", str(tmp_path / "missing.json")]) == 1


def test_cli_determinism_byte_identical(tmp_path):
    p = _write_scene(tmp_path, szabo_scene(seed=7))
    cli.main(["report", str(p), "--out", str(tmp_path / "a")])
    cli.main(["report", str(p), "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    assert a == b


def test_cli_seed_flag_overrides_scene(tmp_path):
    p = _write_scene(tmp_path, szabo_scene(seed=7))
    cli.main(["berwald", str(p), "--out", str(tmp_path / "a"), "--seed", "11"])
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["metadata"]["seed"] == 11


def test_cli_out_env_var(tmp_path, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("FINSLER_OUT_DIR", str(target))
    p = _write_scene(tmp_path, minkowski_scene())
    cli.main(["probe", str(p)])
    assert (target / "report.json").exists()


def test_cli_tolerance_flags_reach_report(tmp_path):
    p = _write_scene(tmp_path, minkowski_scene())
    cli.main(
        [
            "probe", str(p), "--out", str(tmp_path / "a"),
            "--tol-degenerate", "1e-8", "--tol-null", "1e-9",
        ]
    )
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["metadata"]["tolerances"]["degenerate"] == 1e-8
    assert report["metadata"]["tolerances"]["null"] == 1e-9
