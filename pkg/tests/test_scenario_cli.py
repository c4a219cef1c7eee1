import json
from pathlib import Path

import numpy as np
import pytest

from siws.cli import main
from siws.errors import SchemaError, ValidationError
from siws.report import analysis_report
from siws.runner import run_scenario
from siws.scenario import (
    bundled_scenario_path,
    bundled_scenarios,
    dumps_scenario,
    load_scenario,
    loads_scenario,
)
from siws.spectral import layer_abscissa

SMALL = """\
schema_version: 1
name: pair
resource: true
layers:
- beta:
  - [2.0, 0.1]
  - [0.1, 2.0]
  delta: [1.0, 3.0]
  beta_w: [0.2, 0.2]
  c: [0.5, 0.5]
  delta_w: 1.0
- beta:
  - [2.0, 0.1]
  - [0.1, 2.0]
  delta: [3.0, 1.0]
  beta_w: [0.2, 0.2]
  c: [0.5, 0.5]
  delta_w: 1.0
initial:
  p:
  - [0.3, 0.1]
  - [0.1, 0.3]
  z: [0.1, 0.1]
t_end: 100.0
seed: 4
"""

RAW = """\
schema_version: 1
name: raw_pair
raw:
  N: [100.0, 200.0]
  mu: [0.1, 0.1]
  gamma: [[0.9, 0.9]]
  alpha:
  - [[1.0, 0.5], [0.5, 1.0]]
  alpha_w: [[0.5, 0.5]]
  zeta: [[1.0, 1.0]]
  delta_w: [1.0]
initial:
  p: [[0.1, 0.1]]
  z: [0.0]
t_end: 10.0
"""


@pytest.mark.parametrize("name", bundled_scenarios())
def test_bundled_round_trip_is_byte_identical(name):
    text = Path(bundled_scenario_path(name)).read_text(encoding="utf-8")
    assert dumps_scenario(loads_scenario(text)) == text


def test_small_round_trip():
    sc = loads_scenario(SMALL)
    again = loads_scenario(dumps_scenario(sc))
    assert dumps_scenario(again) == dumps_scenario(sc)
    assert sc.seed == 4


def test_raw_form_is_normalized_and_kept():
    sc = loads_scenario(RAW)
    layer = sc.system.layers[0]
    assert layer.B[0, 1] == pytest.approx(1.0)
    assert layer.c == pytest.approx([1 / 3, 2 / 3])
    assert "raw:" in dumps_scenario(sc)


def _field_error(text):
    with pytest.raises(SchemaError) as info:
        loads_scenario(text)
    return info.value


def test_unknown_key_reports_line():
    err = _field_error(SMALL.replace("seed: 4", "sede: 4"))
    assert err.field == "sede" and err.line == 25


def test_wrong_shape_reports_field():
    err = _field_error(SMALL.replace("delta: [3.0, 1.0]", "delta: [3.0]"))
    assert err.field == "layers[1].delta"
    assert err.line == 15
    assert "line 15" in str(err)


def test_both_raw_and_layers_rejected():
    text = SMALL + "raw:\n  N: [1.0]\n"
    err = _field_error(text)
    assert "exactly one" in str(err)


def test_schema_version_required():
    err = _field_error(SMALL.replace("schema_version: 1", "schema_version: 2"))
    assert err.field == "schema_version" and err.line == 1


def test_invalid_yaml_has_line():
    err = _field_error("schema_version: 1\nname: [oops\n")
    assert err.line is not None


def test_initial_outside_domain():
    text = SMALL.replace("- [0.3, 0.1]\n  - [0.1, 0.3]", "- [0.7, 0.1]\n  - [0.4, 0.3]")
    with pytest.raises(ValidationError, match="outside the domain"):
        loads_scenario(text)


def test_assumption_violation_rejected():
    with pytest.raises(ValidationError, match="virus 1"):
        loads_scenario(SMALL.replace("delta: [1.0, 3.0]", "delta: [0.0, 3.0]"))


def test_events_must_increase():
    text = SMALL + ("events:\n- {t: 2.0, virus: 1, delta: [1.0, 1.0]}\n"
                    "- {t: 1.0, virus: 1, delta: [1.0, 1.0]}\n")
    assert _field_error(text).field == "events[1].t"


def test_report_values_match_module_calls():
    sc = loads_scenario(SMALL)
    doc = analysis_report(sc)
    for k, layer in enumerate(sc.system.layers):
        assert doc["viruses"][k]["s"]["value"] == layer_abscissa(layer)
    assert doc["coexistence"]["verdict"] == "sufficient_coexist"


# -- CLI ---------------------------------------------------------------------

@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "pair.yaml"
    path.write_text(SMALL, encoding="utf-8")
    return path


def test_analyze_is_deterministic(small_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["analyze", str(small_file), "--out", str(a)]) == 0
    assert main(["analyze", str(small_file), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["schema_version"] == 1
    assert [e["kind"] for e in doc["equilibria"]] == [
        "healthy", "single_virus", "single_virus", "coexisting"]


def test_simulate_outputs(small_file, tmp_path):
    out1, out2 = tmp_path / "one", tmp_path / "two"
    assert main(["simulate", str(small_file), "--out", str(out1)]) == 0
    assert main(["simulate", str(small_file), "--out", str(out2)]) == 0
    for suffix in (".csv", "_summary.json", ".svg"):
        first = (out1 / f"pair{suffix}").read_bytes()
        assert first == (out2 / f"pair{suffix}").read_bytes()
    csv = (out1 / "pair.csv").read_bytes()
    assert b"\r" not in csv
    lines = csv.decode().splitlines()
    assert lines[0] == "t,p[1][1],p[1][2],p[2][1],p[2][2],z[1],z[2],pbar[1],pbar[2]"
    row = [float(v) for v in lines[-1].split(",")]
    assert row[7] == pytest.approx((row[1] + row[2]) / 2, abs=1e-15)
    summary = json.loads((out1 / "pair_summary.json").read_text())
    assert summary["regime"] == "coexisting"


def test_csv_full_precision(small_file, tmp_path):
    assert main(["simulate", str(small_file), "--out", str(tmp_path), "--format", "csv",
                 "--t-end", "1"]) == 0
    lines = (tmp_path / "pair.csv").read_text().splitlines()
    sc = load_scenario(small_file)
    run = run_scenario(sc, t_end=1.0)
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    np.testing.assert_array_equal(values[:, 1], run.states[:, 0, 0])


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SMALL.replace("t_end: 100.0", "t_end: -1.0"))
    assert main(["analyze", str(bad)]) == 2
    assert "t_end" in capsys.readouterr().err
    assert main(["analyze", str(tmp_path / "missing.yaml")]) == 2
    # A step budget this small cannot reach t_end.
    starved = tmp_path / "starved.yaml"
    starved.write_text(SMALL + "controls:\n  max_steps: 5\n")
    assert main(["simulate", str(starved), "--out", str(tmp_path), "--format", "json"]) == 3
    assert "budget" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    from siws import cli
    from siws.errors import NumericalError

    def boom(*_a, **_k):
        raise NumericalError("forced")

    monkeypatch.setattr(cli, "analysis_report", boom)
    assert main(["analyze", "stockholm_fig5", "--out", str(tmp_path)]) == 3


def test_mitigate_writes_plan_and_scenario(tmp_path):
    assert main(["mitigate", "stockholm_fig4", "--strategy", "virus_as_vaccine",
                 "--keep-satisfied", "--out", str(tmp_path)]) == 0
    plan = json.loads((tmp_path / "stockholm_fig4_virus_as_vaccine_plan.json").read_text())
    assert plan["cost"] == pytest.approx(30.7, abs=1e-12)
    derived = load_scenario(tmp_path / "stockholm_fig4_virus_as_vaccine.yaml")
    assert len(derived.events) == 1 and derived.events[0].t == 0.5
    assert main(["mitigate", "stockholm_fig4", "--strategy", "heal_boost", "--virus", "5",
                 "--out", str(tmp_path)]) == 2


def test_sweep_merges_by_name(small_file, tmp_path):
    out = tmp_path / "sweep.json"
    assert main(["sweep", str(small_file), "stockholm_fig5", "--jobs", "2",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert list(doc["scenarios"]) == ["pair", "stockholm_fig5"]
    assert doc["scenarios"]["stockholm_fig5"]["simulation"]["regime"] == \
        "single_virus_endemic"
    assert main(["sweep", str(small_file), str(small_file), "--out", str(out)]) == 2


def test_schema_doc_example_loads():
    import re

    doc = Path(__file__).resolve().parents[1] / "docs" / "scenario_schema.md"
    example = re.findall(r"```yaml\n(.*?)```", doc.read_text(encoding="utf-8"), re.S)[-1]
    sc = loads_scenario(example)
    assert sc.name == "pair" and sc.controls.rtol == 1e-8 and len(sc.events) == 1
