import logging

import numpy as np
import pytest

from mtdc_droop.errors import ScenarioParseError, ValidationError
from mtdc_droop.scenario_io import (bundled_path, csv_rows, dump_scenario, load_scenario,
                                    parse_scenario, report_text, resolve_scenario_path)

MINIMAL = """
[grid]
nodes = 2
lines = [{ from = 1, to = 2, resistance_pu = 0.5 }]

[params]
inertia = 1.0
capacitance = 1.0
k_omega = 2.0
k_droop = 3.0
k_v = 4.0
v_ref = 1.0
p_nom = 0.0
p_inj_nom = 0.0

[sim]
t_end_s = 2.0
dt_max_s = 0.01
"""


def _same_scenario(a, b):
    for f in ("inertia", "capacitance", "k_omega", "k_droop", "k_v", "v_ref", "p_nom", "p_inj_nom"):
        assert np.array_equal(getattr(a.params, f), getattr(b.params, f)), f
    assert (a.params.omega_ref, a.params.v_nom, a.params.k_v_defaulted) == \
        (b.params.omega_ref, b.params.v_nom, b.params.k_v_defaulted)
    assert a.topology == b.topology
    assert np.array_equal(a.disturbance.p_m, b.disturbance.p_m)
    assert len(a.disturbance.steps) == len(b.disturbance.steps)
    for (t1, v1), (t2, v2) in zip(a.disturbance.steps, b.disturbance.steps):
        assert t1 == t2 and np.array_equal(v1, v2)
    for f in ("t_end", "dt_max", "model", "output_grid", "rtol", "atol", "fixed_step", "record_steps"):
        assert getattr(a, f) == getattr(b, f), f
    if isinstance(a.initial_state, str):
        assert a.initial_state == b.initial_state
    else:
        assert np.array_equal(a.initial_state.to_vector(), b.initial_state.to_vector())


def test_bundled_three_area_scenario():
    sc = load_scenario(bundled_path("paper_3area"))
    assert sc.topology.n_nodes == 3
    got = {(ln.i + 1, ln.j + 1): ln.resistance for ln in sc.topology.lines}
    assert got == {(1, 2): 0.0015, (1, 3): 0.0045, (2, 3): 0.0015}
    assert np.array_equal(sc.params.k_omega, [501.0] * 3)
    assert np.array_equal(sc.params.k_droop, [667.0] * 3)
    (t, pm), = sc.disturbance.steps
    assert t == 1.0 and np.array_equal(pm, [-0.1, 0.0, 0.0])
    assert not sc.params.k_v_defaulted


def test_resolve_by_name(tmp_path):
    assert resolve_scenario_path("paper_3area.scenario") == bundled_path("paper_3area")
    with pytest.raises(ValidationError, match="not found"):
        resolve_scenario_path(tmp_path / "missing.scenario")


@pytest.mark.parametrize("source", ["bundled", "minimal"])
def test_round_trip(source, tmp_path):
    sc = load_scenario(bundled_path("paper_3area")) if source == "bundled" else parse_scenario(MINIMAL)
    path = tmp_path / "again.scenario"
    path.write_text(dump_scenario(sc))
    _same_scenario(sc, load_scenario(path))


def test_zero_resistance_names_line():
    text = MINIMAL.replace("resistance_pu = 0.5", "resistance_pu = 0.0")
    with pytest.raises(ValidationError, match=r"line 1-2.*resistance_pu.*> 0"):
        parse_scenario(text)


def test_parse_error_has_position(tmp_path):
    path = tmp_path / "bad.scenario"
    path.write_text("[grid]\nnodes = 3\nlines = [ {from = 1, \n")
    with pytest.raises(ScenarioParseError) as exc:
        load_scenario(path)
    assert exc.value.line is not None and exc.value.col is not None
    assert str(path) in str(exc.value)


def test_unknown_keys_strict_and_lax(caplog):
    text = MINIMAL.replace("[sim]", "[sim]\nsolver = \"rk4\"")
    with pytest.raises(ValidationError, match="unknown key.*solver"):
        parse_scenario(text)
    with caplog.at_level(logging.WARNING):
        sc = parse_scenario(text, strict=False)
    assert "solver" in caplog.text
    assert sc.t_end == 2.0


def test_missing_k_v_defaults_with_warning(caplog):
    text = MINIMAL.replace("k_v = 4.0\n", "")
    with caplog.at_level(logging.WARNING):
        sc = parse_scenario(text)
    assert sc.params.k_v_defaulted and np.array_equal(sc.params.k_v, [10.0, 10.0])
    assert "k_v" in caplog.text
    assert "k_v" not in dump_scenario(sc)


@pytest.mark.parametrize("old, new, fragment", [
    ("nodes = 2", "nodes = 0", "grid.nodes"),
    ("k_droop = 3.0", "k_droop = [3.0, -1.0]", r"k_droop.*\[2\]"),
    ("k_droop = 3.0", "k_droop = [3.0]", "expected 2 values"),
    ("t_end_s = 2.0", "t_end_s = \"long\"", "t_end_s"),
    ("lines = [{ from = 1, to = 2, resistance_pu = 0.5 }]", "lines = []", "not connected"),
])
def test_validation_messages(old, new, fragment):
    with pytest.raises(ValidationError, match=fragment):
        parse_scenario(MINIMAL.replace(old, new))


def test_report_and_rows():
    text = report_text({"block": {"x": np.float64(-0.0), "ok": np.bool_(True), "v": np.arange(2)}})
    assert "x = 0.0" in text and "ok = true" in text and "v = [0, 1]" in text
    rows = csv_rows([{"a": 1.0 / 3, "b": None, "c": True}])
    assert rows == "a,b,c\n0.333333333,,True\n"
    assert csv_rows([]) == ""
