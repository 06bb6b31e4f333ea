"""Scenario files (TOML) and report serialization.

Node numbers in files are 1-based; everything in memory is 0-based.
"""

from __future__ import annotations

import csv
import io
import logging
from importlib import resources
from pathlib import Path

import numpy as np
import tomlkit
from tomlkit.exceptions import ParseError

from .errors import DisconnectedGridError, ScenarioParseError, ValidationError
from .grid import GridTopology, Line, connectivity_check
from .plant import DEFAULT_K_V, Disturbance, SystemParams, SystemState
from .sim import EQUILIBRIUM, Scenario

log = logging.getLogger(__name__)

SCHEMA = {
    "grid": {"nodes", "lines"},
    "params": {"inertia", "capacitance", "k_omega", "k_droop", "k_v", "v_ref", "p_nom",
               "p_inj_nom", "omega_ref", "v_nom"},
    "disturbance": {"p_m", "steps"},
    "sim": {"t_end_s", "dt_max_s", "model", "output_grid_s", "initial_state", "rtol", "atol",
            "fixed_step", "record_steps"},
}
LINE_KEYS = {"from", "to", "resistance_pu", "reactance_pu"}
STEP_KEYS = {"time_s", "p_m"}
STATE_KEYS = {"omega", "voltage"}
PER_NODE = ("inertia", "capacitance", "k_omega", "k_droop", "k_v", "v_ref", "p_nom", "p_inj_nom")

BUNDLED = {"paper_3area": "paper_3area.scenario"}


def bundled_path(name: str) -> Path:
    stem = name[:-len(".scenario")] if name.endswith(".scenario") else name
    return Path(str(resources.files("mtdc_droop") / "data" / BUNDLED[stem]))


def resolve_scenario_path(name) -> Path:
    """A filesystem path if it exists, else a bundled scenario of that name."""
    p = Path(name)
    if p.exists():
        return p
    stem = p.name[:-len(".scenario")] if p.name.endswith(".scenario") else p.name
    if stem in BUNDLED:
        return bundled_path(stem)
    raise ValidationError(f"scenario file not found: {name}")


def _unknown(keys, allowed, where, strict):
    extra = sorted(set(keys) - set(allowed))
    if not extra:
        return
    msg = f"unknown key(s) in {where}: {', '.join(extra)}"
    if strict:
        raise ValidationError(msg)
    log.warning(msg)


def _num(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{field}: expected a number, got {value!r}")
    return float(value)


def _vector(value, n, field):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(n, float(value))
    if not isinstance(value, list):
        raise ValidationError(f"{field}: expected a list of {n} numbers")
    if len(value) != n:
        raise ValidationError(f"{field}: expected {n} values, got {len(value)}")
    return np.array([_num(v, f"{field}[{k + 1}]") for k, v in enumerate(value)])


def _require(table, key, where):
    if key not in table:
        raise ValidationError(f"{where}.{key}: missing")
    return table[key]


def _wrap(where, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ScenarioParseError:
        raise
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def scenario_from_dict(doc: dict, strict: bool = True) -> Scenario:
    _unknown(doc.keys(), SCHEMA, "top level", strict)
    for sec in ("grid", "params", "sim"):
        if sec not in doc:
            raise ValidationError(f"[{sec}]: missing section")
    for sec, keys in SCHEMA.items():
        if sec in doc:
            _unknown(doc[sec].keys(), keys, f"[{sec}]", strict)

    g = doc["grid"]
    n = _require(g, "nodes", "grid")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError(f"grid.nodes: expected a positive integer, got {n!r}")
    lines = []
    for k, ln in enumerate(g.get("lines", [])):
        where = f"grid.lines[{k + 1}]"
        _unknown(ln.keys(), LINE_KEYS, where, strict)
        i, j = _require(ln, "from", where), _require(ln, "to", where)
        if isinstance(i, bool) or isinstance(j, bool) or not isinstance(i, int) or not isinstance(j, int):
            raise ValidationError(f"{where}: from/to must be integers")
        name = f"{where} (line {i}-{j})"
        r = _num(_require(ln, "resistance_pu", where), f"{name}.resistance_pu")
        if not r > 0:
            raise ValidationError(f"{name}.resistance_pu: must be > 0, got {r}")
        x = ln.get("reactance_pu")
        lines.append(Line(i - 1, j - 1, r, None if x is None else _num(x, f"{name}.reactance_pu")))
    topology = _wrap("grid", GridTopology, n, tuple(lines))
    connected, labels = connectivity_check(topology)
    if not connected:
        raise DisconnectedGridError([np.flatnonzero(labels == c).tolist() for c in np.unique(labels)])

    p = doc["params"]
    vecs = {}
    for key in PER_NODE:
        if key == "k_v" and key not in p:
            continue
        vecs[key] = _vector(_require(p, key, "params"), n, f"params.{key}")
    k_v_defaulted = "k_v" not in vecs
    if k_v_defaulted:
        log.warning("params.k_v not given; using the exploratory default %g", DEFAULT_K_V)
        vecs["k_v"] = np.full(n, DEFAULT_K_V)
    params = _wrap("params", SystemParams, **vecs,
                   omega_ref=_num(p.get("omega_ref", 1.0), "params.omega_ref"),
                   v_nom=_num(p.get("v_nom", 1.0), "params.v_nom"),
                   k_v_defaulted=k_v_defaulted)

    d = doc.get("disturbance", {})
    pm0 = _vector(d.get("p_m", [0.0] * n), n, "disturbance.p_m")
    steps = []
    for k, st in enumerate(d.get("steps", [])):
        where = f"disturbance.steps[{k + 1}]"
        _unknown(st.keys(), STEP_KEYS, where, strict)
        steps.append((_num(_require(st, "time_s", where), f"{where}.time_s"),
                      _vector(_require(st, "p_m", where), n, f"{where}.p_m")))
    disturbance = _wrap("disturbance", Disturbance, pm0, tuple(steps))

    s = doc["sim"]
    init = s.get("initial_state", EQUILIBRIUM)
    if isinstance(init, dict):
        _unknown(init.keys(), STATE_KEYS, "sim.initial_state", strict)
        init = SystemState(_vector(_require(init, "omega", "sim.initial_state"), n, "sim.initial_state.omega"),
                           _vector(_require(init, "voltage", "sim.initial_state"), n, "sim.initial_state.voltage"))
    kwargs = dict(
        t_end=_num(_require(s, "t_end_s", "sim"), "sim.t_end_s"),
        dt_max=_num(_require(s, "dt_max_s", "sim"), "sim.dt_max_s"),
        model=str(s.get("model", "linear")),
        initial_state=init,
        output_grid=_num(s.get("output_grid_s", 0.01), "sim.output_grid_s"),
    )
    for key in ("rtol", "atol"):
        if key in s:
            kwargs[key] = _num(s[key], f"sim.{key}")
    for key in ("fixed_step", "record_steps"):
        if key in s:
            if not isinstance(s[key], bool):
                raise ValidationError(f"sim.{key}: expected true/false")
            kwargs[key] = bool(s[key])
    return _wrap("scenario", Scenario, params, topology, disturbance, **kwargs)


def parse_scenario(text: str, strict: bool = True, path=None) -> Scenario:
    try:
        doc = tomlkit.parse(text).unwrap()
    except ParseError as exc:
        raise ScenarioParseError(str(exc), exc.line, exc.col, path) from None
    return scenario_from_dict(doc, strict)


def load_scenario(path, strict: bool = True) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text, strict, path)


def _floats(a):
    return [float(v) for v in np.asarray(a)]


def scenario_to_dict(sc: Scenario) -> dict:
    p = sc.params
    params = {}
    for key in PER_NODE:
        if key == "k_v" and p.k_v_defaulted:
            continue
        params[key] = _floats(getattr(p, key))
    params["omega_ref"] = p.omega_ref
    params["v_nom"] = p.v_nom

    lines = []
    for ln in sc.topology.lines:
        row = {"from": ln.i + 1, "to": ln.j + 1, "resistance_pu": ln.resistance}
        if ln.reactance is not None:
            row["reactance_pu"] = ln.reactance
        lines.append(row)

    if isinstance(sc.initial_state, str):
        init = sc.initial_state
    else:
        init = {"omega": _floats(sc.initial_state.omega), "voltage": _floats(sc.initial_state.voltage)}
    return {
        "grid": {"nodes": sc.topology.n_nodes, "lines": lines},
        "params": params,
        "disturbance": {
            "p_m": _floats(sc.disturbance.p_m),
            "steps": [{"time_s": t, "p_m": _floats(v)} for t, v in sc.disturbance.steps],
        },
        "sim": {
            "t_end_s": sc.t_end, "dt_max_s": sc.dt_max, "model": sc.model,
            "output_grid_s": sc.output_grid, "initial_state": init,
            "rtol": sc.rtol, "atol": sc.atol,
            "fixed_step": sc.fixed_step, "record_steps": sc.record_steps,
        },
    }


def dump_scenario(sc: Scenario) -> str:
    return tomlkit.dumps(scenario_to_dict(sc))


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(sc))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) + 0.0  # no negative zeros in reports
    return obj


def report_text(sections: dict) -> str:
    """Hierarchical key/value report document (TOML)."""
    return tomlkit.dumps(_plain(sections))


def csv_rows(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else f"{v:.9g}" if isinstance(v, float) else v)
                         for k, v in _plain(row).items()})
    return buf.getvalue()
