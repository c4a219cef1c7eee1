"""Scenario files: YAML load/save plus the bundled Stockholm study.

The schema is documented in ``docs/scenario_schema.md``. Saving is canonical:
fixed key order, flow-style rows for numeric lists and shortest round-trip
float formatting, so ``save(load(text)) == text`` for canonical files.
"""

from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import Controls, domain_violation
from .errors import SchemaError, ValidationError
from .netmodel import (
    MultiVirusSystem,
    RawModel,
    VirusLayer,
    normalize,
    validate_assumption1,
)

__all__ = [
    "SCHEMA_VERSION",
    "Event",
    "Scenario",
    "load_scenario",
    "loads_scenario",
    "save_scenario",
    "dumps_scenario",
    "bundled_scenario_path",
    "bundled_scenarios",
    "stockholm_adjacency",
    "stockholm_layer",
    "stockholm_scenario",
]

SCHEMA_VERSION = 1
_TOP_KEYS = ("schema_version", "name", "description", "resource", "raw", "layers",
             "initial", "t_end", "controls", "events", "seed")
_RAW_KEYS = ("N", "mu", "gamma", "alpha", "alpha_w", "zeta", "delta_w")
_LAYER_KEYS = ("beta", "delta", "beta_w", "c", "delta_w")


@dataclass(frozen=True)
class Event:
    """At time ``t`` replace the node healing rates of ``virus`` (1-based)."""

    t: float
    virus: int
    delta: np.ndarray


@dataclass(frozen=True)
class Scenario:
    """A runnable setup: model, initial state, horizon, controls and events.

    ``raw`` is kept when the file gave raw parameters, so saving writes the
    same form back.
    """

    name: str
    system: MultiVirusSystem
    initial: np.ndarray
    t_end: float
    controls: Controls = field(default_factory=Controls)
    events: tuple = ()
    seed: int = 0
    description: str = ""
    raw: RawModel = None

    def with_events(self, events):
        return replace(self, events=tuple(events))


# -- parsing -----------------------------------------------------------------

def _line_index(text):
    """Map dotted field paths to 1-based line numbers."""
    index = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = f"{path}.{key.value}" if path else str(key.value)
                index[sub] = key.start_mark.line + 1
                walk(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                sub = f"{path}[{i}]"
                index[sub] = item.start_mark.line + 1
                walk(item, sub)

    try:
        walk(yaml.compose(text, Loader=yaml.SafeLoader), "")
    except yaml.YAMLError:
        pass
    return index


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, message, path):
        line = self.lines.get(path)
        if line is None and "." in path:
            line = self.lines.get(path.rsplit(".", 1)[0])
        raise SchemaError(message, field=path, line=line)

    def mapping(self, value, path, allowed, required=()):
        if not isinstance(value, dict):
            self.fail("expected a mapping", path)
        for key in value:
            if key not in allowed:
                self.fail(f"unknown key {key!r}", f"{path}.{key}" if path else str(key))
        for key in required:
            if key not in value:
                self.fail(f"missing required key {key!r}", path or key)
        return value

    def number(self, value, path, positive=False, integer=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail("expected a number", path)
        if integer and not isinstance(value, int):
            self.fail("expected an integer", path)
        if positive and not value > 0:
            self.fail("expected a positive number", path)
        return value if integer else float(value)

    def array(self, value, path, shape):
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail("expected a numeric array", path)
        if isinstance(value, bool) or arr.shape != shape or np.any(~np.isfinite(arr)):
            self.fail(f"expected finite numbers of shape {shape}, got {arr.shape}", path)
        return arr


def _parse_raw(r, value, m, n):
    value = r.mapping(value, "raw", _RAW_KEYS, _RAW_KEYS)
    shapes = {"N": (n,), "mu": (n,), "gamma": (m, n), "alpha": (m, n, n),
              "alpha_w": (m, n), "zeta": (m, n), "delta_w": (m,)}
    arrays = {k: r.array(value[k], f"raw.{k}", shapes[k]) for k in _RAW_KEYS}
    return RawModel(**arrays)


def _parse_layers(r, value, resource):
    if not isinstance(value, list) or not value:
        r.fail("expected a non-empty list of layers", "layers")
    keys = _LAYER_KEYS if resource else ("beta", "delta")
    out = []
    for k, item in enumerate(value):
        path = f"layers[{k}]"
        item = r.mapping(item, path, keys, keys)
        beta = np.array(item["beta"], dtype=float) if isinstance(item["beta"], list) else None
        if beta is None or beta.ndim != 2:
            r.fail("expected a square matrix", f"{path}.beta")
        n = beta.shape[0]
        beta = r.array(item["beta"], f"{path}.beta", (n, n))
        delta = r.array(item["delta"], f"{path}.delta", (n,))
        if resource:
            out.append(VirusLayer(
                B=beta, D=delta,
                b=r.array(item["beta_w"], f"{path}.beta_w", (n,)),
                c=r.array(item["c"], f"{path}.c", (n,)),
                delta_w=r.number(item["delta_w"], f"{path}.delta_w")))
        else:
            out.append(VirusLayer.sis(beta, delta))
    ns = {layer.n for layer in out}
    if len(ns) != 1:
        r.fail("layers disagree on the node count", "layers")
    return out


def loads_scenario(text):
    """Parse scenario text.

    Raises:
        SchemaError: malformed YAML or a field violating the schema; the
            message names the field and line.
        ValidationError: the model violates the positivity assumption or the
            initial state lies outside the domain.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=None if mark is None else mark.line + 1) from None
    r = _Reader(_line_index(text))
    data = r.mapping(data, "", _TOP_KEYS,
                     ("schema_version", "name", "initial", "t_end"))
    if data["schema_version"] != SCHEMA_VERSION:
        r.fail(f"unsupported schema_version {data['schema_version']!r}, "
               f"expected {SCHEMA_VERSION}", "schema_version")
    name = data["name"]
    if not isinstance(name, str) or not name:
        r.fail("expected a non-empty string", "name")
    description = data.get("description", "")
    if not isinstance(description, str):
        r.fail("expected a string", "description")
    resource = data.get("resource", True)
    if not isinstance(resource, bool):
        r.fail("expected true or false", "resource")

    if ("raw" in data) == ("layers" in data):
        r.fail("give exactly one of 'raw' and 'layers'", "raw" if "raw" in data else "layers")
    raw = None
    if "raw" in data:
        value = data["raw"]
        try:
            m, n = np.shape(value["gamma"])
        except (TypeError, ValueError, KeyError):
            r.fail("raw.gamma must be an m x n matrix", "raw.gamma")
        raw = _parse_raw(r, value, m, n)
        system = normalize(raw, resource=resource)
    else:
        system = MultiVirusSystem(tuple(_parse_layers(r, data["layers"], resource)))
    m, n = system.m, system.n

    violations = validate_assumption1(system)
    if violations:
        raise ValidationError("; ".join(str(v) for v in violations))

    init = r.mapping(data["initial"], "initial", ("p", "z"),
                     ("p", "z") if resource else ("p",))
    if not resource and "z" in init:
        r.fail("z is not allowed when the resource is disabled", "initial.z")
    p0 = r.array(init["p"], "initial.p", (m, n))
    initial = p0 if not resource else np.column_stack(
        [p0, r.array(init["z"], "initial.z", (m,))])
    excess = domain_violation(system, initial)
    if excess > 0:
        raise ValidationError(
            f"initial state lies outside the domain by {excess:.3g} "
            "(fractions must be in [0, 1] with per-node totals at most 1, z >= 0)")

    t_end = r.number(data["t_end"], "t_end", positive=True)
    controls = Controls()
    if "controls" in data:
        names = tuple(f.name for f in fields(Controls))
        ctl = r.mapping(data["controls"], "controls", names)
        kwargs = {}
        for key, value in ctl.items():
            path = f"controls.{key}"
            if key == "stop_on_convergence":
                if not isinstance(value, bool):
                    r.fail("expected true or false", path)
                kwargs[key] = value
            elif key in ("window", "max_steps"):
                kwargs[key] = r.number(value, path, positive=True, integer=True)
            elif key == "max_step" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = r.number(value, path, positive=True)
        controls = Controls(**kwargs)

    events = []
    raw_events = data.get("events", [])
    if not isinstance(raw_events, list):
        r.fail("expected a list", "events")
    last = -np.inf
    for i, ev in enumerate(raw_events):
        path = f"events[{i}]"
        ev = r.mapping(ev, path, ("t", "virus", "delta"), ("t", "virus", "delta"))
        t = r.number(ev["t"], f"{path}.t")
        if not (0 <= t <= t_end) or t <= last:
            r.fail("event times must increase strictly within [0, t_end]", f"{path}.t")
        last = t
        virus = r.number(ev["virus"], f"{path}.virus", integer=True)
        if not 1 <= virus <= m:
            r.fail(f"virus must be between 1 and {m}", f"{path}.virus")
        delta = r.array(ev["delta"], f"{path}.delta", (n,))
        if np.any(delta <= 0):
            r.fail("healing rates must be positive", f"{path}.delta")
        events.append(Event(t, virus, delta))
    seed = r.number(data.get("seed", 0), "seed", integer=True)
    return Scenario(name=name, system=system, initial=initial, t_end=t_end,
                    controls=controls, events=tuple(events), seed=int(seed),
                    description=description, raw=raw)


def load_scenario(path):
    """Read and validate a scenario file."""
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


# -- saving ------------------------------------------------------------------

class _Dumper(yaml.SafeDumper):
    pass


def _list(a):
    return np.asarray(a, dtype=float).tolist()


def _layer_dict(layer):
    out = {"beta": _list(layer.B), "delta": _list(layer.D)}
    if layer.resource:
        out.update(beta_w=_list(layer.b), c=_list(layer.c), delta_w=float(layer.delta_w))
    return out


def dumps_scenario(sc):
    """Canonical YAML text of a scenario."""
    sys = sc.system
    doc = {"schema_version": SCHEMA_VERSION, "name": sc.name}
    if sc.description:
        doc["description"] = sc.description
    doc["resource"] = sys.resource_enabled
    if sc.raw is not None:
        doc["raw"] = {k: _list(getattr(sc.raw, k)) for k in _RAW_KEYS}
    else:
        doc["layers"] = [_layer_dict(layer) for layer in sys.layers]
    init = {"p": _list(sc.initial[:, sys.node_mask])}
    if sys.resource_enabled:
        init["z"] = _list(sc.initial[:, -1])
    doc["initial"] = init
    doc["t_end"] = float(sc.t_end)
    ctl = {}
    for f in fields(Controls):
        value = getattr(sc.controls, f.name)
        if isinstance(value, bool) or value is None or isinstance(value, int):
            ctl[f.name] = value
        else:
            ctl[f.name] = float(value)
    doc["controls"] = ctl
    if sc.events:
        doc["events"] = [{"t": float(e.t), "virus": int(e.virus), "delta": _list(e.delta)}
                         for e in sc.events]
    doc["seed"] = int(sc.seed)
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=False, default_flow_style=None,
                     width=10_000, allow_unicode=True)


def save_scenario(sc, path):
    """Write the canonical text of ``sc`` to ``path`` (UTF-8, LF endings)."""
    Path(path).write_text(dumps_scenario(sc), encoding="utf-8", newline="\n")


# -- bundled Stockholm study --------------------------------------------------

_FIGS = ("stockholm_fig3", "stockholm_fig4", "stockholm_fig5",
         "stockholm_fig6", "stockholm_fig7")


def bundled_scenario_path(name):
    """Filesystem path of a bundled scenario file."""
    return resources.files("siws") / "data" / f"{name}.yaml"


def bundled_scenarios():
    return _FIGS


def stockholm_adjacency():
    """Calibrated 15-district contact pattern (symmetric 0/1, zero diagonal).

    This is a calibrated reconstruction, not survey data: it was fitted to
    target spectral values by ``scripts/calibrate_stockholm.py``.
    """
    text = (resources.files("siws") / "data" / "stockholm_adjacency.txt").read_text()
    return np.loadtxt(text.splitlines(), dtype=float)


def stockholm_layer(delta, delta_w, adjacency=None):
    """One virus on the Stockholm network: ``beta_ij = 1`` on edges and ``i = j``,
    ``beta_iw = 1`` and ``c_i = 1/15``."""
    A = stockholm_adjacency() if adjacency is None else np.asarray(adjacency, float)
    n = A.shape[0]
    return VirusLayer(B=A + np.eye(n), D=np.broadcast_to(np.asarray(delta, float), (n,)),
                      b=np.ones(n), c=np.full(n, 1.0 / n), delta_w=delta_w)


def _north_south(north, south, n=15):
    return np.r_[[north] * 8, [south] * (n - 8)]


def stockholm_scenario(name, adjacency=None):
    """Build one of the bundled Stockholm scenarios from scratch."""
    from .equilibria import coexistence_fixed_point
    from .mitigation import heal_boost, vaccine_rates

    lay = lambda d, dw: stockholm_layer(d, dw, adjacency)  # noqa: E731
    n = 15
    half = np.column_stack([np.full((2, n), 0.5), np.full(2, 0.5)])
    controls = Controls(stop_on_convergence=False)
    fig4 = MultiVirusSystem((lay(_north_south(1.5, 2.0), 1.0),
                             lay(_north_south(2.0, 1.5), 1.0)))
    if name == "stockholm_fig3":
        sys = MultiVirusSystem((lay(4.6, 4.0), lay(10.0, 10.0)))
        desc = "Virus 2 below threshold is eradicated; virus 1 settles endemic."
        return Scenario(name, sys, half, 100.0, controls, description=desc)
    if name == "stockholm_fig4":
        desc = ("Slow healing north of the river for virus 1 and south for virus 2; "
                "both invade each other and coexist.")
        return Scenario(name, fig4, half, 200.0, controls, description=desc)
    if name == "stockholm_fig5":
        sys = MultiVirusSystem((lay(3.0, 3.0), lay(4.0, 4.0)))
        desc = "Virus 1 dominates entrywise; virus 2 dies out although s > 0."
        return Scenario(name, sys, half, 40.0, controls, description=desc)
    if name in ("stockholm_fig6", "stockholm_fig7"):
        start = coexistence_fixed_point(fig4)
        if not start.found:
            raise ValidationError("no coexisting equilibrium found for the fig4 setup")
        if name == "stockholm_fig6":
            plan = heal_boost(fig4.layers[1], 0.0, target_virus=2)
            desc = ("Start at the fig4 coexisting point; at t = 0.5 virus 2 healing "
                    "rates are boosted to its total inflow.")
        else:
            plan = vaccine_rates(fig4, margin=0.05, keep_satisfied=True)
            desc = ("Start at the fig4 coexisting point; at t = 0.5 virus 2 healing "
                    "rates are raised so virus 1 dominates it entrywise.")
        event = Event(0.5, 2, plan.new_delta)
        horizon = 100.0 if name == "stockholm_fig6" else 300.0
        return Scenario(name, fig4, start.equilibrium.state, horizon, controls,
                        events=(event,), description=desc)
    raise ValidationError(f"unknown Stockholm scenario {name!r}; choose from {_FIGS}")
