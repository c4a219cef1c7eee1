"""Analysis reports and their JSON / CSV serializations."""

import io
import json

import numpy as np

from .equilibria import (
    DOMINANCE_TOL,
    RESIDUAL_TOL,
    coexistence_certificate,
    endemic_state,
    find_equilibria,
    healthy_state_unique,
)
from .errors import PreconditionError
from .netmodel import is_irreducible
from .spectral import (
    MARGINAL_BAND,
    invasion_reproduction_number,
    layer_abscissa,
    reproduction_number,
    sign_with_band,
)

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "analysis_report",
    "equilibria_report",
    "plan_report",
    "run_summary",
    "dumps_json",
    "trajectory_csv",
]

REPORT_SCHEMA_VERSION = 1
_SIGN = {-1: "negative", 0: "marginal", 1: "positive"}


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def dumps_json(doc):
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=True) + "\n"


def _banded(value, band=MARGINAL_BAND):
    return {"value": value, "band": band, "sign": _SIGN[sign_with_band(value, band)]}


def _equilibrium_doc(eq):
    return {
        "kind": eq.kind,
        "virus": eq.virus,
        "stability": eq.stability,
        "jacobian_abscissa": _banded(eq.certificates.get("jacobian_abscissa", np.nan)),
        "residual": {"value": eq.residual, "tolerance": RESIDUAL_TOL},
        "state": eq.state,
    }


def analysis_report(sc, starts=0, seed=None):
    """Spectral certificates, equilibria and their stability for a scenario.

    Every number is reproducible by calling the underlying module function.
    """
    sys = sc.system
    seed = sc.seed if seed is None else seed
    viruses = []
    for k, layer in enumerate(sys.layers, start=1):
        r0 = reproduction_number(layer)
        viruses.append({
            "virus": k,
            "irreducible": is_irreducible(layer),
            "s": _banded(layer_abscissa(layer)),
            "R0": {"value": r0, "band": MARGINAL_BAND,
                   "minus_one": _SIGN[sign_with_band(r0 - 1.0)]},
        })
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": sc.name,
        "n": sys.n,
        "m": sys.m,
        "resource": sys.resource_enabled,
        "tolerances": {"marginal_band": MARGINAL_BAND, "residual": RESIDUAL_TOL,
                       "dominance": DOMINANCE_TOL},
        "viruses": viruses,
    }
    try:
        hv = healthy_state_unique(sys)
        doc["healthy_state_unique"] = {"unique": hv.unique, "marginal": hv.marginal,
                                       "band": hv.band}
    except PreconditionError as exc:
        doc["healthy_state_unique"] = {"error": str(exc)}

    if sys.m == 2:
        doc["coexistence"] = _pair_report(sys)
    doc["equilibria"] = [_equilibrium_doc(eq)
                         for eq in find_equilibria(sys, starts=starts, seed=seed)]
    return doc


def _pair_report(sys):
    try:
        cert = coexistence_certificate(sys)
    except PreconditionError as exc:
        return {"verdict": "not_applicable", "reason": str(exc)}
    l1, l2 = sys.layers
    y1, y2 = endemic_state(l1), endemic_state(l2)
    ev = cert.evidence
    return {
        "verdict": cert.verdict,
        "dominant": cert.dominant,
        "endemic_states": [y1, y2],
        "invasion_abscissa": [_banded(ev["invasion_abscissa_1_into_2"]),
                              _banded(ev["invasion_abscissa_2_into_1"])],
        "invasion_number": [invasion_reproduction_number(l1, y2),
                            invasion_reproduction_number(l2, y1)],
        "dominance": {"1_over_2": ev["dominance_1_over_2"],
                      "2_over_1": ev["dominance_2_over_1"],
                      "tolerance": DOMINANCE_TOL},
    }


def equilibria_report(sc, starts=20, seed=None):
    seed = sc.seed if seed is None else seed
    eqs = find_equilibria(sc.system, starts=starts, seed=seed)
    return {"schema_version": REPORT_SCHEMA_VERSION, "scenario": sc.name,
            "starts": starts, "seed": seed,
            "equilibria": [_equilibrium_doc(eq) for eq in eqs]}


def plan_report(sc, plan, event_time):
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": sc.name,
        "strategy": plan.strategy,
        "target_virus": plan.target_virus,
        "new_delta": plan.new_delta,
        "cost": plan.cost,
        "certificate": plan.certificate,
        "warnings": list(plan.warnings),
        "event_time": event_time,
    }
    if plan.epsilon is not None:
        doc["epsilon"] = plan.epsilon
    if plan.margin is not None:
        doc["margin"] = plan.margin
    return doc


def run_summary(sc, run):
    final = run.states[-1]
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": sc.name,
        "t_final": run.times[-1],
        "steps": len(run.times) - 1,
        "reason": run.reason,
        "regime": run.regime.name,
        "survivor": run.regime.virus,
        "endemic": list(run.regime.endemic),
        "event_times": list(run.event_times),
        "final_state": final,
        "final_pbar": run.pbar[-1],
        "max_domain_violation": run.max_violation,
    }


def trajectory_csv(sys, run):
    """CSV text: ``t``, ``p[k][i]``, ``z[k]``, ``pbar[k]`` with 17 significant digits."""
    m, n = sys.m, sys.n
    header = ["t"] + [f"p[{k}][{i}]" for k in range(1, m + 1) for i in range(1, n + 1)]
    if sys.resource_enabled:
        header += [f"z[{k}]" for k in range(1, m + 1)]
    header += [f"pbar[{k}]" for k in range(1, m + 1)]
    P = run.states[:, :, sys.node_mask].reshape(len(run.times), m * n)
    cols = [run.times[:, None], P]
    if sys.resource_enabled:
        cols.append(run.states[:, :, -1])
    cols.append(run.pbar)
    table = np.hstack(cols)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in table:
        buf.write(",".join(format(v, ".17g") for v in row) + "\n")
    return buf.getvalue()
