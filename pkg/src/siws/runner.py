"""Run scenarios: piecewise integration across healing-rate events."""

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Controls, classify_long_run, integrate, mean_infection

__all__ = ["Run", "run_scenario", "override_controls"]


@dataclass
class Run:
    """Concatenated trajectory of a scenario.

    Attributes:
        system: the system in force after the last event.
        times, states: all accepted steps, ``states`` is ``(T, m, dim)``.
        event_times: times at which healing rates were replaced.
        reason: termination reason of the final segment.
        regime: long-run classification of the final segment.
        max_violation: largest pre-clamp domain excursion over all segments.
    """

    system: object
    times: np.ndarray
    states: np.ndarray
    event_times: tuple
    reason: str
    regime: object
    max_violation: float

    @property
    def pbar(self):
        return mean_infection(self.system, self.states)


def override_controls(controls, tol=None):
    """Tighten ``controls`` to relative tolerance ``tol`` (absolute never looser)."""
    if tol is None:
        return controls
    return replace(controls, rtol=tol, atol=min(controls.atol, tol))


def run_scenario(sc, t_end=None, controls=None):
    """Integrate ``sc`` to ``t_end``, applying each event between segments."""
    t_end = sc.t_end if t_end is None else t_end
    ctl = controls or sc.controls or Controls()
    sys = sc.system
    y = sc.initial
    t = 0.0
    times, states = [], []
    applied = []
    worst = 0.0
    breaks = [e for e in sc.events if e.t < t_end] + [None]
    traj = None
    for event in breaks:
        stop = t_end if event is None else event.t
        seg_ctl = ctl if event is None else replace(ctl, stop_on_convergence=False)
        traj = integrate(sys, y, stop, seg_ctl, t0=t)
        skip = 1 if times else 0
        times.extend(traj.times[skip:])
        states.extend(traj.states[skip:])
        worst = max(worst, traj.max_violation)
        y, t = traj.final, traj.times[-1]
        if event is not None:
            sys = sys.with_healing(event.virus - 1, event.delta)
            applied.append(event.t)
    regime = classify_long_run(sys, traj)
    return Run(sys, np.array(times), np.array(states), tuple(applied), traj.reason,
               regime, worst)
