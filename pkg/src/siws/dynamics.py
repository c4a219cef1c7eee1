"""Vector field, Jacobian and domain-guarded integration of the SIWS system.

States are ``(m, dim)`` arrays: row ``k`` is virus ``k``'s block
``(p_1, ..., p_n, z)`` (or just ``p`` in SIS mode). Functions also accept the
flattened ``m * dim`` vector.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrationError, StructuralError

__all__ = [
    "SystemState",
    "Controls",
    "Trajectory",
    "Regime",
    "as_blocks",
    "vector_field",
    "jacobian",
    "domain_violation",
    "jacobian_norm_bound",
    "clamp_to_domain",
    "integrate",
    "classify_long_run",
    "mean_infection",
    "ERADICATION_THRESHOLD",
]

ERADICATION_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SystemState:
    """A point ``y`` of the state space at time ``t``."""

    y: np.ndarray
    t: float = 0.0

    def p(self, sys):
        return self.y[:, sys.node_mask]

    def z(self, sys):
        if not sys.resource_enabled:
            return None
        return self.y[:, -1]


def as_blocks(sys, y):
    """Reshape ``y`` to ``(m, dim)``, checking its size."""
    if isinstance(y, SystemState):
        y = y.y
    y = np.asarray(y, dtype=float)
    if y.size != sys.m * sys.dim:
        raise StructuralError(
            f"state has {y.size} entries, expected m * dim = {sys.m * sys.dim}")
    return y.reshape(sys.m, sys.dim)


def _free_fraction(sys, Y):
    # diag(I - sum_l X(y^l)) over one virus block; resource row untouched.
    scale = np.ones(sys.dim)
    scale[sys.node_mask] = 1.0 - Y[:, sys.node_mask].sum(axis=0)
    return scale


def _field(Bw, Dw, n, Y):
    # Node coordinates are the first n of each block.
    out = np.einsum("kij,kj->ki", Bw, Y)
    out[:, :n] *= 1.0 - Y[:, :n].sum(axis=0)
    out -= Dw * Y
    return out


def vector_field(sys, y):
    """``dy^k/dt = (-Dw^k + (I - sum_l X(y^l)) Bw^k) y^k`` for every virus.

    Returns an array of the same shape as ``y``.
    """
    shape = np.shape(y.y if isinstance(y, SystemState) else y)
    Y = as_blocks(sys, y)
    return _field(sys.Bw, sys.Dw, sys.n, Y).reshape(shape)


def jacobian(sys, y):
    """Jacobian of :func:`vector_field` over all ``m * dim`` coordinates."""
    Y = as_blocks(sys, y)
    m, d = sys.m, sys.dim
    scale = _free_fraction(sys, Y)
    Bw, Dw = sys.Bw, sys.Dw
    nodes = np.flatnonzero(sys.node_mask)
    J = np.zeros((m * d, m * d))
    for k in range(m):
        rows = slice(k * d, (k + 1) * d)
        J[rows, rows] = scale[:, None] * Bw[k] - np.diag(Dw[k])
        BY = Bw[k] @ Y[k]
        for l in range(m):
            # d/dp^l_i of (1 - sum_l p^l_i)(Bw y^k)_i
            J[k * d + nodes, l * d + nodes] -= BY[nodes]
    return J


def jacobian_norm_bound(sys):
    """Upper bound on ``||J||_inf`` over the domain (with ``z <= 1``)."""
    rows = sys.Bw.sum(axis=2)
    return float((sys.Dw + (1 + sys.m) * rows).max())


def domain_violation(sys, y):
    """Largest distance by which ``y`` lies outside the sensible domain."""
    Y = as_blocks(sys, y)
    P = Y[:, :sys.n]
    totals = P.sum(axis=0)
    if Y.min() >= 0.0 and totals.max() <= 1.0:
        return 0.0
    worst = max(0.0, -P.min(), P.max() - 1.0, totals.max() - 1.0)
    if sys.resource_enabled:
        worst = max(worst, -Y[:, -1].min())
    return float(worst)


def clamp_to_domain(sys, y):
    """Project small numerical excursions back into the domain."""
    Y = as_blocks(sys, y).copy()
    mask = sys.node_mask
    P = np.clip(Y[:, mask], 0.0, 1.0)
    total = P.sum(axis=0)
    over = total > 1.0
    P[:, over] /= total[over]
    Y[:, mask] = P
    if sys.resource_enabled:
        Y[:, -1] = np.maximum(Y[:, -1], 0.0)
    return Y


@dataclass(frozen=True)
class Controls:
    """Integrator settings.

    Attributes:
        atol, rtol: error tolerances of the embedded 4(5) pair.
        h0: initial step.
        max_step: largest step; ``None`` means ``t_end / 100``.
        stability_factor: steps are also capped at this over a bound on
            the Jacobian norm, keeping the explicit pair inside its stability
            region; ``None`` disables the cap.
        guard: domain excursion clamped silently; larger ones raise.
        window: accepted steps in the convergence window.
        conv_tol: ``||dy/dt||_inf`` below which a step counts as stationary.
        stop_on_convergence: end the run once the window is stationary.
        max_steps: hard cap on accepted plus rejected steps.
    """

    atol: float = 1e-9
    rtol: float = 1e-7
    h0: float = 1e-3
    max_step: float = None
    stability_factor: float = 1.5
    guard: float = 1e-9
    window: int = 20
    conv_tol: float = 1e-9
    stop_on_convergence: bool = True
    max_steps: int = 2_000_000


@dataclass
class Trajectory:
    """Accepted integration steps.

    ``reason`` is ``"t_end"``, ``"converged"`` or ``"domain_violation"``;
    ``max_violation`` is the largest pre-clamp excursion seen.
    """

    times: np.ndarray
    states: np.ndarray
    reason: str
    max_violation: float = 0.0
    derivative_norms: np.ndarray = field(default=None, repr=False)

    @property
    def final(self):
        return self.states[-1]

    @property
    def converged(self):
        return self.reason == "converged"


# Dormand-Prince 5(4) tableau.
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [np.array(row) for row in (
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
)]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(f, t, y, k1, h):
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 7):
        K[s] = f(t + _C[s] * h, y + h * (_A[s] @ K[:s]))
    y_new = y + h * (_B5[:6] @ K[:6])
    # FSAL: stage 7 is f(y_new).
    err = h * (_E @ K)
    return y_new, err, K[6]


def integrate(sys, y0, t_end, controls=None, t0=0.0):
    """Integrate from ``y0`` at ``t0`` to ``t_end`` with Dormand-Prince 4(5).

    Every accepted step is checked against the sensible domain: excursions up
    to ``controls.guard`` are clamped, larger ones raise :class:`DomainError`
    (the domain is invariant, so this signals a bug or an invalid model).

    Raises:
        DomainError: guard exceeded (carries time and offending state).
        IntegrationError: step-size underflow or step budget exhausted.
    """
    ctl = controls or Controls()
    Y0 = as_blocks(sys, y0)
    v0 = domain_violation(sys, Y0)
    if v0 > ctl.guard:
        raise DomainError(f"initial state lies outside the domain by {v0:.3g}",
                          t=t0, state=Y0)
    y = clamp_to_domain(sys, Y0).ravel()
    span = t_end - t0
    if span < 0:
        raise IntegrationError(f"t_end={t_end} precedes t0={t0}")
    max_step = ctl.max_step or (span / 100 if span > 0 else 1.0)
    if ctl.stability_factor:
        max_step = min(max_step, ctl.stability_factor / jacobian_norm_bound(sys))

    Bw, Dw, n = sys.Bw, sys.Dw, sys.n
    shape = (sys.m, sys.dim)

    def f(_t, v):
        return _field(Bw, Dw, n, v.reshape(shape)).ravel()

    t = t0
    times, states = [t], [y.reshape(sys.m, sys.dim).copy()]
    k1 = f(t, y)
    norms = [np.abs(k1).max()]
    if span == 0:
        return Trajectory(np.array(times), np.array(states), "t_end", v0, np.array(norms))
    h = min(ctl.h0, max_step, span)
    stationary = 0
    worst = v0
    reason = "t_end"
    steps = 0
    while t < t_end:
        steps += 1
        if steps > ctl.max_steps:
            raise IntegrationError(f"step budget of {ctl.max_steps} exhausted", t=t,
                                   state=y.reshape(sys.m, sys.dim))
        if t + h > t_end:
            h = t_end - t
        y_new, err, k_new = _dp_step(f, t, y, k1, h)
        scale = ctl.atol + ctl.rtol * np.maximum(np.abs(y), np.abs(y_new))
        enorm = np.sqrt(np.mean((err / scale) ** 2))
        if enorm <= 1.0:
            viol = domain_violation(sys, y_new)
            if viol > ctl.guard:
                raise DomainError(
                    f"state left the domain by {viol:.3g} at t={t + h:.6g}",
                    t=t + h, state=y_new.reshape(sys.m, sys.dim))
            worst = max(worst, viol)
            t = t_end if t_end - (t + h) <= 1e-12 * max(1.0, abs(t_end)) else t + h
            if viol > 0:
                y_new = clamp_to_domain(sys, y_new).ravel()
                k_new = f(t, y_new)
            y, k1 = y_new, k_new
            times.append(t)
            states.append(y.reshape(sys.m, sys.dim).copy())
            dnorm = np.abs(k1).max()
            norms.append(dnorm)
            stationary = stationary + 1 if dnorm < ctl.conv_tol else 0
            if stationary >= ctl.window:
                reason = "converged"
                if ctl.stop_on_convergence:
                    break
            factor = 10.0 if enorm == 0 else min(10.0, 0.9 * enorm ** -0.2)
            h = min(h * factor, max_step)
        else:
            h *= max(0.2, 0.9 * enorm ** -0.2)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g}", t=t,
                                   state=y.reshape(sys.m, sys.dim))
    return Trajectory(np.array(times), np.array(states), reason, worst, np.array(norms))


@dataclass(frozen=True)
class Regime:
    """Long-run verdict.

    ``name`` is ``healthy``, ``single_virus_endemic``, ``coexisting`` or
    ``undecided``; ``virus`` is the 1-based survivor for the single-virus case;
    ``endemic`` lists per-virus persistence flags.
    """

    name: str
    virus: int = None
    endemic: tuple = ()

    def __str__(self):
        return f"{self.name}({self.virus})" if self.virus else self.name


def classify_long_run(sys, trajectory, threshold=ERADICATION_THRESHOLD):
    """Name the regime reached by a converged trajectory."""
    if not trajectory.converged:
        return Regime("undecided")
    Y = as_blocks(sys, trajectory.final)
    endemic = tuple(bool(np.abs(Y[k]).max() >= threshold) for k in range(sys.m))
    alive = [k + 1 for k, e in enumerate(endemic) if e]
    if not alive:
        return Regime("healthy", endemic=endemic)
    if len(alive) == 1:
        return Regime("single_virus_endemic", alive[0], endemic)
    return Regime("coexisting", endemic=endemic)


def mean_infection(sys, states):
    """Average infected fraction per virus; ``states`` is ``(..., m, dim)``."""
    return np.asarray(states)[..., sys.node_mask].mean(axis=-1)
