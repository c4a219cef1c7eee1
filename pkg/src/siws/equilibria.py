"""Equilibrium solvers, coexistence certificates and stability verdicts.

The endemic solver iterates the order-preserving map ``T`` upward from a small
multiple of the Perron vector, which makes convergence automatic; a few
Newton steps on the vector field then polish the limit. Coexisting points are
searched with a damped version of the two-virus map, since that map is
increasing in its own argument and decreasing in the other one.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import as_blocks, jacobian, vector_field
from .errors import NumericalError, PreconditionError, ValidationError
from .netmodel import MultiVirusSystem, is_irreducible
from .spectral import (
    MARGINAL_BAND,
    invasion_abscissa,
    layer_abscissa,
    sign_with_band,
    spectral_radius,
)

__all__ = [
    "Equilibrium",
    "CoexistenceResult",
    "Certificate",
    "HealthyVerdict",
    "RESIDUAL_TOL",
    "fixed_point_map",
    "endemic_fixed_point",
    "endemic_state",
    "single_virus_equilibrium",
    "endemic_multistart",
    "coexistence_fixed_point",
    "coexistence_search",
    "coexistence_certificate",
    "dominates",
    "healthy_state_unique",
    "stability_at",
    "jacobian_abscissa",
    "find_equilibria",
]

RESIDUAL_TOL = 1e-10
INTERIOR_FLOOR = 1e-8
DOMINANCE_TOL = 1e-12


@dataclass(frozen=True)
class Equilibrium:
    """A classified fixed point.

    Attributes:
        kind: ``healthy``, ``single_virus`` or ``coexisting``.
        state: ``(m, dim)`` array.
        residual: ``||vector_field(state)||_inf``.
        virus: 1-based survivor for ``single_virus``.
        stability: ``exp_stable``, ``asymp_stable_marginal``, ``unstable``
            or ``unknown``.
        certificates: named numbers backing the verdicts.
    """

    kind: str
    state: np.ndarray
    residual: float
    virus: int = None
    stability: str = "unknown"
    certificates: dict = field(default_factory=dict)

    def block(self, k):
        """State of virus ``k`` (0-based)."""
        return self.state[k]


def _single(layer):
    return MultiVirusSystem((layer,))


def fixed_point_map(sys, Y):
    """Apply the equilibrium map to every virus block at once.

    Node ``i`` of virus ``k`` maps to ``(1 - sum_{l != k} p^l_i) u_i / (1 + u_i)``
    with ``u = Dw^{-1} Bw y^k``; the resource entry maps to
    ``(u + u * z) / (1 + u)``. Fixed points are exactly the equilibria.
    """
    Y = as_blocks(sys, Y)
    mask = sys.node_mask
    out = np.empty_like(Y)
    P = Y[:, mask]
    total = P.sum(axis=0)
    for k, layer in enumerate(sys.layers):
        u = layer.next_generation() @ Y[k]
        others = total - P[k]
        out[k, mask] = (1.0 - others) * u[mask] / (1.0 + u[mask])
        if sys.resource_enabled:
            out[k, -1] = (u[-1] + u[-1] * Y[k, -1]) / (1.0 + u[-1])
    return out


def _residual(sys, Y):
    return float(np.abs(vector_field(sys, Y)).max())


def _newton(sys, Y, steps=30, tol=1e-15):
    """Newton iteration on the vector field; returns the best iterate seen."""
    y = as_blocks(sys, Y).ravel().copy()
    best, best_res = y.copy(), _residual(sys, y)
    for _ in range(steps):
        F = vector_field(sys, y)
        J = jacobian(sys, y)
        try:
            dy = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            dy = np.linalg.lstsq(J, -F, rcond=None)[0]
        y = y + dy
        res = _residual(sys, y)
        if res < best_res:
            best, best_res = y.copy(), res
        if res <= tol or np.abs(dy).max() <= 1e-16:
            break
    return best.reshape(sys.m, sys.dim), best_res


def _check_persistent(layer, what="layer"):
    if not is_irreducible(layer):
        raise PreconditionError(f"{what} is not irreducible")
    s = layer_abscissa(layer)
    if sign_with_band(s) <= 0:
        raise PreconditionError(
            f"{what} has s(Bw - Dw) = {s:.3g} <= 0, so no endemic equilibrium exists; "
            "the healthy state is the only equilibrium")
    return s


def endemic_fixed_point(layer, max_iter=200_000, step_tol=1e-14, check_monotone=True):
    """Single-virus endemic equilibrium of an irreducible layer with ``s > 0``.

    Iterates ``y <- T(y)`` from ``eps * zeta`` where ``zeta`` is the Perron
    vector of ``Dw^{-1} Bw`` and ``eps`` is half of the largest value keeping
    ``T(eps zeta) >= eps zeta``. The iterates must increase and stay below one;
    a breach raises :class:`NumericalError`.

    Raises:
        PreconditionError: reducible layer or ``s(Bw - Dw) <= 0``.
        NumericalError: monotonicity breach or no convergence.
    """
    s = _check_persistent(layer)
    sys = _single(layer)
    perron = spectral_radius(layer.next_generation())
    lam, zeta = perron.value, perron.vector
    eps = 0.5 * (lam - 1.0) / (lam * zeta.max())
    y = (eps * zeta)[None, :]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = fixed_point_map(sys, y)
        if check_monotone:
            slack = 4 * np.finfo(float).eps * np.maximum(y, 1e-300)
            if np.any(nxt < y - slack) or np.any(nxt > 1.0):
                raise NumericalError(
                    f"monotone iteration breached its bounds at step {iterations}")
        change = np.abs(nxt - y).max()
        y = nxt
        if change <= step_tol:
            break
    polished, res = _newton(sys, y)
    if res <= _residual(sys, y) and np.all(polished > 0):
        y = polished
    res = _residual(sys, y)
    if res > RESIDUAL_TOL:
        raise NumericalError(
            f"endemic iteration stalled with residual {res:.3g} after {iterations} steps")
    return Equilibrium("single_virus", y, res, virus=1,
                       certificates={"s(Bw-Dw)": s, "R0": lam, "iterations": iterations})


def endemic_state(layer):
    """Shorthand for the ``dim`` vector of :func:`endemic_fixed_point`."""
    return endemic_fixed_point(layer).state[0]


def single_virus_equilibrium(sys, k):
    """Endemic equilibrium of virus ``k`` (0-based) embedded in ``sys``."""
    eq = endemic_fixed_point(sys.layers[k])
    Y = np.zeros((sys.m, sys.dim))
    Y[k] = eq.state[0]
    return Equilibrium("single_virus", Y, _residual(sys, Y), virus=k + 1,
                       certificates=dict(eq.certificates))


def _damped(sys, Y, omega, max_iter, step_tol, collapse=0.0):
    for it in range(1, max_iter + 1):
        nxt = (1 - omega) * Y + omega * fixed_point_map(sys, Y)
        change = np.abs(nxt - Y).max()
        Y = nxt
        if change <= step_tol:
            return Y, it
        # A virus block shrinking to nothing means the run is heading to the boundary.
        if collapse and np.abs(Y).max(axis=1).min() < collapse:
            return Y, it
    return Y, max_iter


def endemic_multistart(layer, starts=20, seed=0, omega=0.5, max_iter=200_000):
    """Run the damped map from random interior starts; returns the limits.

    Each limit is polished with Newton steps. Used as numerical evidence that
    the endemic equilibrium is unique.
    """
    sys = _single(layer)
    rng = np.random.default_rng(seed)
    limits = []
    for _ in range(starts):
        Y = rng.uniform(0.01, 0.99, size=(1, sys.dim))
        Y, _ = _damped(sys, Y, omega, max_iter, 1e-14)
        polished, res = _newton(sys, Y)
        limits.append(polished[0] if res < _residual(sys, Y) else Y[0])
    return np.array(limits)


@dataclass(frozen=True)
class CoexistenceResult:
    """Outcome of a coexistence search.

    ``status`` is ``found`` or ``none_found``; the latter is not a proof
    that no coexisting equilibrium exists.
    """

    status: str
    equilibrium: Equilibrium = None
    iterations: int = 0
    method: str = ""

    @property
    def found(self):
        return self.status == "found"


def _is_interior(sys, Y):
    P = Y[:, sys.node_mask]
    return bool(np.all(Y > INTERIOR_FLOOR) and np.all(P < 1) and np.all(P.sum(axis=0) < 1))


def _refine(sys, Y, omega, max_iter):
    Y, iters = _damped(sys, Y, omega, max_iter, 1e-14, collapse=1e-3 * INTERIOR_FLOOR)
    res = _residual(sys, Y)
    method = "damped"
    if np.abs(Y).max(axis=1).min() < INTERIOR_FLOOR:
        return Y, res, iters, "collapsed"
    if res > 1e-13:
        polished, pres = _newton(sys, Y)
        if pres < res:
            Y, res, method = polished, pres, "damped+newton"
    return Y, res, iters, method


def coexistence_fixed_point(sys, y1=None, y2=None, omega=0.5, max_iter=100_000):
    """Look for a coexisting equilibrium of a two-virus system.

    Starts from the corner ``(eps1 * v1, eps2 * v2)`` where ``vk`` is the Perron
    vector of ``(I - X(y_other)) Dw^{-1} Bw`` and ``eps_k`` is half of the
    bound keeping that corner below both the map and the endemic states.
    Requires both invasion numbers to exceed one; otherwise the corner is
    undefined and ``none_found`` is returned.
    """
    if sys.m != 2:
        raise ValidationError("coexistence search needs exactly two viruses")
    for k, layer in enumerate(sys.layers):
        _check_persistent(layer, f"virus {k + 1}")
    y1 = endemic_state(sys.layers[0]) if y1 is None else np.asarray(y1, dtype=float)
    y2 = endemic_state(sys.layers[1]) if y2 is None else np.asarray(y2, dtype=float)
    corner = []
    for layer, own, other in [(sys.layers[0], y1, y2), (sys.layers[1], y2, y1)]:
        A = layer.next_generation()
        scale = np.where(layer.node_mask, 1.0 - other, 1.0)
        perron = spectral_radius(scale[:, None] * A)
        lam, v = perron.value, perron.vector
        if lam <= 1.0 + MARGINAL_BAND:
            return CoexistenceResult("none_found", method="invasion_number<=1")
        bound = min((lam - 1.0) / (A @ v).max(), (own / v).min())
        corner.append(0.5 * bound * v)
    Y, res, iters, method = _refine(sys, np.array(corner), omega, max_iter)
    if res <= RESIDUAL_TOL and _is_interior(sys, Y):
        eq = Equilibrium("coexisting", Y, res)
        return CoexistenceResult("found", eq, iters, method)
    return CoexistenceResult("none_found", iterations=iters, method=method)


def _random_interior(rng, sys):
    d = sys.dim
    Y = np.empty((sys.m, d))
    # Dirichlet split keeps per-node totals below one.
    shares = rng.dirichlet(np.ones(sys.m + 1), size=d).T
    Y[:] = shares[: sys.m]
    if sys.resource_enabled:
        Y[:, -1] = rng.uniform(0.01, 1.0, size=sys.m)
    return np.clip(Y, 1e-3, None)


def coexistence_search(sys, starts=100, seed=0, omega=0.5, max_iter=20_000, tol=1e-8):
    """Multi-start search for interior equilibria with every virus present.

    Returns a list of distinct :class:`Equilibrium` objects sorted
    lexicographically by state.
    """
    rng = np.random.default_rng(seed)
    found = []
    for _ in range(starts):
        Y, res, _, _ = _refine(sys, _random_interior(rng, sys), omega, max_iter)
        if res <= RESIDUAL_TOL and _is_interior(sys, Y):
            if not any(np.abs(Y - other.state).max() <= tol for other in found):
                found.append(Equilibrium("coexisting", Y, res))
    found.sort(key=lambda e: tuple(e.state.ravel()))
    return found


def dominates(first, second, tol=DOMINANCE_TOL):
    """Whether ``Dw1^{-1} Bw1 >= Dw2^{-1} Bw2`` everywhere and ``>`` somewhere.

    ``tol`` absorbs rounding relative to the entry size.
    """
    A1, A2 = first.next_generation(), second.next_generation()
    slack = tol * np.maximum(np.abs(A1), np.abs(A2))
    return bool(np.all(A1 >= A2 - slack) and np.any(A1 > A2 + slack))


@dataclass(frozen=True)
class Certificate:
    """Coexistence verdict for two viruses plus the numbers behind it.

    ``verdict`` is ``sufficient_coexist``, ``certified_excluded`` or
    ``inconclusive``; ``dominant`` is the 1-based winner when excluded.
    """

    verdict: str
    evidence: dict
    dominant: int = None


def coexistence_certificate(sys):
    """Decide coexistence from invasion abscissas or entrywise dominance.

    Raises:
        PreconditionError: not two viruses, a reducible layer or ``s <= 0``.
    """
    if sys.m != 2:
        raise PreconditionError("the coexistence certificate needs exactly two viruses")
    s = [_check_persistent(layer, f"virus {k + 1}") for k, layer in enumerate(sys.layers)]
    y1 = endemic_state(sys.layers[0])
    y2 = endemic_state(sys.layers[1])
    inv1 = invasion_abscissa(sys.layers[0], y2)
    inv2 = invasion_abscissa(sys.layers[1], y1)
    d12 = dominates(sys.layers[0], sys.layers[1])
    d21 = dominates(sys.layers[1], sys.layers[0])
    evidence = {
        "s1": s[0], "s2": s[1],
        "invasion_abscissa_1_into_2": inv1,
        "invasion_abscissa_2_into_1": inv2,
        "dominance_1_over_2": d12,
        "dominance_2_over_1": d21,
        "band": MARGINAL_BAND,
    }
    if sign_with_band(inv1) > 0 and sign_with_band(inv2) > 0:
        return Certificate("sufficient_coexist", evidence)
    if d12 or d21:
        return Certificate("certified_excluded", evidence, dominant=1 if d12 else 2)
    return Certificate("inconclusive", evidence)


@dataclass(frozen=True)
class HealthyVerdict:
    """``unique`` is true iff every ``s(Bw^k - Dw^k) <= 0``."""

    unique: bool
    abscissas: tuple
    marginal: bool
    band: float = MARGINAL_BAND


def healthy_state_unique(sys):
    """Whether the healthy state is the only equilibrium in the domain."""
    for k, layer in enumerate(sys.layers):
        if not is_irreducible(layer):
            raise PreconditionError(f"virus {k + 1} layer is not irreducible")
    s = tuple(layer_abscissa(layer) for layer in sys.layers)
    signs = [sign_with_band(v) for v in s]
    return HealthyVerdict(all(g <= 0 for g in signs), s, any(g == 0 for g in signs))


def jacobian_abscissa(sys, y):
    """Largest real part of the Jacobian spectrum at ``y``.

    The Jacobian is not Metzler away from the boundary, so a dense
    eigensolver is used rather than power iteration.
    """
    return float(np.linalg.eigvals(jacobian(sys, y)).real.max())


def stability_at(sys, eq, band=MARGINAL_BAND):
    """Linearized stability verdict at an equilibrium.

    Returns ``exp_stable``, ``unstable`` or ``asymp_stable_marginal``; the
    last means the linearization is inconclusive (zero abscissa within
    ``band``).
    """
    if eq.residual > RESIDUAL_TOL:
        raise PreconditionError(
            f"equilibrium residual {eq.residual:.3g} exceeds {RESIDUAL_TOL}")
    s = jacobian_abscissa(sys, eq.state)
    g = sign_with_band(s, band)
    return {-1: "exp_stable", 0: "asymp_stable_marginal", 1: "unstable"}[g]


def _with_stability(sys, eq):
    s = jacobian_abscissa(sys, eq.state)
    certs = dict(eq.certificates, jacobian_abscissa=s)
    return replace(eq, stability=stability_at(sys, eq), certificates=certs)


def find_equilibria(sys, starts=0, seed=0):
    """Healthy, single-virus and (for two viruses) coexisting equilibria.

    Single-virus points are included for every persistent irreducible layer.
    Coexisting points come from the constructive search plus ``starts``
    random restarts. Every returned equilibrium carries its stability.
    """
    Y0 = np.zeros((sys.m, sys.dim))
    out = [Equilibrium("healthy", Y0, 0.0)]
    persistent = []
    for k, layer in enumerate(sys.layers):
        if is_irreducible(layer) and sign_with_band(layer_abscissa(layer)) > 0:
            out.append(single_virus_equilibrium(sys, k))
            persistent.append(k)
    if sys.m == 2 and len(persistent) == 2:
        coexisting = []
        first = coexistence_fixed_point(sys)
        if first.found:
            coexisting.append(first.equilibrium)
        for eq in coexistence_search(sys, starts=starts, seed=seed):
            if not any(np.abs(eq.state - c.state).max() <= 1e-8 for c in coexisting):
                coexisting.append(eq)
        out.extend(coexisting)
    return [_with_stability(sys, eq) for eq in out]

