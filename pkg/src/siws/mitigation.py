"""Healing-rate strategies: boosting every node above its infection inflow,
or retuning a benign virus so that it outcompetes a malignant one.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .equilibria import dominates
from .errors import HypothesisError, NumericalError, PreconditionError
from .netmodel import is_irreducible
from .spectral import (
    MARGINAL_BAND,
    layer_abscissa,
    sign_with_band,
    spectral_radius,
)

__all__ = [
    "MitigationPlan",
    "PlanSet",
    "heal_boost",
    "all_viruses_heal_boost",
    "vaccine_bound",
    "vaccine_rates",
    "plan_cost",
    "apply_plan",
]


@dataclass(frozen=True)
class MitigationPlan:
    """Replacement healing rates for one virus.

    Attributes:
        strategy: ``heal_boost`` or ``virus_as_vaccine``.
        target_virus: 1-based index of the virus whose rates change.
        new_delta: replacement node healing rates.
        cost: sum of ``new_delta``.
        epsilon: slack per node (heal_boost only).
        margin: relative slack over the bound (vaccine only).
        certificate: spectral or dominance facts backing the post-condition.
        warnings: non-fatal findings, e.g. the target fell below threshold.
    """

    strategy: str
    target_virus: int
    new_delta: np.ndarray
    cost: float
    epsilon: np.ndarray = None
    margin: float = None
    certificate: dict = field(default_factory=dict)
    warnings: tuple = ()


def plan_cost(plan_or_delta):
    """Sum of the plan's healing rates, correctly rounded."""
    delta = getattr(plan_or_delta, "new_delta", plan_or_delta)
    return math.fsum(np.asarray(delta, dtype=float).tolist())


def heal_boost(layer, epsilon=0.0, target_virus=1):
    """Set ``delta_i = beta_iw + sum_j beta_ij + epsilon_i`` at every node.

    With ``epsilon = 0`` every row of ``Dw^{-1} Bw`` sums to one, so the
    reproduction number is exactly one and the healthy state is only
    asymptotically stable. Any positive ``epsilon_i`` pushes ``s`` below zero.

    Raises:
        PreconditionError: negative ``epsilon`` or a reducible layer.
    """
    eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (layer.n,)).copy()
    if np.any(eps < 0):
        raise PreconditionError("epsilon must be nonnegative at every node")
    if not is_irreducible(layer):
        raise PreconditionError(f"virus {target_virus} layer is not irreducible")
    new_delta = layer.b + layer.B.sum(axis=1) + eps
    if np.any(new_delta <= 0):
        raise PreconditionError("boosted healing rates must be positive; "
                                "pick epsilon > 0 at nodes without inflow")
    boosted = layer.with_healing(new_delta)
    s = layer_abscissa(boosted)
    rho = spectral_radius(boosted.next_generation()).value
    regime = "exponential" if np.any(eps > 0) else "asymptotic"
    certificate = {
        "s(Bw-Dw)": s,
        "R0": rho,
        "eradication": regime,
        "sign": sign_with_band(s),
    }
    return MitigationPlan("heal_boost", target_virus, new_delta, plan_cost(new_delta),
                          epsilon=eps, certificate=certificate)


@dataclass(frozen=True)
class PlanSet:
    """Per-virus heal_boost plans with the combined healthy-state verdict.

    ``verdict`` is ``exp_stable`` when every virus has some positive epsilon,
    else ``asymp_stable``.
    """

    plans: tuple
    verdict: str

    @property
    def cost(self):
        return math.fsum(p.cost for p in self.plans)


def all_viruses_heal_boost(sys, epsilons=None):
    """Apply :func:`heal_boost` to every virus."""
    if epsilons is None:
        epsilons = [0.0] * sys.m
    if len(epsilons) != sys.m:
        raise PreconditionError(f"need {sys.m} epsilon vectors, got {len(epsilons)}")
    plans = tuple(heal_boost(layer, eps, target_virus=k + 1)
                  for k, (layer, eps) in enumerate(zip(sys.layers, epsilons)))
    exp = all(np.any(p.epsilon > 0) for p in plans)
    return PlanSet(plans, "exp_stable" if exp else "asymp_stable")


def vaccine_bound(benign, malignant_target):
    """Row-wise threshold ``max_j (Bw2)_ij / (Dw1^{-1} Bw1)_ij`` over ``(Bw1)_ij > 0``.

    ``benign`` is the virus that should win (layer 1); the returned vector
    holds the healing rates of ``malignant_target`` (layer 2) at which its
    next-generation entries tie with the benign ones.
    """
    A1 = benign.next_generation()
    B2 = malignant_target.Bw
    mask = benign.node_mask
    ratio = np.where(benign.Bw > 0, B2 / np.where(A1 > 0, A1, 1.0), -np.inf)
    return ratio[mask].max(axis=1)


def vaccine_rates(sys, margin=0.05, keep_satisfied=False):
    """Healing rates for virus 2 that make virus 1 dominate it entrywise.

    ``new_delta = bound * (1 + margin)`` at every node, with ``bound`` from
    :func:`vaccine_bound`. With ``keep_satisfied`` a node keeps its current
    rate where that already exceeds the bound strictly. The result is always
    checked for dominance.

    Raises:
        PreconditionError: fewer or more than two viruses, or ``margin <= 0``.
        HypothesisError: a layer is reducible or not persistent, the
            contamination shares differ, or virus 2 uses an edge virus 1 lacks.
        NumericalError: the dominance check fails on the produced plan.
    """
    if sys.m != 2:
        raise PreconditionError("the vaccine strategy needs exactly two viruses")
    if not margin > 0:
        raise PreconditionError("margin must be positive: the dominance inequality is strict")
    l1, l2 = sys.layers
    for k, layer in enumerate(sys.layers, start=1):
        if not is_irreducible(layer):
            raise HypothesisError(f"virus {k} layer is not irreducible")
        if sign_with_band(layer_abscissa(layer)) <= 0:
            raise HypothesisError(f"virus {k} has s(Bw - Dw) <= 0 before the change")
    if sys.resource_enabled and np.abs(l1.c - l2.c).max() > 1e-12:
        raise HypothesisError("contamination shares c differ between the two viruses")
    if np.any((l2.Bw > 0) & ~(l1.Bw > 0)):
        raise HypothesisError("virus 2 spreads along an edge that virus 1 does not use")

    bound = vaccine_bound(l1, l2)
    new_delta = bound * (1.0 + margin)
    if keep_satisfied:
        new_delta = np.where(l2.D > bound, l2.D, new_delta)
    # Rows of Bw2 without entries impose no bound; keep the current rate there.
    new_delta = np.where(bound > 0, new_delta, l2.D)
    target = l2.with_healing(new_delta)
    if not dominates(l1, target):
        raise NumericalError("vaccine plan does not make virus 1 dominate virus 2")
    s_new = layer_abscissa(target)
    notes = []
    if sign_with_band(s_new) <= 0:
        msg = ("virus 2 now below threshold; the persistence hypothesis of the "
               "exclusion argument is void, eradication still follows from s <= 0")
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    certificate = {
        "dominance_1_over_2": True,
        "bound": bound,
        "s2_after": s_new,
        "band": MARGINAL_BAND,
    }
    return MitigationPlan("virus_as_vaccine", 2, new_delta, plan_cost(new_delta),
                          margin=float(margin), certificate=certificate,
                          warnings=tuple(notes))


def apply_plan(sys, plan):
    """System with the plan's healing rates installed."""
    return sys.with_healing(plan.target_virus - 1, plan.new_delta)
