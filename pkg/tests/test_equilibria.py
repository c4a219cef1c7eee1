import numpy as np
import pytest

from conftest import dominant_pair, random_layer, scalar_layer
from siws.equilibria import (
    coexistence_certificate,
    coexistence_fixed_point,
    coexistence_search,
    dominates,
    endemic_fixed_point,
    endemic_multistart,
    endemic_state,
    find_equilibria,
    fixed_point_map,
    healthy_state_unique,
    stability_at,
)
from siws.errors import PreconditionError
from siws.mitigation import heal_boost
from siws.netmodel import MultiVirusSystem, VirusLayer


@pytest.mark.parametrize("beta,b,delta,dw", [(1.0, 1.0, 1.0, 1.0), (3.0, 0.5, 2.0, 0.2),
                                             (0.2, 4.0, 1.5, 7.0)])
def test_scalar_closed_form(beta, b, delta, dw):
    eq = endemic_fixed_point(scalar_layer(beta, b, delta, dw))
    p = 1 - delta / (beta + b)
    np.testing.assert_allclose(eq.state[0], [p, p], atol=1e-12)
    assert eq.residual <= 1e-10


def test_scalar_sis_closed_form():
    eq = endemic_fixed_point(VirusLayer.sis([[4.0]], [1.0]))
    assert eq.state[0, 0] == pytest.approx(0.75, abs=1e-12)


def test_endemic_needs_persistence():
    with pytest.raises(PreconditionError, match="s\\(Bw - Dw\\)"):
        endemic_fixed_point(scalar_layer(beta=0.5, b=0.2, delta=1.0))
    reducible = VirusLayer(B=np.zeros((2, 2)), D=[0.1, 0.1], b=[1.0, 0.0], c=[0.0, 1.0])
    with pytest.raises(PreconditionError, match="irreducible"):
        endemic_fixed_point(reducible)


def test_fixed_point_map_fixes_equilibria(rng):
    layer = random_layer(rng, 5, persistent=True)
    eq = endemic_fixed_point(layer)
    sys = MultiVirusSystem((layer,))
    np.testing.assert_allclose(fixed_point_map(sys, eq.state), eq.state, atol=1e-12)
    assert np.all(eq.state > 0) and np.all(eq.state[:, :5] < 1)


def test_multistart_agrees(rng):
    for _ in range(5):
        layer = random_layer(rng, 4, persistent=True)
        ref = endemic_state(layer)
        limits = endemic_multistart(layer, starts=10, seed=3)
        assert np.abs(limits - ref).max() <= 1e-8


def _mirrored(resource):
    B = np.array([[2.0, 0.1], [0.1, 2.0]])
    if resource:
        c = [0.5, 0.5]
        l1 = VirusLayer(B=B, D=[1.0, 3.0], b=[0.2, 0.2], c=c, delta_w=1.0)
        l2 = VirusLayer(B=B, D=[3.0, 1.0], b=[0.2, 0.2], c=c, delta_w=1.0)
    else:
        l1, l2 = VirusLayer.sis(B, [1.0, 3.0]), VirusLayer.sis(B, [3.0, 1.0])
    return MultiVirusSystem((l1, l2))


@pytest.mark.parametrize("resource", [True, False])
def test_mirrored_coexistence(resource):
    sys = _mirrored(resource)
    cert = coexistence_certificate(sys)
    assert cert.verdict == "sufficient_coexist"
    res = coexistence_fixed_point(sys)
    assert res.found
    Y = res.equilibrium.state
    # Swapping nodes swaps viruses.
    assert Y[0, 0] == pytest.approx(Y[1, 1], abs=1e-9)
    assert Y[0, 1] == pytest.approx(Y[1, 0], abs=1e-9)
    # Each virus sits below its own single-virus endemic level.
    for k in range(2):
        assert np.all(Y[k] < endemic_state(sys.layers[k]))
    assert stability_at(sys, res.equilibrium) == "exp_stable"
    found = coexistence_search(sys, starts=10, seed=0)
    assert len(found) == 1
    np.testing.assert_allclose(found[0].state, Y, atol=1e-8)


def test_identical_layers_inconclusive():
    layer = scalar_layer(beta=2.0)
    cert = coexistence_certificate(MultiVirusSystem((layer, layer)))
    assert cert.verdict == "inconclusive"
    assert not cert.evidence["dominance_1_over_2"]


def test_dominance_certificate(rng):
    sys = dominant_pair(rng, 4)
    assert dominates(*sys.layers)
    assert not dominates(sys.layers[1], sys.layers[0])
    cert = coexistence_certificate(sys)
    assert cert.verdict == "certified_excluded" and cert.dominant == 1
    assert coexistence_fixed_point(sys).status == "none_found"


def test_healthy_verdicts(rng):
    layer = random_layer(rng, 4, persistent=True)
    boosted = layer.with_healing(heal_boost(layer).new_delta)
    verdict = healthy_state_unique(MultiVirusSystem((boosted,)))
    assert verdict.unique and verdict.marginal
    verdict = healthy_state_unique(MultiVirusSystem((boosted, layer)))
    assert not verdict.unique
    low = random_layer(rng, 4, persistent=False)
    verdict = healthy_state_unique(MultiVirusSystem((low,)))
    assert verdict.unique and not verdict.marginal


def test_find_equilibria_exclusion(rng):
    sys = dominant_pair(rng, 3)
    eqs = find_equilibria(sys, starts=10, seed=1)
    got = [(e.kind, e.virus, e.stability) for e in eqs]
    assert got == [("healthy", None, "unstable"), ("single_virus", 1, "exp_stable"),
                   ("single_virus", 2, "unstable")]


def test_stability_marginal_at_threshold():
    delta = heal_boost(scalar_layer(beta=2.0)).new_delta[0]
    sys = MultiVirusSystem((scalar_layer(beta=2.0, delta=delta),))
    eqs = find_equilibria(sys)
    assert [e.stability for e in eqs] == ["asymp_stable_marginal"]
