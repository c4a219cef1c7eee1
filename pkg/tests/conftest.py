import numpy as np
import pytest

from siws.netmodel import MultiVirusSystem, VirusLayer
from siws.spectral import layer_abscissa


def random_irreducible(rng, n, density=0.4, low=0.1, high=1.0):
    """Random nonnegative n x n matrix whose digraph contains a Hamiltonian cycle
    (a self-loop when ``n == 1``)."""
    M = np.where(rng.random((n, n)) < density, rng.uniform(low, high, (n, n)), 0.0)
    perm = rng.permutation(n)
    for a, b in zip(perm, np.roll(perm, 1)):
        M[a, b] = rng.uniform(low, high)
    return M


def random_layer(rng, n, resource=True, persistent=None, scale=1.0, gap=1e-3):
    """Random valid layer; ``persistent`` forces the sign of s(Bw - Dw), with
    ``|s| > gap``."""
    for _ in range(1000):
        B = random_irreducible(rng, n) * scale
        if resource:
            b = rng.uniform(0.0, 1.0, n) * (rng.random(n) < 0.7)
            if not b.any():
                b[rng.integers(n)] = rng.uniform(0.1, 1.0)
            c = rng.uniform(0.05, 1.0, n) * (rng.random(n) < 0.8)
            if not c.any():
                c[rng.integers(n)] = 1.0
            c = c / c.sum()
            dw = rng.uniform(0.2, 2.0)
            inflow = B.sum(axis=1) + b
        else:
            b, c, dw = None, None, 1.0
            inflow = B.sum(axis=1)
        D = inflow * rng.uniform(0.3, 1.6, n) + 0.05
        layer = VirusLayer(B=B, D=D, b=b, c=c, delta_w=dw, resource=resource)
        if persistent is None:
            return layer
        s = layer_abscissa(layer)
        if (s > 0) == persistent and abs(s) > gap:
            return layer
    raise RuntimeError("could not draw a layer with the requested persistence")


def random_system(rng, n, m, resource=True):
    return MultiVirusSystem(tuple(random_layer(rng, n, resource) for _ in range(m)))


def random_domain_state(rng, sys, interior=False):
    """Random point of the sensible domain (strictly inside if ``interior``)."""
    shares = rng.dirichlet(np.ones(sys.m + 1), size=sys.n).T[: sys.m]
    if not interior:
        shares = shares * (rng.random(shares.shape) < 0.8)
    Y = np.zeros((sys.m, sys.dim))
    Y[:, sys.node_mask] = shares
    if sys.resource_enabled:
        Y[:, -1] = rng.uniform(0.0, 1.0, sys.m)
        if interior:
            Y[:, -1] += 0.01
    if interior:
        Y[:, sys.node_mask] = np.clip(Y[:, sys.node_mask], 1e-3, None)
        tot = Y[:, sys.node_mask].sum(axis=0)
        Y[:, sys.node_mask] /= np.maximum(tot, 1.0) / 0.98
    return Y


def dominant_pair(rng, n, resource=True):
    """Two-virus system with Dw1^-1 Bw1 > Dw2^-1 Bw2 and both layers persistent."""
    for _ in range(1000):
        l1 = random_layer(rng, n, resource, persistent=True, scale=2.0)
        shrink = rng.uniform(0.5, 1.0, (n, n))
        B2 = l1.B * shrink
        D2 = l1.D * rng.uniform(1.0, 1.3, n)
        if resource:
            b2 = l1.b * rng.uniform(0.5, 1.0, n)
            l2 = VirusLayer(B=B2, D=D2, b=b2, c=l1.c, delta_w=rng.uniform(0.2, 2.0))
        else:
            l2 = VirusLayer.sis(B2, D2)
        if layer_abscissa(l2) > 0.05:
            return MultiVirusSystem((l1, l2))
    raise RuntimeError("could not draw a dominant pair")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def scalar_layer(beta=1.0, b=1.0, delta=1.0, delta_w=1.0):
    return VirusLayer(B=[[beta]], D=[delta], b=[b], c=[1.0], delta_w=delta_w)
