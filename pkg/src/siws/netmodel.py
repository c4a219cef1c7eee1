"""Model construction for networked multi-virus spread with a shared resource.

A :class:`RawModel` holds per-node populations and epidemiological rates.
:func:`normalize` turns it into a :class:`MultiVirusSystem` made of one
:class:`VirusLayer` per virus, each carrying the normalized spread data and
the assembled ``(n+1) x (n+1)`` pair ``Bw = [[B, b], [delta_w c, 0]]``,
``Dw = diag(D, delta_w)``.

With ``resource=False`` the same types describe the plain networked SIS
model: ``b`` is zero, the resource coordinate is dropped and ``Bw = B``,
``Dw = D``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import StructuralError, ValidationError

__all__ = [
    "RawModel",
    "VirusLayer",
    "MultiVirusSystem",
    "Violation",
    "normalize",
    "is_irreducible",
    "strongly_connected_labels",
    "validate_assumption1",
]


def _frozen(a, ndim, name, dtype=float):
    arr = np.array(a, dtype=dtype)
    if arr.ndim != ndim:
        raise StructuralError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawModel:
    """Un-normalized parameters, indexed ``[virus][node]``.

    ``birth`` defaults to ``mu`` (birth rate equal to death rate); giving a
    different value is rejected by :func:`normalize`.
    """

    N: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    alpha_w: np.ndarray
    zeta: np.ndarray
    delta_w: np.ndarray
    birth: np.ndarray = None

    def __post_init__(self):
        for name, ndim in [("N", 1), ("mu", 1), ("gamma", 2), ("alpha", 3),
                           ("alpha_w", 2), ("zeta", 2), ("delta_w", 1)]:
            object.__setattr__(self, name, _frozen(getattr(self, name), ndim, name))
        if self.birth is None:
            object.__setattr__(self, "birth", self.mu)
        else:
            object.__setattr__(self, "birth", _frozen(self.birth, 1, "birth"))
        n, m = self.n, self.m
        expected = {
            "mu": (n,), "birth": (n,), "gamma": (m, n), "alpha": (m, n, n),
            "alpha_w": (m, n), "zeta": (m, n), "delta_w": (m,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise StructuralError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def n(self):
        return self.N.shape[0]

    @property
    def m(self):
        return self.gamma.shape[0]


@dataclass(frozen=True)
class VirusLayer:
    """Normalized spread data of one virus.

    Attributes:
        B: ``n x n`` node-to-node infection rates ``beta_ij``.
        D: healing rates ``delta_i``.
        b: resource-to-node infection rates ``beta_iw``.
        c: node-to-resource contamination shares (sum to one).
        delta_w: resource decay rate.
        resource: ``False`` selects the SIS reduction (no resource vertex).
    """

    B: np.ndarray
    D: np.ndarray
    b: np.ndarray = None
    c: np.ndarray = None
    delta_w: float = 1.0
    resource: bool = True
    Bw: np.ndarray = field(init=False, repr=False, compare=False)
    Dw: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        B = _frozen(self.B, 2, "B")
        n = B.shape[0]
        if B.shape != (n, n):
            raise StructuralError(f"B must be square, got shape {B.shape}")
        D = _frozen(self.D, 1, "D")
        if D.shape != (n,):
            raise StructuralError(f"D has shape {D.shape}, expected ({n},)")
        b = np.zeros(n) if self.b is None else self.b
        b = _frozen(b, 1, "b")
        if b.shape != (n,):
            raise StructuralError(f"b has shape {b.shape}, expected ({n},)")
        if self.resource:
            if self.c is None:
                raise StructuralError("c is required when the resource is enabled")
            c = _frozen(self.c, 1, "c")
            if c.shape != (n,):
                raise StructuralError(f"c has shape {c.shape}, expected ({n},)")
            delta_w = float(self.delta_w)
            Bw = np.zeros((n + 1, n + 1))
            Bw[:n, :n] = B
            Bw[:n, n] = b
            Bw[n, :n] = delta_w * c
            Dw = np.append(D, delta_w)
        else:
            if np.any(b != 0):
                raise StructuralError("b must be zero when the resource is disabled")
            c = None if self.c is None else _frozen(self.c, 1, "c")
            delta_w = float(self.delta_w)
            Bw = B.copy()
            Dw = D.copy()
        Bw.setflags(write=False)
        Dw.setflags(write=False)
        for name, value in [("B", B), ("D", D), ("b", b), ("c", c),
                            ("delta_w", delta_w), ("Bw", Bw), ("Dw", Dw)]:
            object.__setattr__(self, name, value)

    @classmethod
    def sis(cls, B, D):
        """Layer of the plain networked SIS model."""
        return cls(B=B, D=D, resource=False)

    @property
    def n(self):
        return self.B.shape[0]

    @property
    def dim(self):
        """Size of one virus block: ``n + 1`` with the resource, else ``n``."""
        return self.n + 1 if self.resource else self.n

    @property
    def node_mask(self):
        """Boolean mask of population coordinates within a virus block."""
        mask = np.ones(self.dim, dtype=bool)
        if self.resource:
            mask[-1] = False
        return mask

    def next_generation(self):
        """``Dw^{-1} Bw``; the basic reproduction number is its spectral radius."""
        if np.any(self.Dw == 0):
            raise ValidationError("Dw is singular: some healing or decay rate is zero")
        return self.Bw / self.Dw[:, None]

    def with_healing(self, D):
        """Copy of this layer with the node healing rates replaced."""
        return VirusLayer(B=self.B, D=D, b=self.b, c=self.c,
                          delta_w=self.delta_w, resource=self.resource)


@dataclass(frozen=True)
class MultiVirusSystem:
    """All ``m`` virus layers over the same ``n`` population nodes."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise StructuralError("a system needs at least one virus layer")
        n = layers[0].n
        resource = layers[0].resource
        for k, layer in enumerate(layers):
            if not isinstance(layer, VirusLayer):
                raise StructuralError(f"layer {k + 1} is not a VirusLayer")
            if layer.n != n:
                raise StructuralError(f"layer {k + 1} has {layer.n} nodes, expected {n}")
            if layer.resource != resource:
                raise StructuralError("all layers must agree on the resource flag")
        object.__setattr__(self, "layers", layers)

    @property
    def n(self):
        return self.layers[0].n

    @property
    def m(self):
        return len(self.layers)

    @property
    def dim(self):
        return self.layers[0].dim

    @property
    def resource_enabled(self):
        return self.layers[0].resource

    @cached_property
    def node_mask(self):
        return self.layers[0].node_mask

    @cached_property
    def Bw(self):
        """Stacked ``(m, dim, dim)`` array of the layers' ``Bw``."""
        return np.stack([layer.Bw for layer in self.layers])

    @cached_property
    def Dw(self):
        """Stacked ``(m, dim)`` array of the layers' ``Dw`` diagonals."""
        return np.stack([layer.Dw for layer in self.layers])

    def with_layer(self, k, layer):
        """Copy with layer ``k`` (0-based) replaced."""
        layers = list(self.layers)
        layers[k] = layer
        return MultiVirusSystem(tuple(layers))

    def with_healing(self, k, D):
        return self.with_layer(k, self.layers[k].with_healing(D))


def normalize(raw, resource=True):
    """Build the normalized system from raw epidemiological parameters.

    ``delta_i = gamma_i + mu_i``, ``beta_ij = alpha_ij N_j / N_i``,
    ``beta_iw = (alpha_iw / delta_w) sum_j zeta_j N_j`` and
    ``c_i = zeta_i N_i / sum_j zeta_j N_j``.

    Raises:
        ValidationError: unequal birth and death rates, non-positive
            populations or healing rates, negative rates.
        StructuralError: a virus has zero total contamination mass.
    """
    if np.any(raw.N <= 0):
        raise ValidationError("population sizes N_i must be positive")
    if not np.array_equal(raw.birth, raw.mu):
        raise ValidationError("birth rate must equal death rate at every node")
    for name in ("mu", "gamma", "alpha", "alpha_w", "zeta"):
        if np.any(getattr(raw, name) < 0):
            raise ValidationError(f"{name} has negative entries")
    if np.any(raw.delta_w <= 0):
        raise ValidationError("resource decay rates delta_w must be positive")

    N = raw.N
    layers = []
    for k in range(raw.m):
        delta = raw.gamma[k] + raw.mu
        bad = np.flatnonzero(delta <= 0)
        if bad.size:
            raise ValidationError(
                f"virus {k + 1}: healing rate gamma + mu is not positive at node(s) "
                f"{', '.join(str(i + 1) for i in bad)}")
        beta = raw.alpha[k] * N[None, :] / N[:, None]
        if resource:
            mass = float(np.dot(raw.zeta[k], N))
            if mass <= 0:
                raise StructuralError(
                    f"virus {k + 1}: total contamination mass sum_j zeta_j N_j is zero, "
                    "so no node contaminates the resource")
            beta_w = raw.alpha_w[k] / raw.delta_w[k] * mass
            c = raw.zeta[k] * N / mass
            layers.append(VirusLayer(B=beta, D=delta, b=beta_w, c=c,
                                     delta_w=raw.delta_w[k]))
        else:
            layers.append(VirusLayer.sis(beta, delta))
    return MultiVirusSystem(tuple(layers))


def strongly_connected_labels(M):
    """SCC labels of the digraph with an edge ``j -> i`` whenever ``M[i, j] > 0``."""
    M = np.asarray(M)
    # Edge direction does not change strong components, only their order.
    count, labels = connected_components(M > 0, directed=True, connection="strong")
    return count, labels


def is_irreducible(layer_or_matrix):
    """Whether the digraph of ``Bw`` (or of a square matrix) is strongly connected."""
    M = layer_or_matrix.Bw if isinstance(layer_or_matrix, VirusLayer) else layer_or_matrix
    M = np.asarray(M)
    if M.shape[0] == 1:
        # 1x1: conventional definition, irreducible iff nonzero.
        return bool(M[0, 0] != 0)
    count, _ = strongly_connected_labels(M)
    return count == 1


@dataclass(frozen=True)
class Violation:
    """One failed inequality of the positivity assumption."""

    clause: str
    virus: int
    node: int = None
    value: float = None

    def __str__(self):
        where = f"virus {self.virus}" + (f", node {self.node}" if self.node else "")
        tail = "" if self.value is None else f" (value {self.value!r})"
        return f"{self.clause} violated at {where}{tail}"


def validate_assumption1(system):
    """List every violated positivity inequality; empty list iff all hold.

    Coordinates in the returned :class:`Violation` records are 1-based.
    With the resource disabled only ``delta_i > 0`` and ``beta_ij >= 0`` are
    checked.
    """
    report = []
    for k, layer in enumerate(system.layers, start=1):
        for i in np.flatnonzero(~(layer.D > 0)):
            report.append(Violation("delta_i > 0", k, int(i) + 1, float(layer.D[i])))
        for i, j in np.argwhere(layer.B < 0):
            report.append(Violation("beta_ij >= 0", k, int(i) + 1, float(layer.B[i, j])))
        if not layer.resource:
            continue
        if not layer.delta_w > 0:
            report.append(Violation("delta_w > 0", k, None, layer.delta_w))
        for i in np.flatnonzero(layer.b < 0):
            report.append(Violation("beta_iw >= 0", k, int(i) + 1, float(layer.b[i])))
        for i in np.flatnonzero(layer.c < 0):
            report.append(Violation("c_i >= 0", k, int(i) + 1, float(layer.c[i])))
        if not np.any(layer.c > 0):
            report.append(Violation("no positive c_l", k))
    return report
