"""Perron-Frobenius machinery for nonnegative and Metzler matrices.

Everything here is built on a shifted power iteration whose stopping test is
the Collatz-Wielandt bracket: for a positive vector ``v`` the ratios
``(Av)_i / v_i`` enclose the spectral radius of an irreducible nonnegative
``A``, so a bracket narrower than ``tol * max(1, rho)`` certifies the value.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, PreconditionError, ValidationError
from .netmodel import strongly_connected_labels

__all__ = [
    "SpectralResult",
    "MARGINAL_BAND",
    "spectral_radius",
    "spectral_abscissa",
    "abscissa_result",
    "sign_with_band",
    "infection_diag",
    "reproduction_number",
    "invasion_reproduction_number",
    "layer_abscissa",
    "invasion_abscissa",
]

MARGINAL_BAND = 1e-9
TOL = 1e-12
MAX_ITER = 100_000


@dataclass(frozen=True)
class SpectralResult:
    """Outcome of a power iteration.

    Attributes:
        value: spectral radius (or abscissa, for :func:`abscissa_result`).
        vector: leading eigenvector with unit 1-norm. ``None`` for reducible
            inputs, where only the value is computed.
        iterations: total power-iteration steps taken.
        converged: whether the Collatz-Wielandt bracket closed.
        bracket: final ``(lower, upper)`` enclosure of ``value``.
    """

    value: float
    vector: np.ndarray
    iterations: int
    converged: bool
    bracket: tuple = (np.nan, np.nan)


def _power_iteration(A, shift, tol, max_iter):
    n = A.shape[0]
    v = np.full(n, 1.0 / n)
    lo, hi = -np.inf, np.inf
    for it in range(1, max_iter + 1):
        Av = A @ v
        ratios = Av / v
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= tol * max(1.0, hi):
            rho = 0.5 * (lo + hi)
            return rho, v, it, True, (lo, hi)
        w = Av + shift * v
        v = w / w.sum()
        if not np.all(v > 0):
            # Underflow in a near-reducible matrix; the bracket is no longer valid.
            break
    return 0.5 * (lo + hi), v, it, False, (lo, hi)


def _irreducible_radius(A, tol, max_iter):
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0]), np.ones(1), 0, True, (A[0, 0], A[0, 0])
    diag = np.diag(A)
    if np.any(diag > 0):
        # Irreducible with a positive diagonal entry is already primitive.
        shift = 0.0
    else:
        shift = 0.5 * A.sum(axis=1).max()
    return _power_iteration(A, shift, tol, max_iter)


def spectral_radius(N, tol=TOL, max_iter=MAX_ITER):
    """Spectral radius and Perron vector of a nonnegative square matrix.

    Reducible inputs are split into strongly connected blocks and the
    largest block radius is returned (with ``vector=None``).

    Raises:
        ValidationError: ``N`` is not square or has a negative entry.
    """
    A = np.asarray(N, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if np.any(A < 0):
        raise ValidationError("spectral_radius needs an entrywise nonnegative matrix")
    count, labels = strongly_connected_labels(A)
    if count == 1:
        rho, v, it, ok, br = _irreducible_radius(A, tol, max_iter)
        result = SpectralResult(float(rho), v, it, ok, (float(br[0]), float(br[1])))
    else:
        best, total_it, ok = 0.0, 0, True
        br = (0.0, 0.0)
        for c in range(count):
            idx = np.flatnonzero(labels == c)
            block = A[np.ix_(idx, idx)]
            if idx.size == 1:
                rho, b_it, b_ok, b_br = block[0, 0], 0, True, (block[0, 0],) * 2
            else:
                rho, _, b_it, b_ok, b_br = _irreducible_radius(block, tol, max_iter)
            total_it += b_it
            ok = ok and b_ok
            if rho > best:
                best, br = rho, b_br
        result = SpectralResult(float(best), None, total_it, ok,
                                (float(br[0]), float(br[1])))
    if not result.converged:
        warnings.warn(
            f"power iteration stopped after {result.iterations} steps with bracket "
            f"{result.bracket}", ConvergenceWarning, stacklevel=2)
    return result


def abscissa_result(M, tol=TOL, max_iter=MAX_ITER):
    """Spectral abscissa of a Metzler matrix, with the leading eigenvector.

    Uses ``s(M) = rho(M + cI) - c`` with ``c = 1 + max|M_ii|``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    off = M - np.diag(np.diag(M))
    if np.any(off < 0):
        raise ValidationError("spectral_abscissa needs a Metzler matrix "
                              "(nonnegative off-diagonal entries)")
    c = 1.0 + np.abs(np.diag(M)).max()
    shifted = M + c * np.eye(M.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        r = spectral_radius(shifted, tol=tol, max_iter=max_iter)
    if not r.converged:
        warnings.warn(f"spectral abscissa did not converge after {r.iterations} steps",
                      ConvergenceWarning, stacklevel=2)
    return SpectralResult(r.value - c, r.vector, r.iterations, r.converged,
                          (r.bracket[0] - c, r.bracket[1] - c))


def spectral_abscissa(M, tol=TOL, max_iter=MAX_ITER):
    """``s(M)``, the largest real part of the spectrum of a Metzler matrix."""
    return abscissa_result(M, tol=tol, max_iter=max_iter).value


def sign_with_band(value, band=MARGINAL_BAND):
    """-1, 0 or 1, treating ``|value| <= band`` as zero."""
    if abs(value) <= band:
        return 0
    return 1 if value > 0 else -1


def infection_diag(y, node_mask):
    """``X(y)``: ``diag(y)`` with the resource coordinate zeroed."""
    return np.diag(np.where(node_mask, y, 0.0))


def _check_resident(layer, resident):
    resident = np.asarray(resident, dtype=float)
    if resident.shape != (layer.dim,):
        raise ValidationError(
            f"resident state has shape {resident.shape}, expected ({layer.dim},)")
    p = resident[layer.node_mask]
    if np.any(p != 0) and not np.all((p > 0) & (p < 1)):
        raise PreconditionError(
            "resident equilibrium must be zero or strictly inside (0, 1) at every node")
    return resident


def reproduction_number(layer):
    """Basic reproduction number ``rho(Dw^{-1} Bw)`` of one virus."""
    return spectral_radius(layer.next_generation()).value


def invasion_reproduction_number(invader, resident):
    """``rho((I - X(resident)) Dw^{-1} Bw)`` for ``invader`` entering ``resident``.

    ``resident`` is the other virus's endemic state in the same coordinates
    as ``invader`` (``dim`` entries).
    """
    resident = _check_resident(invader, resident)
    scale = np.where(invader.node_mask, 1.0 - resident, 1.0)
    return spectral_radius(scale[:, None] * invader.next_generation()).value


def layer_abscissa(layer):
    """``s(Bw - Dw)``; positive iff the virus persists on its own."""
    return spectral_abscissa(layer.Bw - np.diag(layer.Dw))


def invasion_abscissa(invader, resident):
    """``s(-Dw + (I - X(resident)) Bw)``; positive iff ``invader`` can invade."""
    resident = _check_resident(invader, resident)
    scale = np.where(invader.node_mask, 1.0 - resident, 1.0)
    return spectral_abscissa(scale[:, None] * invader.Bw - np.diag(invader.Dw))
