import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_irreducible, random_layer, scalar_layer
from siws.errors import ConvergenceWarning, PreconditionError, ValidationError
from siws.netmodel import VirusLayer
from siws.spectral import (
    abscissa_result,
    invasion_abscissa,
    invasion_reproduction_number,
    layer_abscissa,
    reproduction_number,
    sign_with_band,
    spectral_abscissa,
    spectral_radius,
)

GOLDEN = (1 + 5 ** 0.5) / 2


def test_radius_examples():
    r = spectral_radius([[0.0, 1.0], [1.0, 0.0]])
    assert r.value == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(r.vector, [0.5, 0.5], atol=1e-12)
    assert spectral_radius([[1.0, 1.0], [1.0, 0.0]]).value == pytest.approx(GOLDEN, abs=1e-11)
    r = spectral_radius(np.diag([2.0, 3.0]))
    assert r.value == 3.0 and r.vector is None


def test_radius_rejects_negative():
    with pytest.raises(ValidationError):
        spectral_radius([[1.0, -1.0], [0.0, 1.0]])


def test_abscissa_examples():
    assert spectral_abscissa(np.diag([-1.0, -2.0])) == pytest.approx(-1.0, abs=1e-12)
    M = np.array([[0.0, 1.0], [1.0, -1.0]])
    assert spectral_abscissa(M) == pytest.approx(GOLDEN - 1, abs=1e-11)
    with pytest.raises(ValidationError):
        spectral_abscissa([[0.0, -1.0], [1.0, 0.0]])


def test_reproduction_number_scalar():
    assert reproduction_number(scalar_layer()) == pytest.approx(GOLDEN, abs=1e-11)
    assert layer_abscissa(scalar_layer()) == pytest.approx(GOLDEN - 1, abs=1e-11)


def test_sign_with_band():
    assert sign_with_band(5e-10) == 0
    assert sign_with_band(-2e-9) == -1
    assert sign_with_band(0.3) == 1


def test_perron_residual_and_positivity(rng):
    for _ in range(200):
        n = rng.integers(2, 9)
        N = random_irreducible(rng, n)
        r = spectral_radius(N)
        assert r.converged
        assert np.all(r.vector > 0)
        resid = np.abs(N @ r.vector - r.value * r.vector).max()
        assert resid <= 1e-10 * max(1.0, r.value)
        assert r.value == pytest.approx(np.abs(np.linalg.eigvals(N)).max(), rel=1e-10)


def test_reducible_uses_components(rng):
    for _ in range(100):
        n = rng.integers(2, 8)
        N = np.triu(rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.5))
        r = spectral_radius(N)
        assert r.value == pytest.approx(np.abs(np.linalg.eigvals(N)).max(), abs=1e-10)


def test_perron_monotonicity(rng):
    for _ in range(100):
        n = rng.integers(2, 8)
        N = random_irreducible(rng, n)
        A = N * rng.uniform(0.2, 0.95, (n, n))
        assert spectral_radius(A).value < spectral_radius(N).value


def test_shift_identity(rng):
    for _ in range(100):
        n = rng.integers(2, 8)
        M = random_irreducible(rng, n) - np.diag(rng.uniform(0, 3, n))
        c = 1 + np.abs(np.diag(M)).max()
        lhs = spectral_abscissa(M)
        rhs = spectral_radius(M + c * np.eye(n)).value - c
        assert lhs == pytest.approx(rhs, abs=1e-9)
        assert lhs == pytest.approx(np.linalg.eigvals(M).real.max(), abs=1e-9)


def test_nonconvergence_is_flagged():
    N = np.array([[1.0, 1.0], [1e-300, 1.0]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r = spectral_radius(N, max_iter=5)
    assert not r.converged
    assert any(issubclass(w.category, ConvergenceWarning) for w in caught)


def test_invasion_zero_resident_equals_r0(rng):
    layer = random_layer(rng, 4)
    zero = np.zeros(layer.dim)
    assert invasion_reproduction_number(layer, zero) == pytest.approx(
        reproduction_number(layer), rel=1e-12)
    assert invasion_abscissa(layer, zero) == pytest.approx(layer_abscissa(layer), abs=1e-12)


def test_invasion_vanishes_near_full_occupation(rng):
    for _ in range(20):
        B = random_irreducible(rng, 3)
        layer = VirusLayer(B=B, D=rng.uniform(0.5, 1.5, 3), b=np.zeros(3),
                           c=np.full(3, 1 / 3), delta_w=1.0)
        resident = np.r_[np.full(3, 1 - 1e-9), 0.5]
        value = invasion_reproduction_number(layer, resident)
        direct = np.abs(np.linalg.eigvals(
            np.diag(np.r_[np.full(3, 1e-9), 1.0]) @ layer.next_generation())).max()
        assert value == pytest.approx(direct, abs=1e-12)
        assert value < 1e-6


def test_invasion_precondition():
    with pytest.raises(PreconditionError):
        invasion_reproduction_number(scalar_layer(), [1.0, 0.5])


def test_abscissa_result_vector_is_eigenvector(rng):
    M = random_irreducible(rng, 5) - np.diag(rng.uniform(1, 3, 5))
    r = abscissa_result(M)
    np.testing.assert_allclose(M @ r.vector, r.value * r.vector, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(0.01, 5.0)),
       arrays(np.float64, 4, elements=st.floats(0.1, 5.0)))
def test_threshold_equivalence_property(N, lam):
    s = spectral_abscissa(N - np.diag(lam))
    rho = spectral_radius(N / lam[:, None]).value
    gs, gr = sign_with_band(s), sign_with_band(rho - 1)
    assert gs == gr or 0 in (gs, gr)
