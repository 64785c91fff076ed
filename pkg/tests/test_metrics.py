import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpm.metrics import (
    default_samples,
    distance_from_traces,
    distance_from_vectors,
    distance_order_scan,
    jackknife,
    loglog_slope,
    polyfit_even_powers,
    power_distance,
    random_phase_batch,
)
from qpm.qpower import PowerConfig


def _naive_distance(A, B):
    taa = np.trace(A.conj().T @ A).real
    tbb = np.trace(B.conj().T @ B).real
    tab = np.trace(A.conj().T @ B)
    return np.sqrt(1 - abs(tab) / np.sqrt(taa * tbb))


def _random_matrix(rng, n=8):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@given(seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_gram_form_matches_definition(seed):
    rng = np.random.default_rng(seed)
    A, B = _random_matrix(rng), _random_matrix(rng)
    E = B - A
    got = distance_from_traces(np.trace(A.conj().T @ A).real, np.trace(E.conj().T @ E).real,
                               np.trace(A.conj().T @ E))
    assert got == pytest.approx(_naive_distance(A, B), rel=1e-10)


def test_distance_properties():
    rng = np.random.default_rng(0)
    A, B = _random_matrix(rng), _random_matrix(rng)
    ident = np.eye(8)

    def d(X, Y):
        return distance_from_vectors((X @ ident).T, (Y @ ident).T).d

    assert d(A, A) == 0.0
    assert d(A, 3.7j * A) == pytest.approx(0.0, abs=1e-7)
    assert d(A, B) == pytest.approx(d(B, A), rel=1e-12)
    assert 0.0 <= d(A, B) <= 1.0


def test_gram_form_resolves_tiny_distances():
    """1 - |T_ab|/sqrt(T_aa T_bb) computed naively would round to zero here."""
    rng = np.random.default_rng(1)
    A = _random_matrix(rng)
    E = 1e-10 * _random_matrix(rng)
    d = distance_from_traces(np.trace(A.conj().T @ A).real, np.trace(E.conj().T @ E).real,
                             np.trace(A.conj().T @ E))
    assert 1e-12 < d < 1e-9
    with pytest.raises(ZeroDivisionError):
        distance_from_traces(0.0, 0.0, 0j)


def test_random_phase_trace_is_unbiased():
    rng = np.random.default_rng(3)
    A = _random_matrix(rng, 16)
    phis = random_phase_batch(4, 4000, seed=5)
    est = np.einsum("ri,ij,rj->r", phis.conj(), A, phis)
    mean, err = est.mean(), est.std() / np.sqrt(len(est))
    assert abs(mean - np.trace(A)) < 4 * err
    # a diagonal operator is traced exactly by every single sample
    D = np.diag(rng.normal(size=16))
    np.testing.assert_allclose(np.einsum("ri,ij,rj->r", phis.conj(), D, phis), np.trace(D))


@pytest.mark.property
@given(value=st.floats(-1e3, 1e3), R=st.integers(2, 50))
@settings(max_examples=30, deadline=None)
def test_jackknife_zero_for_constant_samples(value, R):
    samples = np.full((R, 2), value)
    full, err = jackknife(samples, lambda m: m[0] + m[1])
    assert full == pytest.approx(2 * value)
    assert err == pytest.approx(0.0, abs=1e-12 * max(1.0, abs(value)))


def test_jackknife_of_mean_is_standard_error():
    x = np.random.default_rng(2).normal(size=(40, 1))
    _, err = jackknife(x, lambda m: m[0])
    assert err == pytest.approx(x.std(ddof=1) / np.sqrt(40), rel=1e-12)
    assert np.isnan(jackknife(x[:1], lambda m: m[0])[1])


def test_polyfit_recovers_exact_coefficients():
    x = np.linspace(0.02, 0.1, 5)
    y = 0.3 - 2.0 * x**2 + 5.0 * x**4
    fit = polyfit_even_powers(x, y, orders=(2, 4))
    np.testing.assert_allclose(fit.coefficients, [0.3, -2.0, 5.0], atol=1e-9)
    assert fit.intercept_stderr < 1e-9
    np.testing.assert_allclose(fit(x), y, atol=1e-12)
    with pytest.raises(ValueError):
        polyfit_even_powers(x[:2], y[:2], orders=(2, 4))
    with pytest.raises(np.linalg.LinAlgError):
        polyfit_even_powers(np.ones(4), np.ones(4), orders=(2,))


def test_polyfit_weighted_errors_scale_with_sigma():
    x = np.linspace(0.1, 0.5, 6)
    y = 1.0 + x**2
    a = polyfit_even_powers(x, y, sigma=np.full(6, 0.1))
    b = polyfit_even_powers(x, y, sigma=np.full(6, 0.2))
    assert b.intercept_stderr == pytest.approx(2 * a.intercept_stderr)


def test_loglog_slope():
    x = np.array([0.1, 0.2, 0.4])
    slope, err = loglog_slope(x, 7 * x**3)
    assert slope == pytest.approx(3.0) and err < 1e-10


def test_default_samples():
    assert default_samples(10) == 256 and default_samples(16) == 16


def test_power_distance_scaling(ring6, s2):
    ds = [power_distance(ring6, PowerConfig(1, dt, s2), R=16, seed=1).d for dt in (0.1, 0.05)]
    assert np.log2(ds[0] / ds[1]) == pytest.approx(2.0, abs=0.2)
    est = power_distance(ring6, PowerConfig(2, 0.1, s2), R=16, seed=1)
    assert est.stderr > 0 and not est.cancellation_warning
    with pytest.raises(ValueError):
        power_distance(ring6, PowerConfig(1, 0.1, s2), n=101)


def test_order_scan_matches_single_runs(ring6, s2):
    rows = distance_order_scan(ring6, [1, 2], [0.1], r=0, R=8, seed=4, scheme=s2)
    single = power_distance(ring6, PowerConfig(2, 0.1, s2), R=8, seed=4)
    assert rows[1].n == 2 and rows[1].d == pytest.approx(single.d, rel=1e-10)
