import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hamiltonian_dense
from qpm.hamiltonian import exact_ground_state, heisenberg_ring, natural_sector
from qpm.moments import (
    LanczosBreakdown,
    PhaseUnwrapWarning,
    PropagatorSeries,
    cmx_energy,
    cumulants_from_moments,
    cumulants_from_propagator,
    exact_ite_energy,
    exact_moments,
    fd_cancellation_warning,
    hankel_ratios,
    lanczos_coefficients,
    lanczos_from_moments,
    moments_from_cumulants,
    moments_from_propagator,
    propagator_series,
)
from qpm.refstates import heisenberg_references
from qpm.statevector import random_state, zero_state


def _point_moments(energies, weights, n_max):
    return np.array([np.dot(weights, energies**n) for n in range(n_max + 1)])


def test_exact_moments_match_dense(ring6):
    psi = random_state(6, 2)
    Hd = hamiltonian_dense(ring6)
    want = [np.vdot(psi.amplitudes, np.linalg.matrix_power(Hd, n) @ psi.amplitudes).real
            for n in range(7)]
    np.testing.assert_allclose(exact_moments(ring6, psi, 6), want, rtol=1e-12)


def test_point_distribution_cumulants():
    """A single energy level has kappa_1 = E and no higher cumulants."""
    mu = _point_moments(np.array([-1.3]), np.array([1.0]), 6)
    kappa = cumulants_from_moments(mu)
    assert kappa[1] == pytest.approx(-1.3)
    np.testing.assert_allclose(kappa[2:], 0.0, atol=1e-12)


def test_third_cumulant_formula():
    mu = _point_moments(np.array([-1.0, 0.5, 2.0]), np.array([0.2, 0.5, 0.3]), 3)
    k = cumulants_from_moments(mu)
    assert k[2] == pytest.approx(mu[2] - mu[1] ** 2)
    assert k[3] == pytest.approx(mu[3] - 3 * mu[2] * mu[1] + 2 * mu[1] ** 3)


@given(seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_moment_cumulant_round_trip(seed):
    rng = np.random.default_rng(seed)
    mu = _point_moments(rng.normal(size=4), rng.dirichlet(np.ones(4)), 8)
    back = moments_from_cumulants(cumulants_from_moments(mu))
    np.testing.assert_allclose(back, mu, rtol=1e-12, atol=1e-12)


def test_cumulants_need_normalised_moments():
    with pytest.raises(ValueError):
        cumulants_from_moments([2.0, 1.0])


def test_two_level_cmx():
    """For two levels the exact E(tau) is known in closed form; CMX matches its Taylor series."""
    e, w = np.array([-1.0, 1.0]), np.array([0.7, 0.3])
    kappa = cumulants_from_moments(_point_moments(e, w, 8))
    tau = np.array([0.0, 0.01, 0.02])
    exact = (w * e * np.exp(-np.outer(tau, e))).sum(1) / (w * np.exp(-np.outer(tau, e))).sum(1)
    np.testing.assert_allclose(cmx_energy(kappa, 6, tau), exact, atol=1e-10)
    assert cmx_energy(kappa, 1, tau) == pytest.approx(np.full(3, kappa[1]))
    with pytest.raises(ValueError):
        cmx_energy(kappa[:3], 4, tau)


def test_exact_ite_energy_limits(ring6):
    psi = heisenberg_references(6).states[0]
    gs = exact_ground_state(ring6, sector=natural_sector(ring6))
    E = exact_ite_energy(ring6, psi, [0.0, 50.0])
    assert E[0] == pytest.approx(exact_moments(ring6, psi, 1)[1])
    assert E[1] == pytest.approx(gs.energy, abs=1e-9)


def test_hankel_ratios_equal_determinant_ratios():
    mu = _point_moments(np.array([-2.0, -0.5, 0.3, 1.1, 2.4]),
                        np.array([0.1, 0.3, 0.2, 0.25, 0.15]), 10)
    for offset in (0, 1):
        r = hankel_ratios(mu, offset, 4)
        dets = [1.0] + [np.linalg.det(np.array([[mu[i + j + offset] for j in range(n + 1)]
                                                for i in range(n + 1)])) for n in range(4)]
        np.testing.assert_allclose(r, np.array(dets[1:]) / np.array(dets[:-1]), rtol=1e-9)


@pytest.mark.property
@given(seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_hankel_gram_positivity(seed):
    """Moments of a genuine state give positive Hankel determinant ratios."""
    rng = np.random.default_rng(seed)
    mu = _point_moments(rng.normal(size=6), rng.dirichlet(np.ones(6)), 8)
    assert np.all(hankel_ratios(mu, 0, 5) > 0)


def test_lanczos_from_moments_matches_classical(ring8):
    psi = heisenberg_references(8).states[0]
    mu = exact_moments(ring8, psi, 11)
    alpha, beta = lanczos_from_moments(mu)
    a_ref, b_ref = lanczos_coefficients(ring8, psi, 6)
    np.testing.assert_allclose(alpha, a_ref, atol=1e-8)
    np.testing.assert_allclose(beta, b_ref[:5], atol=1e-8)


def test_lanczos_breakdown_on_exhausted_space():
    mu = _point_moments(np.array([-1.0, 1.0]), np.array([0.5, 0.5]), 7)
    with pytest.raises(LanczosBreakdown):
        lanczos_from_moments(mu)


# ---------------------------------------------------------------- propagator

def test_propagator_basics(ring6, s2):
    psi = random_state(6, 1)
    series = propagator_series(ring6, s2, 0.1, 6, psi)
    assert series.K(0) == 1.0
    assert series.K(-2) == np.conj(series.K(2))
    with pytest.raises(ValueError):
        propagator_series(ring6, s2, 0.1, 2, psi.scale(2.0))


def test_eigenstate_has_unit_modulus_propagator(ring6, s2):
    """The fully polarised state is an eigenstate of every bond, hence of S."""
    series = propagator_series(ring6, s2, 0.3, 4, zero_state(6))
    np.testing.assert_allclose(np.abs(series.values), 1.0, atol=1e-14)
    e = exact_moments(ring6, zero_state(6), 1)[1]
    np.testing.assert_allclose(series.values, np.exp(-1j * e * 0.15 * np.arange(5)), atol=1e-13)


def test_fd_moments_converge_to_exact(ring6, s2):
    psi = random_state(6, 3)
    exact = exact_moments(ring6, psi, 2)
    for n in (1, 2):
        errs = []
        for dt in (0.2, 0.1):
            s = propagator_series(ring6, s2, dt, n, psi)
            errs.append(abs(moments_from_propagator(s, n) - exact[n]))
        assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)
    levels = [propagator_series(ring6, s2, 0.2 / 2**l, 2, psi) for l in range(2)]
    assert moments_from_propagator(levels, 2, r=1) == pytest.approx(exact[2], rel=1e-4)
    with pytest.raises(ValueError):
        moments_from_propagator(levels[:1], 2, r=1)


def test_fd_cumulants_converge_to_exact(ring6, s2):
    psi = random_state(6, 4)
    exact = cumulants_from_moments(exact_moments(ring6, psi, 3))
    for n in (1, 2, 3):
        errs = [abs(cumulants_from_propagator(propagator_series(ring6, s2, dt, n, psi), n)
                    - exact[n]) for dt in (0.1, 0.05)]
        assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)


def test_phase_unwrap_warning():
    vals = np.exp(1j * np.array([0.0, 2.0, 4.0]))
    series = PropagatorSeries(1.0, vals, np.unwrap(np.angle(vals)))
    assert series.unwrap_ambiguous
    with pytest.warns(PhaseUnwrapWarning):
        cumulants_from_propagator(series, 2)


def test_cancellation_flag_for_tiny_dtau(ring6, s2):
    psi = random_state(6, 0)
    assert fd_cancellation_warning(propagator_series(ring6, s2, 1e-5, 2, psi), 2)
    assert not fd_cancellation_warning(propagator_series(ring6, s2, 0.1, 2, psi), 2)


def test_ite_energy_large_state_path():
    """Above 4096 amplitudes the sparse branch is used; check it against the cumulant slope."""
    H = heisenberg_ring(14)
    psi = heisenberg_references(14).states[0]
    kappa = cumulants_from_moments(exact_moments(H, psi, 3))
    tau = np.array([0.0, 1e-3])
    E = exact_ite_energy(H, psi, tau)
    assert E[0] == pytest.approx(kappa[1], abs=1e-12)
    assert (E[1] - E[0]) / 1e-3 == pytest.approx(-kappa[2], rel=1e-2)
