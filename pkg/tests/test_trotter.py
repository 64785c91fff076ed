import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from oracles import hamiltonian_dense, trotter_dense
from qpm.hamiltonian import apply_part, exact_ground_state, heisenberg_ring, natural_sector
from qpm.refstates import heisenberg_references
from qpm.statevector import random_state
from qpm.trotter import apply_trotter, depth, propagator_deviation, suzuki_coefficients

LISTED_M2_P5 = [
    0.20724538589718786, 0.4144907717943757, 0.4144907717943757, 0.4144907717943757,
    -0.12173615769156357, -0.6579630871775028, -0.12173615769156357, 0.4144907717943757,
    0.4144907717943757, 0.4144907717943757, 0.20724538589718786,
]


def test_listed_coefficients():
    sc = suzuki_coefficients(2, 5, 2)
    np.testing.assert_allclose(sc.s, LISTED_M2_P5, rtol=0, atol=1e-12)
    assert sc.part_index.tolist() == [0, 1] * 5 + [0]


@pytest.mark.parametrize("m,p,g,d", [(1, 3, 2, 3), (2, 3, 2, 7), (2, 5, 2, 11),
                                     (2, 7, 2, 15), (3, 3, 2, 19), (3, 5, 2, 51)])
def test_depths(m, p, g, d):
    assert depth(m, p, g) == d
    assert suzuki_coefficients(m, p, g).depth == d


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("p", [3, 5, 7])
@pytest.mark.parametrize("g", [2, 3, 4])
def test_sum_rule_and_palindrome(m, p, g):
    sc = suzuki_coefficients(m, p, g)
    assert sc.s.sum() == pytest.approx(g, abs=1e-12)
    np.testing.assert_allclose(sc.s, sc.s[::-1], atol=1e-14)
    np.testing.assert_array_equal(sc.part_index, sc.part_index[::-1])
    # each part accumulates unit total time
    for gamma in range(g):
        assert sc.s[sc.part_index == gamma].sum() == pytest.approx(1.0, abs=1e-12)
    # no two neighbours act on the same part after contraction
    assert np.all(np.diff(sc.part_index) != 0)
    assert sc.depth == depth(m, p, g)


@pytest.mark.parametrize("bad", [(0, 3, 2), (1, 4, 2), (1, 1, 2), (1, 3, 1)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        suzuki_coefficients(*bad)


@pytest.mark.parametrize("m,p", [(1, 3), (2, 3), (2, 5)])
def test_order_against_dense_exponential(m, p):
    H = heisenberg_ring(4)
    Hd = hamiltonian_dense(H)
    sc = suzuki_coefficients(m, p, 2)
    dts = np.array([0.4, 0.2, 0.1]) if m == 2 else np.array([0.1, 0.05, 0.025])
    errs = [np.linalg.norm(trotter_dense(H, sc, dt) - expm(-1j * dt * Hd), 2) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(2 * m + 1, abs=0.15)


def test_statevector_apply_matches_dense_product(ring6, s4):
    psi = random_state(6, 2)
    got = apply_trotter(s4, ring6, 0.3, psi).amplitudes
    np.testing.assert_allclose(got, trotter_dense(ring6, s4, 0.3) @ psi.amplitudes, atol=1e-12)


@pytest.mark.property
@given(dt=st.floats(-1.0, 1.0), seed=st.integers(0, 2**16), m=st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_unitarity_and_reversal(dt, seed, m):
    H = heisenberg_ring(6)
    sc = suzuki_coefficients(m, 3, 2)
    psi = random_state(6, seed)
    fwd = apply_trotter(sc, H, dt, psi)
    assert fwd.norm() == pytest.approx(1.0, abs=1e-12)
    back = apply_trotter(sc, H, -dt, fwd)
    np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-12)


def test_scheme_part_count_must_match(ring6):
    with pytest.raises(ValueError):
        apply_trotter(suzuki_coefficients(1, 3, 3), ring6, 0.1, random_state(6, 0))


@pytest.fixture(scope="module")
def ring10_gs():
    H = heisenberg_ring(10)
    return H, exact_ground_state(H, sector=natural_sector(H))


def test_propagator_deviation_starts_at_zero(ring10_gs):
    H, gs = ring10_gs
    dK = propagator_deviation(H, suzuki_coefficients(1, 3, 2), 0.1, 3, gs.state, gs.energy)
    assert abs(dK[0]) < 1e-14


def test_propagator_deviation_collapses_with_dtau_power(ring10_gs):
    H, gs = ring10_gs
    sc = suzuki_coefficients(1, 3, 2)
    curves = []
    for dt in (0.07, 0.1):
        steps = int(round(5.0 / dt))
        dK = propagator_deviation(H, sc, dt, steps, gs.state, gs.energy)
        t = dt * np.arange(steps + 1)
        curves.append((t, dK.real / dt**2))
    t_common = np.linspace(0.5, 5.0, 10)
    a = np.interp(t_common, *curves[0])
    b = np.interp(t_common, *curves[1])
    assert np.all(np.abs(a - b) <= 0.1 * np.maximum(np.abs(a), np.abs(b)))


def test_larger_p_reduces_deviation(ring10_gs):
    H, gs = ring10_gs
    dt = 0.1
    vals = [abs(propagator_deviation(H, suzuki_coefficients(2, p, 2), dt, 50,
                                     gs.state, gs.energy)[-1].real) for p in (3, 5)]
    assert vals[1] < 0.1 * vals[0]


def test_singlet_product_is_part_eigenstate():
    H = heisenberg_ring(8)
    phi_b = heisenberg_references(8).states[1]
    sc = suzuki_coefficients(1, 3, 2)
    # phi_B is an eigenstate of the B part (energy -J/2 per bond), not of H
    out = apply_part(H, 1, phi_b).amplitudes
    np.testing.assert_allclose(out, -2.0 * phi_b.amplitudes, atol=1e-13)
    assert apply_trotter(sc, H, 0.1, phi_b).norm() == pytest.approx(1.0)
