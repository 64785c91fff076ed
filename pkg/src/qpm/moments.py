"""Hamiltonian moments and cumulants from the Trotterised propagator.

K(t) = <psi|e^{-iHt}|psi> is sampled at t = l dt/2 from one forward ladder.
Central differences give mu_n = i^n K^(n)(0) and kappa_n = i^n Phi^(n)(0) with
Phi = ln K. Also provided: the moment/cumulant conversions, the connected
moment expansion of E(tau), and Lanczos coefficients from Hankel ratios.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .hamiltonian import PartitionedHamiltonian, apply_hamiltonian_array, to_sparse
from .qpower import CANCELLATION_DIGITS, cnk, richardson_weights
from .statevector import State
from .trotter import TrotterScheme, apply_trotter_array


class PhaseUnwrapWarning(UserWarning):
    pass


class LanczosBreakdown(ArithmeticError):
    """A Hankel determinant ratio lost positivity."""

    def __init__(self, index: int, value: float):
        super().__init__(f"Hankel ratio r_{index} = {value:.3e} is not positive")
        self.index = index
        self.value = value


@dataclass
class PropagatorSeries:
    dtau: float
    values: np.ndarray          # K_l for l = 0..L, at t = l dtau / 2
    phase_unwrapped: np.ndarray

    @property
    def length(self) -> int:
        return len(self.values) - 1

    @property
    def unwrap_ambiguous(self) -> bool:
        """True when a neighbouring phase step exceeds pi/2 (half the branch margin)."""
        return bool(np.any(np.abs(np.diff(self.phase_unwrapped)) > np.pi / 2))

    def K(self, l: int) -> complex:
        v = self.values[abs(l)]
        return v if l >= 0 else np.conj(v)

    def Phi(self, l: int) -> complex:
        phi = complex(np.log(abs(self.values[abs(l)])), self.phase_unwrapped[abs(l)])
        return phi if l >= 0 else phi.conjugate()


def propagator_series(H: PartitionedHamiltonian, scheme: TrotterScheme, dtau: float, L: int,
                      psi: State) -> PropagatorSeries:
    """K_l = <psi|[S(dtau/2)]^l|psi> for l = 0..L."""
    amps = psi.amplitudes
    if abs(np.linalg.norm(amps) - 1.0) > 1e-10:
        raise ValueError("propagator_series needs a normalised state")
    vals = np.empty(L + 1, dtype=np.complex128)
    cur = amps
    vals[0] = 1.0
    for l in range(1, L + 1):
        cur = apply_trotter_array(scheme, H, dtau / 2.0, cur)
        vals[l] = np.vdot(amps, cur)
    return PropagatorSeries(dtau, vals, np.unwrap(np.angle(vals)))


def _as_levels(series) -> list[PropagatorSeries]:
    return [series] if isinstance(series, PropagatorSeries) else list(series)


def _fd(series: PropagatorSeries, n: int, f) -> tuple[float, float, float]:
    """Real central difference, its imaginary residual, and the sum of |c_{n,k} f|.

    Pairing k with n - k (f(-l) = conj f(l)) leaves only Im f for odd n and
    Re f for even n, so the estimate is real by construction.
    """
    if series.length < n:
        raise ValueError(f"series has {series.length} steps, order {n} needs {n}")
    terms = [cnk(n, k, series.dtau) * f(series, n - 2 * k) for k in range(n + 1)]
    full = sum(terms)
    scale = sum(abs(t) for t in terms)
    return full.real, full.imag, scale


def _combine(series, n: int, r: int, h: float, f) -> float:
    levels = _as_levels(series)
    if len(levels) < r + 1:
        raise ValueError(f"Richardson order {r} needs {r + 1} series at dtau/h^l")
    w = richardson_weights(r, h)
    value = imag = scale = 0.0
    for wl, s in zip(w, levels):
        re, im, sc = _fd(s, n, f)
        value += wl * re
        imag += wl * im
        scale += abs(wl) * sc
    # the imaginary part vanishes exactly; what remains is amplified roundoff
    if abs(imag) > 1e-9 * max(1.0, abs(value), 1e-6 * scale):
        raise ArithmeticError(f"finite-difference estimate has imaginary part {imag:.3e}")
    return float(value)


def moments_from_propagator(series, n: int, r: int = 0, h: float = 2.0) -> float:
    """mu_n(dtau) = sum_k c_{n,k} K((n/2 - k) dtau), Richardson-combined when r > 0.

    ``series`` is one PropagatorSeries (r = 0) or a list at dtau / h^l, l = 0..r.
    """
    if n == 0:
        return 1.0
    return _combine(series, n, r, h, PropagatorSeries.K)


def cumulants_from_propagator(series, n: int, r: int = 0, h: float = 2.0) -> float:
    """kappa_n(dtau) from Phi = ln|K| + i arg K with the phase unwrapped along l."""
    if n == 0:
        return 0.0
    if any(s.unwrap_ambiguous for s in _as_levels(series)):
        warnings.warn("propagator phase steps exceed pi/2; the unwrapped branch may be wrong",
                      PhaseUnwrapWarning, stacklevel=2)
    return _combine(series, n, r, h, PropagatorSeries.Phi)


def fd_digits_lost(series: PropagatorSeries, n: int) -> float:
    """log10 of sum |c_{n,k} K| over |mu_n(dtau)|; large values signal cancellation."""
    value, _, scale = _fd(series, n, PropagatorSeries.K)
    return math.log10(scale / abs(value)) if value != 0 else float("inf")


def fd_cancellation_warning(series: PropagatorSeries, n: int) -> bool:
    return fd_digits_lost(series, n) >= CANCELLATION_DIGITS


def cumulants_from_moments(mu: Sequence[float]) -> np.ndarray:
    """kappa_n = mu_n - sum_{k=1}^{n-1} C(n-1, k-1) kappa_k mu_{n-k}."""
    mu = np.asarray(mu, dtype=float)
    if abs(mu[0] - 1.0) > 1e-12:
        raise ValueError(f"mu_0 must be 1, got {mu[0]}")
    kappa = np.zeros_like(mu)
    for n in range(1, len(mu)):
        kappa[n] = mu[n] - sum(math.comb(n - 1, k - 1) * kappa[k] * mu[n - k]
                               for k in range(1, n))
    return kappa


def moments_from_cumulants(kappa: Sequence[float]) -> np.ndarray:
    """mu_n = sum_{k=1}^{n} C(n-1, k-1) kappa_k mu_{n-k}, mu_0 = 1."""
    kappa = np.asarray(kappa, dtype=float)
    mu = np.zeros_like(kappa)
    mu[0] = 1.0
    for n in range(1, len(kappa)):
        mu[n] = sum(math.comb(n - 1, k - 1) * kappa[k] * mu[n - k] for k in range(1, n + 1))
    return mu


def exact_moments(H: PartitionedHamiltonian, psi: State, n_max: int) -> np.ndarray:
    """<psi|H^n|psi> for n = 0..n_max by repeated sparse application."""
    amps = psi.amplitudes
    # <H^n> = <H^a psi|H^b psi> with a + b = n keeps the vectors short
    half = (n_max + 1) // 2
    vecs = [amps]
    for _ in range(half):
        vecs.append(apply_hamiltonian_array(H, vecs[-1]))
    mu = np.empty(n_max + 1)
    for n in range(n_max + 1):
        a, b = (n + 1) // 2, n // 2
        mu[n] = np.vdot(vecs[a], vecs[b]).real
    return mu / mu[0]


def cmx_energy(kappa: Sequence[float], n_max: int, tau_grid) -> np.ndarray:
    """E_{n_max}(tau) = sum_{n=0}^{n_max-1} (-tau)^n kappa_{n+1} / n!."""
    kappa = np.asarray(kappa, dtype=float)
    if len(kappa) < n_max + 1:
        raise ValueError(f"need cumulants up to kappa_{n_max}")
    tau = np.asarray(tau_grid, dtype=float)
    return sum((-tau) ** n * kappa[n + 1] / math.factorial(n) for n in range(n_max))


def exact_ite_energy(H: PartitionedHamiltonian, psi: State, tau_grid) -> np.ndarray:
    """E(tau) = <psi|H e^{-tau H}|psi> / <psi|e^{-tau H}|psi> on the grid."""
    if H.n_qubits > 20:
        raise ValueError("exact_ite_energy supports at most 20 qubits")
    tau = np.asarray(tau_grid, dtype=float)
    A = to_sparse(H)
    amps = psi.amplitudes
    if A.shape[0] <= 4096:
        E, V = np.linalg.eigh(A.toarray())
        w = np.abs(V.conj().T @ amps) ** 2
        # populations at roundoff level are zero; keeping them would let a
        # symmetry-forbidden level take over at large tau
        w[w < 1e-24 * w.sum()] = 0.0
        e_ref = E[np.argmax(w > 0)]
        boltz = w[None, :] * np.exp(-np.outer(tau, E - e_ref))
        return boltz @ E / boltz.sum(axis=1)
    out = np.empty(len(tau))
    for i, t in enumerate(tau):
        v = spla.expm_multiply(-0.5 * t * A, amps)
        out[i] = np.vdot(v, A @ v).real / np.vdot(v, v).real
    return out


def hankel_ratios(mu: Sequence[float], offset: int, count: int) -> np.ndarray:
    """det A_n / det A_{n-1} for n = 0..count-1 with [A_n]_ij = mu_{i+j+offset}.

    The first entry is mu_offset (det A_{-1} = 1). Uses the Schur complement
    r_n = mu_{2n+offset} - m_n^T A_{n-1}^{-1} m_n with rank-1 updates of the inverse.
    """
    mu = np.asarray(mu, dtype=float)
    ratios = np.empty(count)
    ratios[0] = mu[offset]
    if ratios[0] == 0.0:
        raise LanczosBreakdown(0, 0.0)
    inv = np.array([[1.0 / ratios[0]]])
    for n in range(1, count):
        m = mu[n + offset:2 * n + offset]
        x = inv @ m
        r = mu[2 * n + offset] - m @ x
        ratios[n] = r
        if n == count - 1:
            break
        if r == 0.0:
            raise LanczosBreakdown(n, r)
        new = np.empty((n + 1, n + 1))
        new[:n, :n] = inv + np.outer(x, x) / r
        new[:n, n] = new[n, :n] = -x / r
        new[n, n] = 1.0 / r
        inv = new
    return ratios


def lanczos_from_moments(mu: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Lanczos (alpha_i, beta_i) from moments mu_0..mu_K.

    alpha_i needs mu up to 2i - 1 and beta_i up to 2i, so K = 2n + 1 yields
    n + 1 alphas and n betas.
    """
    mu = np.asarray(mu, dtype=float)
    K = len(mu) - 1
    n_alpha = (K + 1) // 2
    n_beta = K // 2
    lr = hankel_ratios(mu, 0, n_beta + 1)      # L_n / L_{n-1}, n = 0..n_beta
    for i, r in enumerate(lr):
        if r <= 0:
            raise LanczosBreakdown(i, r)
    mr = hankel_ratios(mu, 1, n_alpha)          # M_n / M_{n-1}, n = 0..n_alpha-1

    def L(i):  # L_i / L_{i-1}
        return lr[i]

    def Mr(i):  # M_i / M_{i-1}, with M_{-1} / M_{-2} infinite
        return np.inf if i < 0 else mr[i]

    alpha = np.array([L(i - 1) / Mr(i - 2) + Mr(i - 1) / L(i - 1) for i in range(1, n_alpha + 1)])
    beta = np.sqrt(np.array([L(i) / L(i - 1) for i in range(1, n_beta + 1)]))
    return alpha, beta


def lanczos_coefficients(H: PartitionedHamiltonian, psi: State, k: int):
    """Classical Lanczos with full reorthogonalisation: first k alphas and k-1 betas."""
    q = psi.amplitudes / np.linalg.norm(psi.amplitudes)
    Q = [q]
    alpha, beta = [], []
    for i in range(k):
        w = apply_hamiltonian_array(H, Q[-1])
        alpha.append(np.vdot(Q[-1], w).real)
        for _ in range(2):
            for qj in Q:
                w = w - np.vdot(qj, w) * qj
        if i == k - 1:
            break
        b = np.linalg.norm(w)
        beta.append(b)
        Q.append(w / b)
    return np.array(alpha), np.array(beta)
