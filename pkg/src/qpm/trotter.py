"""Recursive symmetric Suzuki-Trotter schemes S_2m^(p) and their application."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import PartitionedHamiltonian
from .statevector import State


@dataclass(frozen=True)
class TrotterScheme:
    """Palindromic product of D exponentials exp(-i dtau s_i H_{part_index[i]})."""

    m: int
    p: int
    n_gamma: int
    s: np.ndarray
    part_index: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.s)

    @property
    def order(self) -> int:
        return 2 * self.m

    def cumulative(self) -> np.ndarray:
        """Running time T_i = sum_{j<=i} s_j, counted per part as in the listing output."""
        return np.cumsum(self.s)


def _validate(m: int, p: int, n_gamma: int) -> None:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if p < 3 or p % 2 == 0:
        raise ValueError(f"p must be an odd integer >= 3, got {p}")
    if n_gamma < 2:
        raise ValueError(f"n_gamma must be >= 2, got {n_gamma}")


def depth(m: int, p: int, n_gamma: int) -> int:
    """Number of non-commuting exponentials after contraction: 2(N_G-1)p^(m-1)+1."""
    _validate(m, p, n_gamma)
    return 2 * (n_gamma - 1) * p ** (m - 1) + 1


def suzuki_coefficients(m: int, p: int = 3, n_gamma: int = 2) -> TrotterScheme:
    """Build S_2m^(p) by the fractal recursion, merging adjacent equal-part exponentials.

    Each level splits S_{2j-2} into (p-1)/2 copies at time k*dt, one at
    (1-(p-1)k)*dt, and (p-1)/2 mirrored copies, with
    k = 1/((p-1) - (p-1)^(1/(2j-1))).
    """
    _validate(m, p, n_gamma)
    s = np.full(2 * n_gamma - 1, 0.5)
    s[n_gamma - 1] = 1.0
    parts = np.concatenate([np.arange(n_gamma), np.arange(n_gamma - 2, -1, -1)])
    half = (p - 1) // 2
    for level in range(2, m + 1):
        k = 1.0 / ((p - 1) - (p - 1) ** (1.0 / (2 * level - 1)))
        k_tilde = 1.0 - (p - 1) * k
        # one outer block drops its last exponential, which merges with the next block's first
        side = s[:-1] * k
        side[0] *= 2.0
        side = np.concatenate([side] * half)
        side[0] /= 2.0
        centre = s * k_tilde
        centre[0] += side[0]
        centre[-1] = centre[0]
        s = np.concatenate([side, centre, side[::-1]])
        side_parts = np.concatenate([parts[:-1]] * half)
        parts = np.concatenate([side_parts, parts, side_parts[::-1]])
    return TrotterScheme(m, p, n_gamma, s, parts.astype(np.int64))


def apply_trotter_array(scheme: TrotterScheme, H: PartitionedHamiltonian, dtau: complex,
                        amps: np.ndarray) -> np.ndarray:
    groups = H.groups
    out = amps
    # the rightmost exponential acts first; the scheme is palindromic so order is moot
    for s_i, g in zip(scheme.s[::-1], scheme.part_index[::-1]):
        out = groups[g].apply_exponential(out, dtau * s_i)
    return out


def apply_trotter(scheme: TrotterScheme, H: PartitionedHamiltonian, dtau: float,
                  state: State) -> State:
    if scheme.n_gamma != H.n_gamma:
        raise ValueError(f"scheme has {scheme.n_gamma} parts, Hamiltonian {H.n_gamma}")
    if state.n_qubits != H.n_qubits:
        raise ValueError("state and Hamiltonian sizes differ")
    return State(state.n_qubits, apply_trotter_array(scheme, H, dtau, state.amplitudes))


def apply_trotter_imaginary(scheme: TrotterScheme, H: PartitionedHamiltonian, dtau: float,
                            state: State, renormalize: bool = True) -> State:
    """Imaginary-time product: each factor is e^{-dtau s_i H_G}, renormalised after every factor."""
    groups = H.groups
    out = state.amplitudes
    for s_i, g in zip(scheme.s[::-1], scheme.part_index[::-1]):
        out = groups[g].apply_exponential(out, -1j * dtau * s_i)
        if renormalize:
            out = out / np.linalg.norm(out)
    return State(state.n_qubits, out)


def propagator_deviation(H: PartitionedHamiltonian, scheme: TrotterScheme, dtau: float,
                         steps: int, psi0: State, E0: float) -> np.ndarray:
    """dK(l dtau) = <psi0|S(dtau)^l|psi0> - exp(-i E0 l dtau) for l = 0..steps."""
    out = np.empty(steps + 1, dtype=np.complex128)
    amps = psi0.amplitudes
    cur = amps
    out[0] = np.vdot(amps, cur) - 1.0
    for l in range(1, steps + 1):
        cur = apply_trotter_array(scheme, H, dtau, cur)
        out[l] = np.vdot(amps, cur) - np.exp(-1j * E0 * l * dtau)
    return out
