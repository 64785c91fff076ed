"""Reference states for the Krylov block and QPSV state file loading."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .hamiltonian import (
    HUBBARD_RUNGS,
    HUBBARD_SITES,
    GroundState,
    exact_ground_state,
    hubbard_ladder_4x2,
    natural_sector,
)
from .statevector import State, _basis_indices, product_state, read_state, save_state

SQ2 = 1.0 / np.sqrt(2.0)
KET0 = (1.0, 0.0)
KET1 = (0.0, 1.0)
PLUS = (SQ2, SQ2)
MINUS = (SQ2, -SQ2)
RIGHT = (SQ2, 1j * SQ2)
LEFT = (SQ2, -1j * SQ2)


@dataclass(frozen=True)
class ReferenceSet:
    states: tuple[State, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.states) != len(self.labels):
            raise ValueError("one label per state required")
        for s, lab in zip(self.states, self.labels):
            if abs(s.norm() - 1.0) > 1e-12:
                raise ValueError(f"reference {lab} is not normalized")

    @property
    def block_size(self) -> int:
        return len(self.states)

    def select(self, labels: Sequence[str]) -> "ReferenceSet":
        lookup = dict(zip(self.labels, self.states))
        missing = [lab for lab in labels if lab not in lookup]
        if missing:
            raise KeyError(f"unknown reference labels {missing}; have {list(self.labels)}")
        return ReferenceSet(tuple(lookup[lab] for lab in labels), tuple(labels))

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)


def pair_product(n_qubits: int, pairs: Sequence[tuple[int, int]], pair_amps: dict) -> State:
    """Product over disjoint qubit pairs (i, j) of sum_{b_i b_j} amp[(b_i, b_j)] |b_i b_j>."""
    idx = _basis_indices(n_qubits)
    amps = np.ones(1 << n_qubits, dtype=np.complex128)
    covered = set()
    for i, j in pairs:
        bi = (idx >> (i - 1)) & 1
        bj = (idx >> (j - 1)) & 1
        local = np.zeros(idx.shape, dtype=np.complex128)
        for (a, b), c in pair_amps.items():
            local[(bi == a) & (bj == b)] = c
        amps *= local
        covered.update((i, j))
    if covered != set(range(1, n_qubits + 1)):
        raise ValueError("pairs must cover every qubit exactly once")
    return State(n_qubits, amps)


SINGLET = {(0, 1): SQ2, (1, 0): -SQ2}
TRIPLET0 = {(0, 1): SQ2, (1, 0): SQ2}


def _alternating(n_qubits: int, first, second, offset: int) -> State:
    """Qubits 2i-1+offset get ``first`` and 2i+offset get ``second`` (indices mod N)."""
    local = [None] * n_qubits
    for i in range(1, n_qubits // 2 + 1):
        local[(2 * i - 2 + offset) % n_qubits] = first
        local[(2 * i - 1 + offset) % n_qubits] = second
    return product_state(local)


HEISENBERG_LABELS = ("phiA", "phiB", "xafm1", "xafm2", "yafm1", "yafm2", "zafm1", "zafm2")


def heisenberg_references(n_qubits: int) -> ReferenceSet:
    """q1..q8: singlet products on A and B bonds, and X/Y/Z Neel states of both offsets."""
    if n_qubits % 2:
        raise ValueError(f"n_qubits must be even, got {n_qubits}")
    N = n_qubits
    phi_a = pair_product(N, [(2 * i, 2 * i % N + 1) for i in range(1, N // 2 + 1)], SINGLET)
    phi_b = pair_product(N, [(2 * i - 1, 2 * i) for i in range(1, N // 2 + 1)], SINGLET)
    states = [phi_a, phi_b]
    for up, down in ((PLUS, MINUS), (RIGHT, LEFT), (KET0, KET1)):
        states.append(_alternating(N, up, down, 0))
        states.append(_alternating(N, up, down, 1))
    return ReferenceSet(tuple(states), HEISENBERG_LABELS)


HUBBARD_LABELS = ("phiA", "zafm1", "zafm2", "u0")


def hubbard_references(include_u0: bool = False, J: float = 1.0) -> ReferenceSet:
    """Rung bonding product and the two Neel occupation states; optionally the U=0 ground state."""
    n = 2 * HUBBARD_SITES
    rungs = [(i + off, j + off) for off in (0, HUBBARD_SITES) for i, j in HUBBARD_RUNGS]
    phi_a = pair_product(n, rungs, TRIPLET0)

    def neel(first_up):
        up = [KET0, KET1] if first_up == 0 else [KET1, KET0]
        local = up * (HUBBARD_SITES // 2) + up[::-1] * (HUBBARD_SITES // 2)
        return product_state(local)

    states = [phi_a, neel(0), neel(1)]
    labels = list(HUBBARD_LABELS[:3])
    if include_u0:
        states.append(hubbard_u0_ground_state(J).state)
        labels.append("u0")
    return ReferenceSet(tuple(states), tuple(labels))


class DegeneracyWarning(UserWarning):
    pass


def hubbard_u0_ground_state(J: float = 1.0, degeneracy_tol: float = 1e-8) -> GroundState:
    """Non-interacting ground state in the half-filled, zero-magnetisation sector.

    A warning is issued if the sector ground state is degenerate, since any
    fidelity against it then depends on the eigensolver's choice of basis.
    """
    H0 = hubbard_ladder_4x2(J, 0.0)
    gs = exact_ground_state(H0, sector=natural_sector(H0))
    if gs.gap < degeneracy_tol:
        warnings.warn(f"U=0 sector ground state is degenerate (gap {gs.gap:.2e})",
                      DegeneracyWarning, stacklevel=2)
    # H0 is real symmetric, so the ground state can be made real
    return gs


def load_state(path: str | Path, tol: float = 1e-6) -> State:
    """Load a QPSV file and return a normalised copy, warning on a large norm deviation."""
    raw = read_state(path)
    nrm = raw.norm()
    if abs(nrm - 1.0) > tol:
        warnings.warn(f"{path}: state norm {nrm:.8f} deviates from 1; normalising",
                      stacklevel=2)
    return raw.normalize()


def translate(state: State, shift: int) -> State:
    """Cyclically relabel qubits q -> q + shift (mod N)."""
    n = state.n_qubits
    shift %= n
    if shift == 0:
        return State(n, state.amplitudes.copy())
    tensor = _roll_axes(state.amplitudes.reshape((2,) * n), shift)
    return State(n, np.ascontiguousarray(tensor).reshape(-1))


def _roll_axes(tensor: np.ndarray, shift: int) -> np.ndarray:
    n = tensor.ndim
    # new qubit (q + shift) holds old qubit q: new axis n-(q+shift) <- old axis n-q
    src = list(range(n))
    dest = [(a - shift) % n for a in src]
    return np.moveaxis(tensor, src, dest)


__all__ = [
    "ReferenceSet", "heisenberg_references", "hubbard_references", "hubbard_u0_ground_state",
    "load_state", "save_state", "translate", "pair_product", "DegeneracyWarning",
]
