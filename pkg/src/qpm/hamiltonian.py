"""Partitioned Pauli-sum Hamiltonians, sparse application and an exact oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .statevector import (
    CommutingGroup,
    PauliString,
    State,
    _basis_indices,
    pauli_phase_vector,
)


class ModelTag(str, Enum):
    HEISENBERG_RING = "HeisenbergRing"
    HUBBARD_LADDER_4X2 = "HubbardLadder4x2"
    CUSTOM = "Custom"


class NonConvergenceError(RuntimeError):
    pass


@dataclass(eq=False)
class PartitionedHamiltonian:
    """H = sum over parts of commuting Pauli strings with real coefficients."""

    n_qubits: int
    parts: tuple[tuple[PauliString, ...], ...]
    model_tag: ModelTag = ModelTag.CUSTOM
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.parts = tuple(tuple(p) for p in self.parts)
        if not self.parts:
            raise ValueError("a partitioned Hamiltonian needs at least one part")
        for part in self.parts:
            for t in part:
                if abs(np.imag(t.coefficient)) > 0:
                    raise ValueError(f"non-real coefficient on {t.label()}")
                if t.max_qubit > self.n_qubits:
                    raise ValueError(f"term {t.label()} exceeds {self.n_qubits} qubits")
            for a, b in combinations(part, 2):
                if not a.commutes_with(b):
                    raise ValueError(f"terms {a.label()} and {b.label()} in one part do not commute")
        if self.n_qubits <= 12:
            self._dense_commutation_check()

    def _dense_commutation_check(self) -> None:
        for part in self.parts:
            mats = [pauli_sparse(self.n_qubits, t) for t in part]
            for a, b in combinations(mats, 2):
                c = a @ b - b @ a
                if c.nnz and abs(c).max() > 1e-12:
                    raise ValueError("dense check found non-commuting terms within a part")

    @property
    def n_gamma(self) -> int:
        return len(self.parts)

    @property
    def locality(self) -> int:
        return max(len(t.ops) for part in self.parts for t in part)

    @property
    def terms(self) -> list[PauliString]:
        return [t for part in self.parts for t in part]

    @cached_property
    def groups(self) -> tuple[CommutingGroup, ...]:
        return tuple(CommutingGroup(self.n_qubits, part) for part in self.parts)

    @cached_property
    def _flip_table(self) -> tuple[tuple[int, np.ndarray], ...]:
        return _flip_table(self.n_qubits, self.terms)

    def part_table(self, gamma: int):
        return _flip_table(self.n_qubits, self.parts[gamma])

    def norm_estimate(self) -> float:
        """Upper bound on the spectral norm: sum of |coefficients|."""
        return float(sum(abs(t.coefficient) for t in self.terms))


def _flip_table(n_qubits: int, terms: Sequence[PauliString]):
    """Group terms by X-mask into one phase vector per mask."""
    table: dict[int, np.ndarray] = {}
    for t in terms:
        x, z, ny = t.masks()
        f = t.coefficient * pauli_phase_vector(n_qubits, x, z, ny)
        if x in table:
            table[x] = table[x] + f
        else:
            table[x] = f
    return tuple(sorted(table.items()))


def _apply_table(table, amps: np.ndarray) -> np.ndarray:
    idx = _basis_indices(int(np.log2(amps.shape[-1])))
    out = np.zeros_like(amps)
    for x, f in table:
        out += f * (amps if x == 0 else amps[..., idx ^ x])
    return out


def apply_hamiltonian_array(H: PartitionedHamiltonian, amps: np.ndarray) -> np.ndarray:
    return _apply_table(H._flip_table, amps)


def apply_hamiltonian(H: PartitionedHamiltonian, state: State) -> State:
    if state.n_qubits != H.n_qubits:
        raise ValueError(f"state has {state.n_qubits} qubits, Hamiltonian {H.n_qubits}")
    return State(H.n_qubits, apply_hamiltonian_array(H, state.amplitudes))


def apply_part(H: PartitionedHamiltonian, gamma: int, state: State) -> State:
    return State(H.n_qubits, _apply_table(H.part_table(gamma), state.amplitudes))


def expectation(H: PartitionedHamiltonian, state: State) -> float:
    nrm = state.norm()
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized (norm {nrm})")
    val = np.vdot(state.amplitudes, apply_hamiltonian_array(H, state.amplitudes))
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"expectation has imaginary part {val.imag}")
    return float(val.real)


def pauli_sparse(n_qubits: int, P: PauliString) -> sp.csr_matrix:
    x, z, ny = P.masks()
    idx = _basis_indices(n_qubits)
    f = P.coefficient * pauli_phase_vector(n_qubits, x, z, ny)
    return sp.csr_matrix((f, (idx, idx ^ x)), shape=(1 << n_qubits,) * 2)


def to_sparse(H: PartitionedHamiltonian, part: int | None = None) -> sp.csr_matrix:
    table = H._flip_table if part is None else H.part_table(part)
    idx = _basis_indices(H.n_qubits)
    rows = np.concatenate([idx for _ in table])
    cols = np.concatenate([idx ^ x for x, _ in table])
    vals = np.concatenate([f for _, f in table])
    m = sp.csr_matrix((vals, (rows, cols)), shape=(1 << H.n_qubits,) * 2)
    m.eliminate_zeros()
    return m


# ---------------------------------------------------------------- models

def _swap_bond(i: int, j: int, J: float) -> list[PauliString]:
    """(J/4)(I + XX + YY + ZZ) = (J/2) P_ij."""
    a, b = sorted((i, j))
    c = J / 4.0
    return [
        PauliString((), c),
        PauliString(((a, "X"), (b, "X")), c),
        PauliString(((a, "Y"), (b, "Y")), c),
        PauliString(((a, "Z"), (b, "Z")), c),
    ]


def heisenberg_ring(n_qubits: int, J: float = 1.0) -> PartitionedHamiltonian:
    """Periodic ring H = (J/2) sum_i P_{i,i+1}, split into even bonds A and odd bonds B."""
    if n_qubits % 2 or n_qubits < 4:
        raise ValueError(f"n_qubits must be even and >= 4, got {n_qubits}")
    N = n_qubits
    part_a = [t for i in range(1, N // 2 + 1) for t in _swap_bond(2 * i, 2 * i % N + 1, J)]
    part_b = [t for i in range(1, N // 2 + 1) for t in _swap_bond(2 * i - 1, 2 * i, J)]
    return PartitionedHamiltonian(N, (tuple(part_a), tuple(part_b)),
                                  ModelTag.HEISENBERG_RING, {"J": J})


# Sites of the 4x2 ladder. Rungs pair (2i-1, 2i); legs run 1-4-5-8 and 2-3-6-7,
# which makes the reference states built on rung pairs Neel-ordered.
HUBBARD_RUNGS = ((1, 2), (3, 4), (5, 6), (7, 8))
HUBBARD_ODD_LEGS = ((1, 4), (2, 3), (5, 8), (6, 7))
HUBBARD_EVEN_LEGS = ((4, 5), (3, 6))
HUBBARD_SITES = 8


def _hop(i: int, j: int, J: float) -> list[PauliString]:
    """-(J/2)(X_i X_j + Y_i Y_j) Z_JW with Z on every qubit strictly between i and j."""
    a, b = sorted((i, j))
    between = tuple((k, "Z") for k in range(a + 1, b))
    return [
        PauliString(((a, ax),) + between + ((b, ax),), -J / 2.0)
        for ax in ("X", "Y")
    ]


def hubbard_ladder_4x2(J: float = 1.0, U_H: float = 4.0) -> PartitionedHamiltonian:
    """Jordan-Wigner Hubbard ladder; qubit i is (i, up), qubit i+8 is (i, down)."""
    def hops(bonds):
        return tuple(t for off in (0, HUBBARD_SITES) for i, j in bonds
                     for t in _hop(i + off, j + off, J))

    interaction = tuple(
        PauliString(((i, "Z"), (i + HUBBARD_SITES, "Z")), U_H / 4.0)
        for i in range(1, HUBBARD_SITES + 1)
    )
    parts = (hops(HUBBARD_RUNGS), hops(HUBBARD_ODD_LEGS), hops(HUBBARD_EVEN_LEGS), interaction)
    return PartitionedHamiltonian(2 * HUBBARD_SITES, parts, ModelTag.HUBBARD_LADDER_4X2,
                                  {"J": J, "U_H": U_H})


def hubbard_hopping_matrix(J: float = 1.0) -> np.ndarray:
    """Single-particle hopping matrix of the 4x2 ladder (sites 1..8 -> rows 0..7)."""
    t = np.zeros((HUBBARD_SITES, HUBBARD_SITES))
    for i, j in HUBBARD_RUNGS + HUBBARD_ODD_LEGS + HUBBARD_EVEN_LEGS:
        t[i - 1, j - 1] = t[j - 1, i - 1] = -J
    return t


def load_hamiltonian(path: str | Path) -> PartitionedHamiltonian:
    """Read the custom JSON format {"n_qubits": int, "parts": [[{"coeff", "ops"}]]}."""
    spec = json.loads(Path(path).read_text())
    return hamiltonian_from_dict(spec)


def hamiltonian_from_dict(spec: dict) -> PartitionedHamiltonian:
    try:
        n = int(spec["n_qubits"])
        parts = [
            tuple(PauliString.from_ops([(int(q), a) for q, a in term["ops"]], float(term["coeff"]))
                  for term in part)
            for part in spec["parts"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed Hamiltonian JSON: {exc}") from exc
    return PartitionedHamiltonian(n, tuple(parts), ModelTag.CUSTOM, {})


def hamiltonian_to_dict(H: PartitionedHamiltonian) -> dict:
    return {
        "n_qubits": H.n_qubits,
        "parts": [
            [{"coeff": float(np.real(t.coefficient)), "ops": [[q, a] for q, a in t.ops]}
             for t in part]
            for part in H.parts
        ],
    }


# ---------------------------------------------------------------- symmetry sectors

def weight_sector(n_qubits: int, registers: Sequence[tuple[Sequence[int], int]]) -> np.ndarray:
    """Basis indices whose number of |1> qubits on each register equals the given count."""
    idx = _basis_indices(n_qubits)
    keep = np.ones(idx.shape, dtype=bool)
    for qubits, count in registers:
        mask = 0
        for q in qubits:
            mask |= 1 << (q - 1)
        keep &= _popcount(idx & mask) == count
    return idx[keep]


def _popcount(values: np.ndarray) -> np.ndarray:
    v = values.astype(np.uint64)
    out = np.zeros(v.shape, dtype=np.int64)
    while np.any(v):
        out += (v & np.uint64(1)).astype(np.int64)
        v >>= np.uint64(1)
    return out


def natural_sector(H: PartitionedHamiltonian) -> np.ndarray | None:
    """Sector holding the ground state the models are studied in, or None for custom models."""
    if H.model_tag == ModelTag.HEISENBERG_RING:
        return weight_sector(H.n_qubits, [(range(1, H.n_qubits + 1), H.n_qubits // 2)])
    if H.model_tag == ModelTag.HUBBARD_LADDER_4X2:
        up = range(1, HUBBARD_SITES + 1)
        down = range(HUBBARD_SITES + 1, 2 * HUBBARD_SITES + 1)
        return weight_sector(H.n_qubits, [(up, HUBBARD_SITES // 2), (down, HUBBARD_SITES // 2)])
    return None


@dataclass
class GroundState:
    energy: float
    state: State
    residual: float
    gap: float

    def __iter__(self):
        yield self.energy
        yield self.state


def exact_ground_state(H: PartitionedHamiltonian, tol: float = 1e-12,
                       sector: np.ndarray | None = None, seed: int = 0,
                       n_eigs: int = 2) -> GroundState:
    """Lowest eigenpair by restarted Lanczos (ARPACK) on the full or a sector space.

    The start vector is drawn from PCG64 with ``seed``. ``gap`` is the distance to
    the next eigenvalue found in the same space, useful to flag degeneracies.
    """
    if H.n_qubits > 24:
        raise ValueError("exact_ground_state supports at most 24 qubits")
    dim = 1 << H.n_qubits
    if sector is None:
        size = dim

        def mv(v):
            return apply_hamiltonian_array(H, np.asarray(v, dtype=np.complex128).ravel())
    else:
        sector = np.asarray(sector, dtype=np.int64)
        size = sector.shape[0]
        buf = np.zeros(dim, dtype=np.complex128)

        def mv(v):
            buf[:] = 0.0
            buf[sector] = np.asarray(v).ravel()
            return apply_hamiltonian_array(H, buf)[sector]

    rng = np.random.default_rng(seed)
    v0 = rng.normal(size=size) + 1j * rng.normal(size=size)
    if size <= 64:
        mat = np.column_stack([mv(e) for e in np.eye(size, dtype=np.complex128)])
        w, V = np.linalg.eigh(mat)
        vals, vecs = w[:n_eigs], V[:, :n_eigs]
    else:
        op = spla.LinearOperator((size, size), matvec=mv, dtype=np.complex128)
        try:
            vals, vecs = spla.eigsh(op, k=n_eigs, which="SA", v0=v0, tol=tol,
                                    ncv=max(20, 2 * n_eigs + 1), maxiter=20000)
        except spla.ArpackNoConvergence as exc:
            raise NonConvergenceError(str(exc)) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    psi = np.zeros(dim, dtype=np.complex128)
    if sector is None:
        psi[:] = vecs[:, 0]
    else:
        psi[sector] = vecs[:, 0]
    psi /= np.linalg.norm(psi)
    psi = fix_phase(psi)
    e0 = float(vals[0])
    residual = float(np.linalg.norm(apply_hamiltonian_array(H, psi) - e0 * psi))
    if residual > max(1e-8, 1e3 * tol * H.norm_estimate()):
        raise NonConvergenceError(f"ground state residual {residual:.3e} too large")
    gap = float(vals[1] - vals[0]) if len(vals) > 1 else float("inf")
    return GroundState(e0, State(H.n_qubits, psi), residual, gap)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Make the largest-modulus entry (lowest index on ties) real and positive."""
    k = int(np.argmax(np.round(np.abs(v), 12)))
    if v[k] == 0:
        return v
    return v * (abs(v[k]) / v[k])
