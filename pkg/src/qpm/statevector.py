"""Dense statevector over N qubits.

Basis convention: bit k of a basis index holds qubit k+1, so qubit 1 is the
least significant bit. All amplitudes are complex128.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 30
_AXES = ("X", "Y", "Z")


class StateFormatError(ValueError):
    """Raised when a QPSV state file is malformed."""


@dataclass(frozen=True)
class State:
    """A register of ``n_qubits`` qubits with dense complex amplitudes."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.shape[0] != 1 << self.n_qubits:
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "State":
        nrm = self.norm()
        if nrm == 0.0 or not np.isfinite(nrm):
            raise ValueError("cannot normalize a zero or non-finite state")
        return State(self.n_qubits, self.amplitudes / nrm)

    def scale(self, c: complex) -> "State":
        return State(self.n_qubits, c * self.amplitudes)

    def __add__(self, other: "State") -> "State":
        _check_same(self, other)
        return State(self.n_qubits, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "State") -> "State":
        _check_same(self, other)
        return State(self.n_qubits, self.amplitudes - other.amplitudes)


def _check_same(a: State, b: State) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")


@dataclass(frozen=True)
class PauliString:
    """coefficient * (product of single-qubit Paulis); qubits are 1-based."""

    ops: tuple[tuple[int, str], ...] = ()
    coefficient: complex = 1.0

    def __post_init__(self):
        ops = tuple((int(q), str(a).upper()) for q, a in self.ops)
        qubits = [q for q, _ in ops]
        if any(b <= a for a, b in zip(qubits, qubits[1:])):
            raise ValueError(f"qubit indices must be strictly increasing: {qubits}")
        for q, a in ops:
            if q < 1:
                raise ValueError(f"qubit index must be >= 1, got {q}")
            if a not in _AXES:
                raise ValueError(f"unknown Pauli axis {a!r}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_ops(cls, ops: Iterable[tuple[int, str]], coefficient: complex = 1.0):
        """Build from unordered ops; duplicates are rejected."""
        return cls(tuple(sorted(ops)), coefficient)

    @property
    def max_qubit(self) -> int:
        return max((q for q, _ in self.ops), default=0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.ops)

    def masks(self) -> tuple[int, int, int]:
        """(x_mask, z_mask, number of Y factors) in the bit convention."""
        x = z = ny = 0
        for q, a in self.ops:
            bit = 1 << (q - 1)
            if a in "XY":
                x |= bit
            if a in "YZ":
                z |= bit
            if a == "Y":
                ny += 1
        return x, z, ny

    def commutes_with(self, other: "PauliString") -> bool:
        x1, z1, _ = self.masks()
        x2, z2, _ = other.masks()
        return bin((x1 & z2) ^ (z1 & x2)).count("1") % 2 == 0

    def label(self) -> str:
        return " ".join(f"{a}{q}" for q, a in self.ops) or "I"


def _parity(values: np.ndarray) -> np.ndarray:
    """Parity (0/1) of the popcount of each integer in ``values``."""
    v = values.astype(np.uint64, copy=True)
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> np.uint64(shift)
    return (v & np.uint64(1)).astype(np.int8)


def _basis_indices(n_qubits: int) -> np.ndarray:
    return np.arange(1 << n_qubits, dtype=np.int64)


def pauli_phase_vector(n_qubits: int, x: int, z: int, ny: int) -> np.ndarray:
    """f[y] such that (P psi)[y] = f[y] * psi[y ^ x] for the masks of P."""
    idx = _basis_indices(n_qubits)
    signs = 1 - 2 * _parity((idx ^ x) & z).astype(np.float64)
    return (1j**ny) * signs


def _check_range(n_qubits: int, P: PauliString) -> None:
    if P.max_qubit > n_qubits:
        raise IndexError(f"Pauli string acts on qubit {P.max_qubit} > {n_qubits}")


def zero_state(n_qubits: int) -> State:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return State(n_qubits, amps)


def basis_state(n_qubits: int, index: int) -> State:
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return State(n_qubits, amps)


def product_state(single_qubit: Sequence[Sequence[complex]]) -> State:
    """Tensor product of one-qubit states; entry 0 is qubit 1."""
    amps = np.ones(1, dtype=np.complex128)
    for local in single_qubit:
        # qubit k+1 is more significant than everything built so far
        amps = np.kron(np.asarray(local, dtype=np.complex128), amps)
    return State(len(single_qubit), amps)


def apply_pauli_string(state: State, P: PauliString) -> State:
    _check_range(state.n_qubits, P)
    x, z, ny = P.masks()
    f = P.coefficient * pauli_phase_vector(state.n_qubits, x, z, ny)
    src = _basis_indices(state.n_qubits) ^ x
    return State(state.n_qubits, f * state.amplitudes[src])


def apply_matrix(amps: np.ndarray, n_qubits: int, qubits: Sequence[int], U: np.ndarray) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to ``qubits`` (local bit j is qubits[j]).

    ``amps`` may carry leading batch axes; the last axis is the register.
    """
    k = len(qubits)
    batch = amps.shape[:-1]
    psi = amps.reshape((-1,) + (2,) * n_qubits)
    # axis 1 + a holds qubit n_qubits - a; the local index is big-endian in reversed qubits
    axes = [1 + n_qubits - q for q in reversed(qubits)]
    out = np.tensordot(U.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the k gate axes first, then the untouched axes in order
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(batch + (1 << n_qubits,))


class CommutingGroup:
    """A list of mutually commuting Pauli strings compiled for exponentiation.

    Terms are clustered by overlapping support. Each off-diagonal cluster is
    diagonalised once as a small dense matrix, and all diagonal clusters are
    merged into one real diagonal, so e^{-i a H_group} is exact for any a.
    """

    def __init__(self, n_qubits: int, terms: Sequence[PauliString], verify: bool = False):
        self.n_qubits = n_qubits
        self.terms = tuple(terms)
        for t in self.terms:
            _check_range(n_qubits, t)
        if verify:
            for i, a in enumerate(self.terms):
                for b in self.terms[i + 1:]:
                    if not a.commutes_with(b):
                        raise ValueError(f"terms {a.label()} and {b.label()} do not commute")
        self.diagonal = np.zeros(1 << n_qubits)
        self.identity_shift = 0.0
        self.clusters: list[tuple[tuple[int, ...], np.ndarray, np.ndarray]] = []
        self._build()

    def _build(self) -> None:
        diag_terms, offdiag = [], []
        for t in self.terms:
            x, _, _ = t.masks()
            if not t.ops:
                self.identity_shift += float(np.real(t.coefficient))
            elif x == 0:
                diag_terms.append(t)
            else:
                offdiag.append(t)
        for t in diag_terms:
            _, z, _ = t.masks()
            self.diagonal += np.real(t.coefficient) * (
                1 - 2 * _parity(_basis_indices(self.n_qubits) & z).astype(np.float64)
            )
        # union-find over qubit supports of off-diagonal terms; diagonal terms
        # touching those qubits join the cluster so everything stays exact
        parent: dict[int, int] = {}

        def find(q):
            while parent.setdefault(q, q) != q:
                q = parent[q]
            return q

        for t in offdiag:
            qs = t.support
            for q in qs[1:]:
                parent[find(q)] = find(qs[0])
        groups: dict[int, list[PauliString]] = {}
        for t in offdiag:
            groups.setdefault(find(t.support[0]), []).append(t)
        clustered = set(parent)
        leftover = []
        for t in diag_terms:
            roots = {find(q) for q in t.support if q in clustered}
            if len(roots) == 1 and set(t.support) <= clustered:
                groups[roots.pop()].append(t)
            else:
                leftover.append(t)
        if len(leftover) != len(diag_terms):
            # rebuild the diagonal from the terms not absorbed into clusters
            self.diagonal = np.zeros(1 << self.n_qubits)
            for t in leftover:
                _, z, _ = t.masks()
                self.diagonal += np.real(t.coefficient) * (
                    1 - 2 * _parity(_basis_indices(self.n_qubits) & z).astype(np.float64)
                )
        for root in sorted(groups):
            terms = groups[root]
            qubits = tuple(sorted({q for t in terms for q in t.support}))
            if len(qubits) > 12:
                raise ValueError(f"cluster on {len(qubits)} qubits is too large to exponentiate")
            h = local_matrix(terms, qubits)
            w, v = np.linalg.eigh(h)
            self.clusters.append((qubits, w, v))
        self.has_diagonal = bool(np.any(self.diagonal))

    def apply_exponential(self, amps: np.ndarray, angle: complex) -> np.ndarray:
        """Return e^{-i angle H_group} amps. A complex angle gives non-unitary steps."""
        out = amps
        if self.has_diagonal:
            out = np.exp(-1j * angle * self.diagonal) * out
        for qubits, w, v in self.clusters:
            U = (v * np.exp(-1j * angle * w)) @ v.conj().T
            out = apply_matrix(out, self.n_qubits, qubits, U)
        if self.identity_shift:
            out = np.exp(-1j * angle * self.identity_shift) * out
        return out if out is not amps else amps.copy()


def local_matrix(terms: Sequence[PauliString], qubits: Sequence[int]) -> np.ndarray:
    """Dense matrix of a sum of Pauli strings restricted to ``qubits``."""
    pos = {q: j + 1 for j, q in enumerate(qubits)}
    k = len(qubits)
    idx = _basis_indices(k)
    h = np.zeros((1 << k, 1 << k), dtype=np.complex128)
    for t in terms:
        local = PauliString(tuple((pos[q], a) for q, a in t.ops), t.coefficient)
        x, z, ny = local.masks()
        f = t.coefficient * pauli_phase_vector(k, x, z, ny)
        h[idx, idx ^ x] += f
    return h


def apply_group_exponential(state: State, group, angle: complex) -> State:
    """Apply e^{-i angle H_group} for a commuting group (list or CommutingGroup)."""
    if not isinstance(group, CommutingGroup):
        group = CommutingGroup(state.n_qubits, list(group), verify=True)
    if group.n_qubits != state.n_qubits:
        raise ValueError("group and state act on different registers")
    return State(state.n_qubits, group.apply_exponential(state.amplitudes, angle))


def inner(a: State, b: State) -> complex:
    """<a|b>, conjugating a."""
    _check_same(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def linear_combine(terms: Sequence[tuple[complex, State]]) -> State:
    if not terms:
        raise ValueError("linear_combine needs at least one term")
    n = terms[0][1].n_qubits
    out = np.zeros(1 << n, dtype=np.complex128)
    for c, s in terms:
        if s.n_qubits != n:
            raise ValueError("dimension mismatch in linear_combine")
        out += c * s.amplitudes
    return State(n, out)


def random_phase_state(n_qubits: int, seed: int) -> State:
    """Unnormalised state with amplitudes e^{i phi(x)}, phi uniform on [0, 2pi).

    Uses numpy's PCG64 generator seeded with ``seed``.
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=1 << n_qubits)
    return State(n_qubits, np.exp(1j * phases))


def random_state(n_qubits: int, seed: int) -> State:
    """Normalised Gaussian random state (PCG64)."""
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return State(n_qubits, amps).normalize()


_MAGIC = b"QPSV"
_VERSION = 1


def save_state(state: State, path: str | Path) -> None:
    """Write a QPSV file: magic, version byte, u32 LE qubit count, (re, im) f64 LE."""
    header = _MAGIC + struct.pack("<BI", _VERSION, state.n_qubits)
    body = np.ascontiguousarray(state.amplitudes, dtype="<c16").tobytes()
    Path(path).write_bytes(header + body)


def read_state(path: str | Path) -> State:
    """Read a QPSV file exactly as stored (no normalisation)."""
    data = Path(path).read_bytes()
    if len(data) < 9 or data[:4] != _MAGIC:
        raise StateFormatError(f"{path}: bad magic, not a QPSV state file")
    version, n = struct.unpack("<BI", data[4:9])
    if version != _VERSION:
        raise StateFormatError(f"{path}: unsupported QPSV version {version}")
    if not 1 <= n <= MAX_QUBITS:
        raise StateFormatError(f"{path}: invalid qubit count {n}")
    expected = 9 + 16 * (1 << n)
    if len(data) != expected:
        raise StateFormatError(f"{path}: expected {expected} bytes for {n} qubits, got {len(data)}")
    amps = np.frombuffer(data, dtype="<c16", offset=9).astype(np.complex128)
    return State(n, amps)
