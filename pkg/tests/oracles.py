"""Independent dense oracles built from Kronecker products and scipy.linalg.expm.

Nothing here goes through the package's bit-mask machinery, so agreement with
the sparse code paths is a genuine cross-check.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
from scipy.linalg import expm

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_dense(n_qubits, ops, coeff=1.0):
    """Qubit k is bit k-1, so the leftmost Kronecker factor is qubit n."""
    local = ["I"] * n_qubits
    for q, a in ops:
        local[q - 1] = a
    return coeff * reduce(np.kron, [PAULI[a] for a in reversed(local)])


def swap_dense(n_qubits, i, j):
    dim = 1 << n_qubits
    P = np.zeros((dim, dim))
    for x in range(dim):
        bi, bj = (x >> (i - 1)) & 1, (x >> (j - 1)) & 1
        y = x & ~(1 << (i - 1)) & ~(1 << (j - 1)) | (bj << (i - 1)) | (bi << (j - 1))
        P[y, x] = 1.0
    return P


def heisenberg_dense(n_qubits, J=1.0):
    """(J/2) sum over ring bonds of the SWAP permutation."""
    return sum(0.5 * J * swap_dense(n_qubits, i, i % n_qubits + 1)
               for i in range(1, n_qubits + 1))


def part_dense(H, gamma):
    n = H.n_qubits
    return sum(pauli_dense(n, t.ops, t.coefficient) for t in H.parts[gamma])


def hamiltonian_dense(H):
    return sum(part_dense(H, g) for g in range(H.n_gamma))


def trotter_dense(H, scheme, dtau):
    """Ordered product of expm(-i dtau s_i H_part) matrices, rightmost first."""
    parts = [part_dense(H, g) for g in range(H.n_gamma)]
    U = np.eye(1 << H.n_qubits, dtype=complex)
    for s_i, g in zip(scheme.s[::-1], scheme.part_index[::-1]):
        U = expm(-1j * dtau * s_i * parts[g]) @ U
    return U


def annihilators(n_modes):
    """Fermionic annihilation operators built by brute force on Fock states.

    The sign of a_j|x> is (-1)^(number of occupied modes below j), computed by
    counting rather than by Pauli strings.
    """
    dim = 1 << n_modes
    ops = []
    for j in range(n_modes):
        a = np.zeros((dim, dim))
        for x in range(dim):
            if (x >> j) & 1:
                sign = (-1) ** bin(x & ((1 << j) - 1)).count("1")
                a[x ^ (1 << j), x] = sign
        ops.append(a)
    return ops
