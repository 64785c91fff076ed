"""Block Krylov subspace diagonalisation with approximated Hamiltonian powers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .hamiltonian import PartitionedHamiltonian, apply_hamiltonian_array
from .metrics import FitResult, polyfit_even_powers
from .qpower import (
    Evaluation,
    EvolutionLadder,
    PowerConfig,
    cnk,
    nested_powers,
    power_sequence_array,
    richardson_weights,
)
from .refstates import ReferenceSet
from .statevector import State
from .trotter import apply_trotter_array, suzuki_coefficients

DEFAULT_SCUT = 1e-12
COND_LIMIT = 1e13
MAX_DIM = 512


class MatrixScheme(str, Enum):
    VARIATIONAL = "variational"
    DIRECT = "direct"


class ComparisonKind(str, Enum):
    ITE = "ite"
    RTE = "rte"
    QPM = "qpm"


class NumericalBreakdown(RuntimeError):
    """The overlap matrix lost positive semidefiniteness beyond tolerance."""


@dataclass
class KrylovStep:
    n: int
    energy: float
    v: np.ndarray
    cond: float
    kept_dim: int
    fidelity: float = float("nan")


@dataclass
class KrylovResult:
    H: np.ndarray
    S: np.ndarray
    block_size: int
    steps: list[KrylovStep] = field(default_factory=list)
    truncated: bool = False
    truncated_at: int | None = None

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.steps])

    @property
    def conds(self) -> np.ndarray:
        return np.array([s.cond for s in self.steps])

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([s.fidelity for s in self.steps])

    def first_n_below(self, E0: float, tol: float, scale: float = 1.0) -> int | None:
        for s in self.steps:
            if (s.energy - E0) / scale <= tol:
                return s.n
        return None


def _refs_array(refs: ReferenceSet | Sequence[State]) -> np.ndarray:
    return np.stack([q.amplitudes for q in refs])


def _check_budget(n_max: int, block: int) -> None:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max * block > MAX_DIM:
        raise ValueError(f"n_max * M_B = {n_max * block} exceeds the dense budget {MAX_DIM}")


def build_basis(refs, n_max: int, power: PowerConfig, H: PartitionedHamiltonian) -> np.ndarray:
    """Rows u_{k + (l-1) M_B} = H^{l-1}_ST(r) q_k for l = 1..n_max."""
    q = _refs_array(refs)
    _check_budget(n_max, len(q))
    vecs, _ = power_sequence_array(power, H, q, n_max - 1)
    return np.concatenate(vecs[:n_max], axis=0)


def subspace_matrices_variational(basis: np.ndarray, H: PartitionedHamiltonian):
    """H_ij = <u_i|H|u_j>, S_ij = <u_i|u_j>, Hermitised."""
    hb = apply_hamiltonian_array(H, basis)
    Hs = basis.conj() @ hb.T
    Ss = basis.conj() @ basis.T
    return _hermitize(Hs), _hermitize(Ss)


def _hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


def _power_overlaps_nested(H, power: PowerConfig, q: np.ndarray, p_max: int) -> np.ndarray:
    """G[P, k, k'] = <q_k|H^P_ST(r)|q_k'> for P = 0..p_max.

    Each Richardson level's power is a power of one Hermitian first difference
    D, so <q|D^P|q'> = <D^a q|D^b q'> with a + b = P.
    """
    half = (p_max + 1) // 2
    weights = richardson_weights(power.r, power.h)
    G = np.zeros((p_max + 1, len(q), len(q)), dtype=np.complex128)
    for w, dt in zip(weights, power.steps()):
        if power.evaluation == Evaluation.NESTED:
            seq, _ = nested_powers(H, power.scheme, dt, q, half)
            for P in range(p_max + 1):
                a, b = (P + 1) // 2, P // 2
                G[P] += w * (seq[a].conj() @ seq[b].T)
        else:
            G += w * _ladder_power_overlaps(H, power, dt, q, p_max)
    return G


def _ladder_power_overlaps(H, power: PowerConfig, dt: float, q: np.ndarray,
                           p_max: int) -> np.ndarray:
    """Linear combinations of propagator overlaps <q_k|S^j|q_k'> (no Richardson)."""
    ladder = EvolutionLadder(H, power.scheme, dt, q)
    ladder.extend((p_max + 1) // 2 + 1)
    K = {}
    for j in range(-p_max, p_max + 1):
        b = j // 2
        K[j] = ladder[-(j - b)].conj() @ ladder[b].T
    G = np.zeros((p_max + 1, len(q), len(q)), dtype=np.complex128)
    for P in range(p_max + 1):
        for k in range(P + 1):
            G[P] += cnk(P, k, dt) * K[P - 2 * k]
    return G


def subspace_matrices_direct(refs, n_max: int, power: PowerConfig, H: PartitionedHamiltonian):
    """H'_ij = <q_k|H^{l+l'-1}_ST|q_k'>, S'_ij = <q_k|H^{l+l'-2}_ST|q_k'>."""
    q = _refs_array(refs)
    M = len(q)
    _check_budget(n_max, M)
    G = _power_overlaps_nested(H, power, q, 2 * n_max - 1)
    dim = n_max * M
    Hs = np.empty((dim, dim), dtype=np.complex128)
    Ss = np.empty((dim, dim), dtype=np.complex128)
    for l in range(n_max):
        for lp in range(n_max):
            Hs[l * M:(l + 1) * M, lp * M:(lp + 1) * M] = G[l + lp + 1]
            Ss[l * M:(l + 1) * M, lp * M:(lp + 1) * M] = G[l + lp]
    return _hermitize(Hs), _hermitize(Ss)


def solve_subspace(Hs: np.ndarray, Ss: np.ndarray, s_cut: float = DEFAULT_SCUT,
                   equilibrate: bool = True):
    """Lowest generalised eigenpair by canonical orthogonalisation.

    Returns (energy, v, cond, kept_dim); cond is the condition number of the
    (equilibrated) overlap matrix before filtering.
    """
    if not 0.0 < s_cut < 1.0:
        raise ValueError("s_cut must lie in (0, 1)")
    Hs, Ss = _hermitize(np.asarray(Hs)), _hermitize(np.asarray(Ss))
    diag = Ss.diagonal().real
    if np.any(diag <= 0):
        raise NumericalBreakdown("overlap matrix has a non-positive diagonal entry")
    delta = 1.0 / np.sqrt(diag) if equilibrate else np.ones_like(diag)
    Se = delta[:, None] * Ss * delta[None, :]
    He = delta[:, None] * Hs * delta[None, :]
    s, V = np.linalg.eigh(Se)
    s_max = s[-1]
    if s[0] < -1e-10 * s_max:
        raise NumericalBreakdown(
            f"overlap matrix not positive semidefinite: s_min/s_max = {s[0] / s_max:.3e}")
    cond = float(s_max / s[0]) if s[0] > 0 else float("inf")
    keep = s > s_cut * s_max
    W = V[:, keep] / np.sqrt(s[keep])
    T = _hermitize(W.conj().T @ He @ W)
    e, Y = np.linalg.eigh(T)
    v = delta * (W @ Y[:, 0])
    v = v / np.sqrt(abs(np.vdot(v, Ss @ v)))
    big = np.argmax(np.abs(v))
    v = v * (abs(v[big]) / v[big])
    return float(e[0]), v, cond, int(keep.sum())


def fidelity(v: np.ndarray, basis: np.ndarray, psi0: State | np.ndarray) -> float:
    """|<psi0|Psi_KS>|^2 with Psi_KS = sum_i v_i u_i normalised."""
    target = psi0.amplitudes if isinstance(psi0, State) else psi0
    psi = v @ basis[:len(v)]
    nrm = np.linalg.norm(psi)
    return float(abs(np.vdot(target, psi)) ** 2 / (nrm**2 * np.vdot(target, target).real))


def solve_trace(Hs: np.ndarray, Ss: np.ndarray, block: int, n_max: int,
                s_cut: float = DEFAULT_SCUT, cond_limit: float = COND_LIMIT,
                basis: np.ndarray | None = None, psi0=None) -> KrylovResult:
    """Solve on the leading n*M_B block for n = 1..n_max, stopping once cond > cond_limit."""
    result = KrylovResult(Hs, Ss, block)
    for n in range(1, n_max + 1):
        d = n * block
        E, v, cond, kept = solve_subspace(Hs[:d, :d], Ss[:d, :d], s_cut)
        if cond > cond_limit:
            result.truncated, result.truncated_at = True, n
            break
        fid = fidelity(v, basis, psi0) if basis is not None and psi0 is not None else float("nan")
        result.steps.append(KrylovStep(n, E, v, cond, kept, fid))
    return result


def run_krylov(H: PartitionedHamiltonian, refs, n_max: int, power: PowerConfig,
               scheme: MatrixScheme = MatrixScheme.VARIATIONAL, s_cut: float = DEFAULT_SCUT,
               psi0=None, cond_limit: float = COND_LIMIT) -> KrylovResult:
    """Krylov energies, fidelities and condition numbers for n = 1..n_max."""
    scheme = MatrixScheme(scheme)
    block = len(refs)
    _check_budget(n_max, block)
    basis = None
    if scheme == MatrixScheme.VARIATIONAL:
        basis = build_basis(refs, n_max, power, H)
        Hs, Ss = subspace_matrices_variational(basis, H)
    else:
        Hs, Ss = subspace_matrices_direct(refs, n_max, power, H)
        if psi0 is not None:
            basis = build_basis(refs, n_max, power, H)
    return solve_trace(Hs, Ss, block, n_max, s_cut, cond_limit, basis, psi0)


@dataclass
class SweepResult:
    dtaus: np.ndarray
    energies: np.ndarray
    fit: FitResult

    @property
    def extrapolated(self) -> float:
        return self.fit.intercept

    @property
    def stderr(self) -> float:
        return self.fit.intercept_stderr


def dtau_sweep_and_fit(H: PartitionedHamiltonian, refs, n: int, power: PowerConfig,
                       dtau_list: Sequence[float], fit_order: int = 1,
                       scheme: MatrixScheme = MatrixScheme.DIRECT,
                       s_cut: float = DEFAULT_SCUT, scale: float = 1.0) -> SweepResult:
    """E_KS at subspace size n over dtau, fitted in even powers up to dtau^(2 fit_order).

    Energies are divided by ``scale`` before fitting (e.g. N J).
    """
    orders = tuple(2 * k for k in range(1, fit_order + 1))
    energies = []
    for dt in dtau_list:
        res = run_krylov(H, refs, n, power.with_(dtau=dt), scheme, s_cut, cond_limit=np.inf)
        energies.append(res.steps[-1].energy / scale)
    energies = np.array(energies)
    fit = polyfit_even_powers(dtau_list, energies, orders)
    return SweepResult(np.asarray(dtau_list, float), energies, fit)


def comparison_basis(H: PartitionedHamiltonian, ref: State, n_max: int, dtau: float,
                     kind: ComparisonKind, r: int = 0, ite_factor: int = 2) -> np.ndarray:
    """Normalised Krylov vectors from imaginary-time, real-time, or power evolution.

    All three use second-order product formulas. The imaginary-time basis is
    e^{-ite_factor * l * dtau * H} q, renormalised after every factor.
    """
    kind = ComparisonKind(kind)
    s2 = suzuki_coefficients(1, 3, H.n_gamma)
    q = ref.amplitudes
    rows = [q / np.linalg.norm(q)]
    if kind == ComparisonKind.QPM:
        vecs, _ = power_sequence_array(PowerConfig(n_max - 1, dtau, s2, r=r), H, q, n_max - 1)
        rows = vecs
    else:
        cur = q
        for _ in range(n_max - 1):
            if kind == ComparisonKind.RTE:
                cur = apply_trotter_array(s2, H, dtau, cur)
            else:
                for _ in range(ite_factor):
                    cur = _imaginary_step(s2, H, dtau, cur)
            rows.append(cur)
    basis = np.stack(rows)
    return basis / np.linalg.norm(basis, axis=1, keepdims=True)


def _imaginary_step(scheme, H, dtau, amps):
    for s_i, g in zip(scheme.s[::-1], scheme.part_index[::-1]):
        amps = H.groups[g].apply_exponential(amps, -1j * dtau * s_i)
        amps = amps / np.linalg.norm(amps)
    return amps


def comparison_subspaces(H: PartitionedHamiltonian, ref: State, n_max: int, dtau: float,
                         kind: ComparisonKind, r: int = 0, ite_factor: int = 2,
                         s_cut: float = DEFAULT_SCUT, cond_limit: float = COND_LIMIT,
                         psi0=None) -> KrylovResult:
    basis = comparison_basis(H, ref, n_max, dtau, kind, r, ite_factor)
    Hs, Ss = subspace_matrices_variational(basis, H)
    return solve_trace(Hs, Ss, 1, n_max, s_cut, cond_limit, basis, psi0)
