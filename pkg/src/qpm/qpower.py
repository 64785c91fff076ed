"""Approximate Hamiltonian powers from symmetric Trotterised time evolution.

H^n_ST(dt) = sum_k c_{n,k} [S(dt/2)]^{n-2k}, the central finite difference of the
propagator, optionally Richardson-extrapolated over dt, dt/h, ..., dt/h^r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .hamiltonian import PartitionedHamiltonian
from .statevector import State
from .trotter import TrotterScheme, apply_trotter_array

# flag results whose estimated loss of significance reaches this many digits
CANCELLATION_DIGITS = 10.0


class Formalism(str, Enum):
    PRODUCT = "product"
    ALTERNATIVE = "alternative"


class Evaluation(str, Enum):
    """How the product form is evaluated; both give the same operator.

    LADDER sums c_{n,k} S^{n-2k} psi directly. NESTED applies the first
    difference (i/dt)[S(dt/2) - S(-dt/2)] n times, which is identical by the
    law of exponents but avoids the binomial cancellation at large n.
    """

    LADDER = "ladder"
    NESTED = "nested"


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class PowerConfig:
    n: int
    dtau: float
    scheme: TrotterScheme
    r: int = 0
    h: float = 2.0
    formalism: Formalism = Formalism.PRODUCT
    evaluation: Evaluation = Evaluation.NESTED
    # False lets the alternative form run with 2m < n to exhibit its breakdown
    strict: bool = True

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"power must be >= 0, got {self.n}")
        if self.dtau == 0 or not np.isfinite(self.dtau):
            raise ValueError("dtau must be finite and nonzero")
        if self.r < 0:
            raise ValueError("Richardson order must be >= 0")
        if self.h <= 0 or self.h == 1:
            raise ValueError("Richardson ratio h must be positive and != 1")
        object.__setattr__(self, "formalism", Formalism(self.formalism))
        object.__setattr__(self, "evaluation", Evaluation(self.evaluation))
        if self.violates_constraint(self.n):
            raise ConstraintError(
                f"alternative form needs 2m >= n, got m={self.scheme.m}, n={self.n}")

    def violates_constraint(self, n: int) -> bool:
        return (self.strict and self.formalism == Formalism.ALTERNATIVE
                and 2 * self.scheme.m < n)

    def with_(self, **changes) -> "PowerConfig":
        return replace(self, **changes)

    def steps(self) -> list[float]:
        """Step sizes dt/h^l entering the Richardson combination."""
        return [self.dtau / self.h**l for l in range(self.r + 1)]


@dataclass
class PowerDiagnostics:
    digits_lost: float = 0.0
    per_level: list[float] = field(default_factory=list)

    @property
    def cancellation_warning(self) -> bool:
        return self.digits_lost >= CANCELLATION_DIGITS


def cnk(n: int, k: int, dtau: float) -> complex:
    """(i^n / dt^n) (-1)^k C(n, k)."""
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    return (1j**n) * (-1) ** k * math.comb(n, k) / dtau**n


def richardson_weights(r: int, h: float = 2.0) -> np.ndarray:
    """w_l with H_(r)(dt) = sum_l w_l H_(0)(dt/h^l), from the recursive definition."""
    w = np.array([1.0])
    for j in range(1, r + 1):
        g = h ** (2 * j)
        shifted = np.concatenate([[0.0], w])
        plain = np.concatenate([w, [0.0]])
        w = (g * shifted - plain) / (g - 1.0)
    return w


class EvolutionLadder:
    """States [S(dt/2)]^j psi for j = -J..J, extended on demand and then reused."""

    def __init__(self, H: PartitionedHamiltonian, scheme: TrotterScheme, dtau: float,
                 psi: State | np.ndarray):
        if scheme.n_gamma != H.n_gamma:
            raise ValueError(f"scheme has {scheme.n_gamma} parts, Hamiltonian {H.n_gamma}")
        self.H, self.scheme, self.dtau = H, scheme, dtau
        amps = psi.amplitudes if isinstance(psi, State) else psi
        self._fwd = [amps]
        self._bwd = [amps]

    def extend(self, jmax: int) -> None:
        half = self.dtau / 2.0
        while len(self._fwd) <= jmax:
            self._fwd.append(apply_trotter_array(self.scheme, self.H, half, self._fwd[-1]))
        while len(self._bwd) <= jmax:
            self._bwd.append(apply_trotter_array(self.scheme, self.H, -half, self._bwd[-1]))

    def __getitem__(self, j: int) -> np.ndarray:
        self.extend(abs(j))
        return self._fwd[j] if j >= 0 else self._bwd[-j]

    def power(self, n: int) -> tuple[np.ndarray, float]:
        """sum_k c_{n,k} S^{n-2k} psi and its estimated digits lost."""
        self.extend(n)
        out = np.zeros_like(self._fwd[0])
        scale = 0.0
        for k in range(n + 1):
            c = cnk(n, k, self.dtau)
            out += c * self[n - 2 * k]
            scale += abs(c)
        return out, _digits(scale * np.linalg.norm(self._fwd[0]), np.linalg.norm(out))


def _digits(scale: float, result: float) -> float:
    if scale == 0.0:
        return 0.0
    if result == 0.0:
        return float("inf")
    return max(0.0, math.log10(scale / result))


def nested_powers(H: PartitionedHamiltonian, scheme: TrotterScheme, dtau: float,
                  amps: np.ndarray, n_max: int) -> tuple[list[np.ndarray], list[float]]:
    """[H_ST(dt)]^l psi for l = 0..n_max by repeated first differences."""
    half = dtau / 2.0
    pref = 1j / dtau
    out = [amps]
    digits = [0.0]
    cond_sum = 0.0
    for _ in range(n_max):
        v = out[-1]
        nxt = pref * (apply_trotter_array(scheme, H, half, v)
                      - apply_trotter_array(scheme, H, -half, v))
        cond_sum += 2.0 * abs(pref) * np.linalg.norm(v) / max(np.linalg.norm(nxt), 1e-300)
        out.append(nxt)
        digits.append(math.log10(max(cond_sum, 1.0)))
    return out, digits


def level_sequence(config: PowerConfig, H, amps: np.ndarray, dt: float, n_max: int):
    """Unextrapolated powers l = 0..n_max at step dt, with digits lost per power.

    ``amps`` may be a batch of states stacked along leading axes.
    """
    if config.formalism == Formalism.ALTERNATIVE:
        vecs, digs = [], []
        for l in range(n_max + 1):
            v, d = _alternative_single(config.scheme, H, dt, amps, l, config.strict)
            vecs.append(v)
            digs.append(d)
        return vecs, digs
    if config.evaluation == Evaluation.NESTED:
        return nested_powers(H, config.scheme, dt, amps, n_max)
    ladder = EvolutionLadder(H, config.scheme, dt, amps)
    pairs = [ladder.power(l) for l in range(n_max + 1)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _alternative_single(scheme, H, dt, amps, n, strict=True):
    """sum_k c_{n,k} S((n/2 - k) dt) psi, one Trotter application per term."""
    if n == 0:
        return amps.copy(), 0.0
    if strict and 2 * scheme.m < n:
        raise ConstraintError(f"alternative form needs 2m >= n, got m={scheme.m}, n={n}")
    out = np.zeros_like(amps)
    scale = 0.0
    for k in range(n + 1):
        c = cnk(n, k, dt)
        t = (n / 2.0 - k) * dt
        term = amps if t == 0 else apply_trotter_array(scheme, H, t, amps)
        out += c * term
        scale += abs(c)
    return out, _digits(scale * np.linalg.norm(amps), np.linalg.norm(out))


def power_sequence_array(config: PowerConfig, H: PartitionedHamiltonian, amps: np.ndarray,
                         n_max: int | None = None):
    """Array version of :func:`power_sequence`; works on batches of states."""
    n_max = config.n if n_max is None else n_max
    if config.violates_constraint(n_max):
        raise ConstraintError(
            f"alternative form needs 2m >= n, got m={config.scheme.m}, n={n_max}")
    if amps.shape[-1] != 1 << H.n_qubits:
        raise ValueError("state and Hamiltonian sizes differ")
    weights = richardson_weights(config.r, config.h)
    levels = [level_sequence(config, H, amps, dt, n_max) for dt in config.steps()]
    out_vecs, diags = [amps], [PowerDiagnostics(0.0, [0.0] * len(levels))]
    for l in range(1, n_max + 1):
        parts = [vecs[l] for vecs, _ in levels]
        out = sum(w * v for w, v in zip(weights, parts))
        scale = sum(abs(w) * np.linalg.norm(v) for w, v in zip(weights, parts))
        per_level = [digs[l] for _, digs in levels]
        total = max(per_level) + _digits(scale, np.linalg.norm(out))
        out_vecs.append(out)
        diags.append(PowerDiagnostics(total, per_level))
    return out_vecs, diags


def power_sequence(config: PowerConfig, H: PartitionedHamiltonian, psi: State,
                   n_max: int | None = None) -> tuple[list[State], list[PowerDiagnostics]]:
    """H^l_ST(r) psi for l = 0..n_max (default config.n), sharing evolutions across l."""
    if psi.n_qubits != H.n_qubits:
        raise ValueError("state and Hamiltonian sizes differ")
    vecs, diags = power_sequence_array(config, H, psi.amplitudes, n_max)
    return [psi] + [State(psi.n_qubits, v) for v in vecs[1:]], diags


def apply_power_array(config: PowerConfig, H: PartitionedHamiltonian,
                      amps: np.ndarray) -> tuple[np.ndarray, PowerDiagnostics]:
    """H^n_ST(r) applied to a state or a batch of states."""
    if config.n == 0:
        return amps.copy(), PowerDiagnostics()
    if config.formalism == Formalism.ALTERNATIVE:
        weights = richardson_weights(config.r, config.h)
        parts = [_alternative_single(config.scheme, H, dt, amps, config.n, config.strict)
                 for dt in config.steps()]
        out = sum(w * v for w, (v, _) in zip(weights, parts))
        scale = sum(abs(w) * np.linalg.norm(v) for w, (v, _) in zip(weights, parts))
        per_level = [d for _, d in parts]
        return out, PowerDiagnostics(max(per_level) + _digits(scale, np.linalg.norm(out)),
                                     per_level)
    vecs, diags = power_sequence_array(config, H, amps)
    return vecs[-1], diags[-1]


def apply_power_with_diagnostics(config: PowerConfig, H: PartitionedHamiltonian,
                                 psi: State) -> tuple[State, PowerDiagnostics]:
    if psi.n_qubits != H.n_qubits:
        raise ValueError("state and Hamiltonian sizes differ")
    out, diag = apply_power_array(config, H, psi.amplitudes)
    return State(psi.n_qubits, out), diag


def apply_power(config: PowerConfig, H: PartitionedHamiltonian, psi: State) -> State:
    """H^n_ST(r)(dt) psi in the configured formalism."""
    return apply_power_with_diagnostics(config, H, psi)[0]


def apply_power_alternative(config: PowerConfig, H: PartitionedHamiltonian, psi: State) -> State:
    if config.formalism != Formalism.ALTERNATIVE:
        config = config.with_(formalism=Formalism.ALTERNATIVE)
    return apply_power(config, H, psi)


def hermiticity_check(config: PowerConfig, H: PartitionedHamiltonian, psi: State,
                      phi: State) -> tuple[float, float]:
    """(|<phi|P psi> - conj<psi|P phi>|, |<phi|P(dt) psi> - <phi|P(-dt) psi>|)."""
    p_psi = apply_power(config, H, psi)
    p_phi = apply_power(config, H, phi)
    herm = abs(np.vdot(phi.amplitudes, p_psi.amplitudes)
               - np.conj(np.vdot(psi.amplitudes, p_phi.amplitudes)))
    p_neg = apply_power(config.with_(dtau=-config.dtau), H, psi)
    even = abs(np.vdot(phi.amplitudes, p_psi.amplitudes)
               - np.vdot(phi.amplitudes, p_neg.amplitudes))
    return float(herm), float(even)


def lcu_success_probability(H: PartitionedHamiltonian, scheme: TrotterScheme, dtau: float,
                            n: int, psi: State) -> float:
    """(-1)^n / 4^n <psi|[S(dt/2) - S(-dt/2)]^{2n}|psi> from ladder overlaps.

    <psi|S^{2j}|psi> = <S^{-j} psi|S^{j} psi>, so the ladder up to j = n suffices.
    """
    if n == 0:
        return 1.0
    ladder = EvolutionLadder(H, scheme, dtau, psi)
    ladder.extend(n)
    total = 0.0 + 0.0j
    for k in range(2 * n + 1):
        j = n - k  # S^{2n-2k} = S^{2j}
        total += math.comb(2 * n, k) * (-1) ** k * np.vdot(ladder[-j], ladder[j])
    value = ((-1) ** n * total / 4**n).real
    return float(min(max(value, 0.0), 1.0))
