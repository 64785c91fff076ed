"""Operator distance by stochastic trace, jackknife errors, and even-power fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import PartitionedHamiltonian, apply_hamiltonian_array
from .qpower import PowerConfig, apply_power_array, power_sequence_array


def default_samples(n_qubits: int) -> int:
    """R = 256 up to 10 qubits and 16 from 12 qubits on."""
    return 256 if n_qubits <= 10 else 16


def random_phase_batch(n_qubits: int, R: int, seed: int) -> np.ndarray:
    """R random-phase vectors from one PCG64 stream, row zeta = sample zeta."""
    rng = np.random.default_rng(seed)
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(R, 1 << n_qubits)))


@dataclass
class DistanceEstimate:
    d: float
    stderr: float
    R: int
    # per-sample <phi|A^dag A|phi>, <phi|B^dag B|phi>, <phi|A^dag B|phi>
    aa: np.ndarray
    bb: np.ndarray
    ab: np.ndarray
    cancellation_warning: bool = False
    digits_lost: float = 0.0


def distance_from_traces(t_aa: float, t_ee: float, t_ae: complex) -> float:
    """d(A, B) from Tr A^dag A, Tr E^dag E, Tr A^dag E with E = B - A.

    With T_ab = T_aa + T_ae and T_bb = T_aa + 2 Re T_ae + T_ee, the Gram
    determinant T_aa T_bb - |T_ab|^2 equals T_aa T_ee - |T_ae|^2, so
    1 - |T_ab| / sqrt(T_aa T_bb) is evaluated without cancellation.
    """
    t_ab = t_aa + t_ae
    t_bb = t_aa + 2.0 * t_ae.real + t_ee
    gram = max(t_aa * t_ee - abs(t_ae) ** 2, 0.0)
    root = np.sqrt(t_aa * t_bb)
    if root == 0.0:
        raise ZeroDivisionError("distance undefined for a zero operator")
    return float(np.sqrt(gram / (root * (root + abs(t_ab)))))


def jackknife(samples: np.ndarray, estimator) -> tuple[float, float]:
    """Full-sample estimate and delete-one jackknife standard error.

    ``samples`` has one row per sample; ``estimator`` maps a mean row to a float.
    """
    samples = np.asarray(samples)
    R = samples.shape[0]
    full = estimator(samples.mean(axis=0))
    if R < 2:
        return full, float("nan")
    total = samples.sum(axis=0)
    loo = np.array([estimator((total - samples[i]) / (R - 1)) for i in range(R)])
    err = np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2))
    return full, float(err)


def _exact_power(H: PartitionedHamiltonian, amps: np.ndarray, n: int) -> np.ndarray:
    out = amps
    for _ in range(n):
        out = apply_hamiltonian_array(H, out)
    return out


def distance_from_vectors(a: np.ndarray, b: np.ndarray) -> DistanceEstimate:
    """Distance between operators A, B from their images A phi, B phi (rows = samples)."""
    e = b - a
    aa = np.einsum("ij,ij->i", a.conj(), a).real
    ee = np.einsum("ij,ij->i", e.conj(), e).real
    ae = np.einsum("ij,ij->i", a.conj(), e)
    bb = np.einsum("ij,ij->i", b.conj(), b).real
    ab = aa + ae
    samples = np.column_stack([aa, ee, ae.real, ae.imag])

    def est(mean):
        return distance_from_traces(mean[0], mean[1], complex(mean[2], mean[3]))

    d, err = jackknife(samples, est)
    return DistanceEstimate(d, err, a.shape[0], aa, bb, ab)


def power_distance(H: PartitionedHamiltonian, config: PowerConfig, n: int | None = None,
                   R: int | None = None, seed: int = 0, batch: int = 64) -> DistanceEstimate:
    """d(H^n, H^n_ST(r)(dt)) estimated with R random-phase states."""
    n = config.n if n is None else n
    if n > 100:
        raise ValueError("power_distance supports n <= 100")
    if H.n_qubits > 24:
        raise ValueError("power_distance supports at most 24 qubits")
    config = config.with_(n=n)
    R = default_samples(H.n_qubits) if R is None else R
    phis = random_phase_batch(H.n_qubits, R, seed)
    a_rows, b_rows, digits = [], [], 0.0
    for start in range(0, R, batch):
        block = phis[start:start + batch]
        a_rows.append(_exact_power(H, block, n))
        b, diag = apply_power_array(config, H, block)
        b_rows.append(b)
        digits = max(digits, diag.digits_lost)
    est = distance_from_vectors(np.vstack(a_rows), np.vstack(b_rows))
    est.digits_lost = digits
    est.cancellation_warning = digits >= 10.0
    return est


@dataclass
class ScanRow:
    n: int
    dtau: float
    d: float
    stderr: float
    cancellation_warning: bool


def distance_order_scan(H: PartitionedHamiltonian, n_list, dtau_list, r: int, R: int | None,
                        seed: int, scheme, h: float = 2.0) -> list[ScanRow]:
    """Distances on an (n, dtau) grid; the same random-phase states are reused throughout."""
    R = default_samples(H.n_qubits) if R is None else R
    phis = random_phase_batch(H.n_qubits, R, seed)
    n_top = max(n_list)
    exact = {0: phis}
    cur = phis
    for k in range(1, n_top + 1):
        cur = apply_hamiltonian_array(H, cur)
        if k in n_list:
            exact[k] = cur
    rows = []
    for dtau in dtau_list:
        config = PowerConfig(n_top, dtau, scheme, r=r, h=h)
        vecs, diags = power_sequence_array(config, H, phis, n_top)
        for n in n_list:
            est = distance_from_vectors(exact[n], vecs[n])
            rows.append(ScanRow(n, dtau, est.d, est.stderr, diags[n].cancellation_warning))
    return rows


@dataclass
class FitResult:
    orders: tuple[int, ...]
    coefficients: np.ndarray   # constant first, then one per order
    stderrs: np.ndarray
    residuals: np.ndarray

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def intercept_stderr(self) -> float:
        return float(self.stderrs[0])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.coefficients[0] + sum(c * x**k for c, k in zip(self.coefficients[1:],
                                                                    self.orders))


def polyfit_even_powers(x, y, orders=(2,), sigma=None) -> FitResult:
    """Least squares y = b + sum_k a_k x^k over the given (even) orders.

    Standard errors come from the residual variance, or from ``sigma`` when
    per-point errors are supplied.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    orders = tuple(int(k) for k in orders)
    p = len(orders) + 1
    if len(x) < p:
        raise ValueError(f"need at least {p} points for {p} coefficients, got {len(x)}")
    X = np.column_stack([np.ones_like(x)] + [x**k for k in orders])
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    Xw, yw = X * w[:, None], y * w
    if np.linalg.matrix_rank(Xw) < p:
        raise np.linalg.LinAlgError("rank-deficient design matrix")
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = y - X @ coef
    cov = np.linalg.inv(Xw.T @ Xw)
    if sigma is None:
        dof = len(x) - p
        s2 = float(resid @ resid / dof) if dof > 0 else float("nan")
        cov = cov * s2
    return FitResult(orders, coef, np.sqrt(np.abs(np.diag(cov))), resid)


def loglog_slope(x, y) -> tuple[float, float]:
    """Slope and its standard error of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    fit = polyfit_even_powers(lx, ly, orders=(1,))
    return float(fit.coefficients[1]), float(fit.stderrs[1])
