"""Command-line harness: ``qpm <subcommand> [options]``.

Every subcommand writes a table as CSV (``#`` metadata lines first) or JSON
(``meta`` plus ``rows``). Exit status is 0 on success, 1 on usage errors and
2 on numerical breakdown.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import click
import numpy as np

from . import krylov as kry
from . import metrics, moments
from .hamiltonian import (
    ModelTag,
    NonConvergenceError,
    PartitionedHamiltonian,
    exact_ground_state,
    heisenberg_ring,
    hubbard_ladder_4x2,
    load_hamiltonian,
    natural_sector,
)
from .qpower import ConstraintError, PowerConfig, apply_power_with_diagnostics
from .refstates import (
    ReferenceSet,
    heisenberg_references,
    hubbard_references,
    load_state,
    save_state,
    translate,
)
from .statevector import StateFormatError, read_state
from .trotter import depth, propagator_deviation, suzuki_coefficients


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------------------
# output


def emit(ctx: click.Context, rows: list[dict], extra_meta: dict | None = None) -> None:
    obj = ctx.find_root().obj
    meta = {
        "version": _version(),
        "command": ctx.info_name,
        "params": {k: v for k, v in ctx.params.items()},
        "seed": obj["seed"],
        "threads": obj["threads"],
    }
    meta.update(extra_meta or {})
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if obj["format"] == "json":
        text = json.dumps({"meta": {**meta, "timestamp": stamp}, "rows": rows},
                          indent=2, default=_json_default) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# timestamp: {stamp}\n")
        for key, value in meta.items():
            buf.write(f"# {key}: {json.dumps(value, default=_json_default)}\n")
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(v) for k, v in row.items()})
        text = buf.getvalue()
    if obj["out"]:
        Path(obj["out"]).write_text(text)
    else:
        click.echo(text, nl=False)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


# ---------------------------------------------------------------------------
# shared model and reference handling


def model_options(f):
    f = click.option("--hamiltonian", "ham_file", type=click.Path(exists=True, dir_okay=False),
                     help="Custom Hamiltonian JSON (overrides --model).")(f)
    f = click.option("--u", "U_H", type=float, default=4.0, show_default=True,
                     help="Hubbard U_H / J.")(f)
    f = click.option("--J", "J", type=float, default=1.0, show_default=True)(f)
    f = click.option("--n", "--n-qubits", "n_qubits", type=int, default=16, show_default=True,
                     help="Ring length for the Heisenberg model.")(f)
    f = click.option("--model", type=click.Choice(["heisenberg", "hubbard"]),
                     default="heisenberg", show_default=True)(f)
    return f


def trotter_options(f):
    f = click.option("--p", type=int, default=3, show_default=True)(f)
    f = click.option("--m", type=int, default=1, show_default=True)(f)
    return f


def build_model(model, n_qubits, J, U_H, ham_file) -> PartitionedHamiltonian:
    if ham_file:
        return load_hamiltonian(ham_file)
    if model == "heisenberg":
        return heisenberg_ring(n_qubits, J)
    return hubbard_ladder_4x2(J, U_H)


def energy_scale(H: PartitionedHamiltonian) -> float:
    """N J for the ring and N J / 2 for the ladder, with N the qubit count; 1 otherwise."""
    J = H.params.get("J", 1.0)
    if H.model_tag == ModelTag.HEISENBERG_RING:
        return H.n_qubits * J
    if H.model_tag == ModelTag.HUBBARD_LADDER_4X2:
        return H.n_qubits * J / 2.0
    return 1.0


def builtin_references(H: PartitionedHamiltonian) -> ReferenceSet:
    if H.model_tag == ModelTag.HEISENBERG_RING:
        return heisenberg_references(H.n_qubits)
    if H.model_tag == ModelTag.HUBBARD_LADDER_4X2:
        return hubbard_references(include_u0=True, J=H.params.get("J", 1.0))
    return ReferenceSet((), ())


def resolve_refs(H: PartitionedHamiltonian, spec: str) -> ReferenceSet:
    """Comma list of built-in labels or QPSV file paths."""
    items = [s.strip() for s in spec.split(",") if s.strip()]
    builtin = None
    states, labels = [], []
    for item in items:
        if Path(item).is_file():
            states.append(load_state(item))
            labels.append(item)
            continue
        if builtin is None:
            builtin = builtin_references(H)
        states.extend(builtin.select([item]).states)
        labels.append(item)
    for s in states:
        if s.n_qubits != H.n_qubits:
            raise click.UsageError(f"reference has {s.n_qubits} qubits, model {H.n_qubits}")
    return ReferenceSet(tuple(states), tuple(labels))


def ground_state(H: PartitionedHamiltonian, seed: int):
    return exact_ground_state(H, sector=natural_sector(H), seed=seed)


# ---------------------------------------------------------------------------
# commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True, help="Advisory only.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.version_option(_version(), prog_name="qpm")
@click.pass_context
def cli(ctx, seed, threads, out, fmt):
    """Quantum power method simulator."""
    ctx.obj = {"seed": seed, "threads": threads, "out": out, "format": fmt}


@cli.command()
@click.option("--m", type=int, required=True)
@click.option("--p", type=int, default=3, show_default=True)
@click.option("--ngamma", type=int, default=2, show_default=True)
@click.pass_context
def coeffs(ctx, m, p, ngamma):
    """Symmetric Suzuki-Trotter coefficients s_i and cumulative times T_i."""
    scheme = suzuki_coefficients(m, p, ngamma)
    T = scheme.cumulative()
    total = float(np.sum(scheme.s))
    rows = [{"i": i + 1, "part": g + 1, "s_i": s, "T_i": t, "depth": scheme.depth,
             "sum_s": total}
            for i, (s, g, t) in enumerate(zip(scheme.s, scheme.part_index, T))]
    emit(ctx, rows, {"depth": depth(m, p, ngamma), "sum_s": total})


@cli.command()
@model_options
@trotter_options
@click.option("--power", "powers", default="1", show_default=True, help="Comma list of n.")
@click.option("--dtau-list", default="0.02,0.04,0.06,0.08,0.1", show_default=True)
@click.option("--r", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=None, help="R (default 256 for N<=10, else 16).")
@click.pass_context
def distance(ctx, model, n_qubits, J, U_H, ham_file, m, p, powers, dtau_list, r, samples):
    """Stochastic-trace distance between H^n and its quantum-power approximation."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    scheme = suzuki_coefficients(m, p, H.n_gamma)
    seed = ctx.find_root().obj["seed"]
    scan = metrics.distance_order_scan(H, _int_list(powers), _float_list(dtau_list), r,
                                       samples, seed, scheme)
    rows = [{"n": s.n, "dtau": s.dtau, "d": s.d, "stderr": s.stderr,
             "cancellation": s.cancellation_warning} for s in scan]
    emit(ctx, rows, {"R": samples or metrics.default_samples(H.n_qubits)})


@cli.command()
@model_options
@trotter_options
@click.option("--refs", default="phiA", show_default=True,
              help="Comma list of built-in labels or QPSV paths.")
@click.option("--mb", type=int, default=None, help="Block size check (defaults to #refs).")
@click.option("--nmax", type=int, default=10, show_default=True)
@click.option("--dtau", type=float, default=0.05, show_default=True)
@click.option("--r", type=int, default=1, show_default=True)
@click.option("--scheme", type=click.Choice(["variational", "direct"]), default="variational",
              show_default=True)
@click.option("--scut", type=float, default=kry.DEFAULT_SCUT, show_default=True)
@click.option("--dtau-list", default=None,
              help="Sweep E_KS at n = nmax over these steps and extrapolate to dtau = 0.")
@click.option("--fit-order", type=int, default=1, show_default=True,
              help="Sweep fit in dtau^2, ..., dtau^(2 k).")
@click.pass_context
def krylov(ctx, model, n_qubits, J, U_H, ham_file, m, p, refs, mb, nmax, dtau, r, scheme,
           scut, dtau_list, fit_order):
    """Block Krylov subspace diagonalisation trace for n = 1..nmax."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    refset = resolve_refs(H, refs)
    if mb is not None and mb != refset.block_size:
        raise click.UsageError(f"--mb {mb} but {refset.block_size} references given")
    gs = ground_state(H, ctx.find_root().obj["seed"])
    power = PowerConfig(1, dtau, suzuki_coefficients(m, p, H.n_gamma), r=r)
    if dtau_list:
        scale = energy_scale(H)
        try:
            sweep = kry.dtau_sweep_and_fit(H, refset, nmax, power, _float_list(dtau_list),
                                           fit_order, scheme, scut, scale)
        except ValueError as exc:
            raise click.UsageError(str(exc)) from exc
        rows = [{"n": nmax, "dtau": dt, "E_KS_scaled": e, "fit": sweep.fit(dt)}
                for dt, e in zip(sweep.dtaus, sweep.energies)]
        emit(ctx, rows, {"E0_scaled": gs.energy / scale, "extrapolated": sweep.extrapolated,
                         "extrapolated_stderr": sweep.stderr,
                         "fit_coefficients": sweep.fit.coefficients.tolist()})
        return
    res = kry.run_krylov(H, refset, nmax, power, scheme, scut, psi0=gs.state)
    rows = [{"n": s.n, "E_KS": s.energy, "E_KS_minus_E0": s.energy - gs.energy,
             "fidelity": s.fidelity, "cond_S": s.cond, "kept_dim": s.kept_dim}
            for s in res.steps]
    emit(ctx, rows, {"E0": gs.energy, "energy_scale": energy_scale(H),
                     "truncated_at": res.truncated_at})


@cli.command()
@model_options
@click.option("--refs", default="phiA", show_default=True, help="One label or QPSV path.")
@click.option("--kind", type=click.Choice(["ite", "rte", "qpm"]), required=True)
@click.option("--dtau-list", default="0.01,0.1,0.3", show_default=True)
@click.option("--nmax", type=int, default=30, show_default=True)
@click.option("--r", type=int, default=0, show_default=True)
@click.option("--ite-factor", type=int, default=2, show_default=True,
              help="Imaginary-time basis e^{-f l dtau H}.")
@click.pass_context
def compare(ctx, model, n_qubits, J, U_H, ham_file, refs, kind, dtau_list, nmax, r,
            ite_factor):
    """Condition number and energy error of ITE, RTE and QPM Krylov subspaces."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    refset = resolve_refs(H, refs)
    if refset.block_size != 1:
        raise click.UsageError("compare takes a single reference")
    gs = ground_state(H, ctx.find_root().obj["seed"])
    rows = []
    for dt in _float_list(dtau_list):
        res = kry.comparison_subspaces(H, refset.states[0], nmax, dt, kind, r, ite_factor,
                                       psi0=gs.state)
        rows += [{"kind": kind, "dtau": dt, "n": s.n, "E_KS": s.energy,
                  "rel_error": (s.energy - gs.energy) / abs(gs.energy), "cond_S": s.cond,
                  "fidelity": s.fidelity} for s in res.steps]
    emit(ctx, rows, {"E0": gs.energy})


def _one_ref(H, spec):
    refset = resolve_refs(H, spec)
    if refset.block_size != 1:
        raise click.UsageError("give a single reference state")
    return refset.states[0]


def _fd_moments(H, psi, nmax, dtau, r, scheme):
    series = [moments.propagator_series(H, scheme, dtau / 2.0**l, nmax, psi)
              for l in range(r + 1)]
    mu = np.array([moments.moments_from_propagator(series, n, r) for n in range(nmax + 1)])
    kappa = np.array([moments.cumulants_from_propagator(series, n, r)
                      for n in range(nmax + 1)])
    return mu, kappa, series[0]


@cli.command(name="moments")
@model_options
@trotter_options
@click.option("--refs", default="phiA", show_default=True)
@click.option("--nmax", type=int, default=8, show_default=True)
@click.option("--dtau", type=float, default=None, help="Finite-difference step (omit for exact).")
@click.option("--r", type=int, default=0, show_default=True)
@click.option("--formalism", type=click.Choice(["product", "alternative"]), default="product",
              show_default=True,
              help="alternative: <H^n> from the direct-sum power, also beyond its 2m >= n range.")
@click.pass_context
def moments_cmd(ctx, model, n_qubits, J, U_H, ham_file, m, p, refs, nmax, dtau, r, formalism):
    """Moments, cumulants and Lanczos coefficients of a reference state."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    psi = _one_ref(H, refs)
    exact = moments.exact_moments(H, psi, nmax)
    if dtau is None:
        mu, kappa = exact, moments.cumulants_from_moments(exact)
        flags = [False] * (nmax + 1)
    elif formalism == "alternative":
        scheme = suzuki_coefficients(m, p, H.n_gamma)
        mu, flags = np.empty(nmax + 1), [False] * (nmax + 1)
        mu[0] = 1.0
        for n in range(1, nmax + 1):
            config = PowerConfig(n, dtau, scheme, r=r, formalism="alternative", strict=False)
            out, diag = apply_power_with_diagnostics(config, H, psi)
            mu[n] = np.vdot(psi.amplitudes, out.amplitudes).real
            flags[n] = diag.cancellation_warning
        kappa = moments.cumulants_from_moments(mu)
    else:
        mu, kappa, s0 = _fd_moments(H, psi, nmax, dtau, r,
                                    suzuki_coefficients(m, p, H.n_gamma))
        flags = [n > 0 and moments.fd_cancellation_warning(s0, n) for n in range(nmax + 1)]
    try:
        alpha, beta = moments.lanczos_from_moments(mu)
    except moments.LanczosBreakdown as exc:
        click.echo(f"warning: {exc}; Lanczos columns truncated", err=True)
        alpha, beta = np.array([]), np.array([])
    rows = []
    for n in range(nmax + 1):
        rows.append({
            "n": n, "mu": mu[n], "mu_exact": exact[n], "kappa": kappa[n],
            "alpha": alpha[n - 1] if 1 <= n <= len(alpha) else "",
            "beta": beta[n - 1] if 1 <= n <= len(beta) else "",
            "cancellation": flags[n],
        })
    provenance = "exact" if dtau is None else "finite-difference"
    if dtau is not None and formalism == "alternative":
        provenance = "alternative-form power"
    emit(ctx, rows, {"provenance": provenance})


@cli.command()
@model_options
@trotter_options
@click.option("--refs", default="phiA", show_default=True)
@click.option("--orders", default="1,2,3,4,5,6", show_default=True, help="Truncation n_max list.")
@click.option("--dtau", type=float, required=True, help="Cumulant finite-difference step.")
@click.option("--r", type=int, default=1, show_default=True)
@click.option("--tau-max", type=float, default=3.0, show_default=True)
@click.option("--tau-steps", type=int, default=61, show_default=True)
@click.pass_context
def cmx(ctx, model, n_qubits, J, U_H, ham_file, m, p, refs, orders, dtau, r, tau_max,
        tau_steps):
    """Connected-moment expansion E_{n_max}(tau) against exact imaginary-time evolution."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    psi = _one_ref(H, refs)
    order_list = _int_list(orders)
    _, kappa, _ = _fd_moments(H, psi, max(order_list), dtau, r,
                              suzuki_coefficients(m, p, H.n_gamma))
    tau = np.linspace(0.0, tau_max, tau_steps)
    exact = moments.exact_ite_energy(H, psi, tau)
    series = {k: moments.cmx_energy(kappa, k, tau) for k in order_list}
    rows = []
    for i, t in enumerate(tau):
        row = {"tau": t}
        row.update({f"E_{k}": series[k][i] for k in order_list})
        row["E_exact"] = exact[i]
        rows.append(row)
    emit(ctx, rows, {"dtau": dtau, "r": r})


@cli.command()
@model_options
@trotter_options
@click.option("--dtau", type=float, default=0.1, show_default=True)
@click.option("--steps", type=int, default=100, show_default=True)
@click.pass_context
def propagator(ctx, model, n_qubits, J, U_H, ham_file, m, p, dtau, steps):
    """Deviation of the Trotterised propagator from exact evolution in the ground state."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    gs = ground_state(H, ctx.find_root().obj["seed"])
    scheme = suzuki_coefficients(m, p, H.n_gamma)
    dev = propagator_deviation(H, scheme, dtau, steps, gs.state, gs.energy)
    rows = [{"l": l, "t": l * dtau, "re_dK": d.real, "im_dK": d.imag, "abs_dK": abs(d)}
            for l, d in enumerate(dev)]
    emit(ctx, rows, {"E0": gs.energy, "depth": scheme.depth})


@cli.command(name="translate")
@click.option("--input", "src", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--shift", type=int, required=True)
@click.option("--output", "dst", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def translate_cmd(ctx, src, shift, dst):
    """Cyclically relabel the qubits of a QPSV state file (q -> q + shift)."""
    state = read_state(src)
    save_state(translate(state, shift), dst)
    emit(ctx, [{"input": src, "shift": shift, "output": dst, "n_qubits": state.n_qubits}])


@cli.command()
@model_options
@click.option("--save", type=click.Path(dir_okay=False), default=None,
              help="Write the ground state as a QPSV file.")
@click.pass_context
def groundstate(ctx, model, n_qubits, J, U_H, ham_file, save):
    """Exact ground-state energy in the model's natural symmetry sector."""
    H = build_model(model, n_qubits, J, U_H, ham_file)
    gs = ground_state(H, ctx.find_root().obj["seed"])
    if save:
        save_state(gs.state, save)
    scale = energy_scale(H)
    emit(ctx, [{"n_qubits": H.n_qubits, "E0": gs.energy, "E0_scaled": gs.energy / scale,
                "scale": scale, "residual": gs.residual, "gap": gs.gap}])


NUMERICAL_ERRORS = (kry.NumericalBreakdown, moments.LanczosBreakdown, NonConvergenceError,
                    ArithmeticError, np.linalg.LinAlgError)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="qpm", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except NUMERICAL_ERRORS as exc:
        click.echo(f"numerical breakdown: {exc}", err=True)
        return 2
    except (ValueError, KeyError, ConstraintError, StateFormatError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        click.echo(f"error: {msg}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
