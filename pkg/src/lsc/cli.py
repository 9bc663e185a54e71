"""Command-line front end: dispatch experiments, emit CSV rows and JSON summaries.

Config lives in a plain ``key=value`` file (``--config PATH``); any flag
given on the command line overrides the file.  Numeric CSV fields are
written with 17 significant digits, and grids are assembled in grid order,
so identical configs produce byte-identical output at any thread count.

Exit codes: 0 success, 2 invalid configuration, 3 assumption validation
failed, 4 solver non-convergence, 5 an experiment assertion failed (for
example a negative certificate or a broken cover identity).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import eigensolve, hermite, lattice, potentials, semiclassics
from .errors import BoxTooSmall, ConvergenceFailure, DegenerateDecomposition, LscError
from .lattice import LatticeBox

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_ASSERTION = 5


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def dump_matrix(path: str, op) -> None:
    """Coordinate-triplet text dump (row, col, value) of an assembled operator."""
    i, j = op.box.neighbor_index_pairs()
    with open(path, "w") as fh:
        for r, v in enumerate(op.diagonal):
            fh.write(f"{r} {r} {_fmt(float(v))}\n")
        for a, b in zip(i, j):
            fh.write(f"{a} {b} {_fmt(-op.coupling)}\n")
            fh.write(f"{b} {a} {_fmt(-op.coupling)}\n")


def _parse_config_file(path: str) -> dict:
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            # config keys mirror the flags; map the two path flags whose
            # argparse destinations differ from their names
            key = {"json": "json_path", "dump_matrix": "dump_matrix_path"}.get(key, key)
            out[key] = value.strip()
    return out


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    toks = str(text).replace("[", "").replace("]", "").split(",")
    return [float(t) for t in toks if t.strip()]


def _ints(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    toks = str(text).replace("[", "").replace("]", "").split(",")
    return [int(t) for t in toks if t.strip()]


@dataclass(frozen=True)
class RunConfig:
    """Fully merged and validated run parameters for one subcommand."""

    command: str
    potential: str | None = None
    omega: list[float] | None = None
    wells: list[float] | None = None
    gammas: list[float] | None = None
    Ns: list[int] | None = None
    kappas: list[float] | None = None
    nmax: int | None = None
    delta_spike: float | None = None
    delta_cut: float | None = None
    epsilon: float | None = None
    count: int | None = None
    M: int | None = None
    k: int | None = None
    out: str | None = None
    json_path: str | None = None
    dump_matrix_path: str | None = None
    threads: int = 1
    tol_eig: float | None = None
    tol_box: float | None = None
    scan_radius: float | None = None
    grid_step: float | None = None

    def __post_init__(self):
        if self.Ns is not None:
            if any(N <= 0 for N in self.Ns) or any(
                b <= a for a, b in zip(self.Ns, self.Ns[1:])
            ):
                raise ValueError("N list must be strictly increasing positive integers")
        if self.gammas is not None and not all(math.isfinite(g) for g in self.gammas):
            raise ValueError("gamma grid must be finite")
        if self.delta_spike is not None and not 0.0 < self.delta_spike < 0.5:
            raise ValueError("delta_spike must lie in (0, 0.5)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsc",
        description="Spectra of lattice Schrodinger operators under coupled "
        "mesh / semiclassical scaling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file; flags override")
        p.add_argument("--potential", help="harmonic|double_well|double_well_2d|two_well|free")
        p.add_argument("--omega", help="comma list of well frequencies")
        p.add_argument("--wells", help="comma list of well locations (two_well family)")
        p.add_argument("--gamma", help="scaling exponent (comma list for regimes)")
        p.add_argument("--N", dest="N", help="comma list of mesh counts")
        p.add_argument("--kappa", help="comma list of reduced scales")
        p.add_argument("--nmax", type=int, help="highest tracked level")
        p.add_argument("--delta-spike", dest="delta_spike", type=float,
                       help="spike exponent in (0, 0.5)")
        p.add_argument("--delta-cut", dest="delta_cut", type=float,
                       help="cube cutoff exponent in (0, (1-gamma)/2)")
        p.add_argument("--epsilon", type=float, help="certificate margin")
        p.add_argument("--count", type=int, help="number of enumerated values")
        p.add_argument("--M", type=int, help="box half-width override")
        p.add_argument("--k", type=int, help="number of eigenvalues")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--json", dest="json_path", help="JSON summary path")
        p.add_argument("--dump-matrix", dest="dump_matrix_path",
                       help="triplet dump path")
        p.add_argument("--threads", type=int, help="grid parallelism (env LSC_THREADS)")
        p.add_argument("--tol-eig", dest="tol_eig", type=float,
                       help="bisection relative tolerance override")
        p.add_argument("--tol-box", dest="tol_box", type=float,
                       help="box doubling relative tolerance override")
        p.add_argument("--scan-radius", dest="scan_radius", type=float)
        p.add_argument("--grid-step", dest="grid_step", type=float)

    for name in ("spectrum", "sigma", "converge", "kappa", "regimes",
                 "quasimode", "intervals", "ims", "validate"):
        common(sub.add_parser(name))
    return parser


_INT_KEYS = ("nmax", "count", "M", "k", "threads")
_FLOAT_KEYS = ("delta_spike", "delta_cut", "epsilon", "tol_eig", "tol_box",
               "scan_radius", "grid_step")


def build_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.config:
        merged.update(_parse_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None:
            merged[key] = value
    threads = merged.pop("threads", None)
    if threads is None:
        threads = os.environ.get("LSC_THREADS", "1")
    return RunConfig(
        command=args.command,
        potential=merged.get("potential"),
        omega=None if merged.get("omega") is None else _floats(merged["omega"]),
        wells=None if merged.get("wells") is None else _floats(merged["wells"]),
        gammas=None if merged.get("gamma") is None else _floats(merged["gamma"]),
        Ns=None if merged.get("N") is None else _ints(merged["N"]),
        kappas=None if merged.get("kappa") is None else _floats(merged["kappa"]),
        nmax=None if merged.get("nmax") is None else int(merged["nmax"]),
        delta_spike=None if merged.get("delta_spike") is None else float(merged["delta_spike"]),
        delta_cut=None if merged.get("delta_cut") is None else float(merged["delta_cut"]),
        epsilon=None if merged.get("epsilon") is None else float(merged["epsilon"]),
        count=None if merged.get("count") is None else int(merged["count"]),
        M=None if merged.get("M") is None else int(merged["M"]),
        k=None if merged.get("k") is None else int(merged["k"]),
        out=merged.get("out"),
        json_path=merged.get("json_path"),
        dump_matrix_path=merged.get("dump_matrix_path"),
        threads=int(threads),
        tol_eig=None if merged.get("tol_eig") is None else float(merged["tol_eig"]),
        tol_box=None if merged.get("tol_box") is None else float(merged["tol_box"]),
        scan_radius=None if merged.get("scan_radius") is None else float(merged["scan_radius"]),
        grid_step=None if merged.get("grid_step") is None else float(merged["grid_step"]),
    )


def _default(value, fallback):
    return fallback if value is None else value


def _resolve_potential(cfg: RunConfig) -> potentials.Potential:
    name = _default(cfg.potential, "harmonic")
    if name == "two_well" and cfg.wells is not None:
        if len(cfg.wells) != 2:
            raise ValueError("two_well takes exactly two well locations")
        separation = abs(cfg.wells[1] - cfg.wells[0])
        omega = cfg.omega[0] if cfg.omega else 1.0
        return potentials.two_well(omega=omega, separation=separation)
    return potentials.builtin_potential(name, cfg.omega)


def _csv_path(cfg: RunConfig, default: str) -> str:
    return str(_default(cfg.out, default))


def _summary(cfg: RunConfig, experiment: str, passed: bool, constants: dict,
             csv_path: str) -> None:
    if cfg.json_path:
        params = {
            key: value
            for key, value in dataclasses.asdict(cfg).items()
            if value is not None
            and key not in ("out", "json_path", "dump_matrix_path")
        }
        write_json(str(cfg.json_path), {
            "experiment": experiment,
            "params": params,
            "pass": bool(passed),
            "measured_constants": constants,
            "rows_csv_path": csv_path,
        })


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> int:
    k = _default(cfg.k, 6)
    op = None
    if cfg.potential == "free":
        M = _default(cfg.M, 1)
        op = lattice.assemble_laplacian(LatticeBox.centered(1, M))
        values = eigensolve.eigs_tridiag(op, min(k, op.size)).values
    elif cfg.kappas:
        kappa = cfg.kappas[0]
        M = _default(cfg.M, hermite.box_halfwidth(k - 1, kappa))
        op = lattice.assemble_Hkappa(kappa, LatticeBox.centered(1, M))
        values = eigensolve.eigs_tridiag(op, k).values
    else:
        V = _resolve_potential(cfg)
        N = (cfg.Ns or [16])[0]
        gamma = (cfg.gammas or [0.0])[0]
        params = potentials.ScalingParams(
            N=N, gamma=gamma, omega=float(V.wells[0].frequencies[0])
        )
        if cfg.M is not None:
            op = lattice.assemble_HN(V, params, LatticeBox.centered(V.dimension, cfg.M))
            values = eigensolve.eigs_tridiag(op, k).values
        else:
            values = semiclassics.levels_HN(V, params, k)
    if cfg.dump_matrix_path and op is not None:
        dump_matrix(cfg.dump_matrix_path, op)
    path = _csv_path(cfg, "spectrum.csv")
    write_csv(path, ["n", "E_n"], [(n, float(v)) for n, v in enumerate(values)])
    _summary(cfg, "spectrum", True, {}, path)
    return EXIT_OK


def cmd_sigma(cfg: RunConfig) -> int:
    V = _resolve_potential(cfg)
    seq = semiclassics.sigma_enumerate(V, _default(cfg.count, 8))
    rows = [
        (n, float(v), well, "+".join(str(m) for m in multi))
        for n, (v, (well, multi)) in enumerate(zip(seq.values, seq.provenance))
    ]
    path = _csv_path(cfg, "sigma.csv")
    write_csv(path, ["n", "e_n", "well", "multi_index"], rows)
    _summary(cfg, "sigma", True, {}, path)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    V = _resolve_potential(cfg)
    radius = _default(cfg.scan_radius, V.positivity_radius + 3.0)
    step = _default(cfg.grid_step, 0.01)
    report = potentials.validate_assumptions(V, radius, step)
    path = _csv_path(cfg, "validate.csv")
    write_csv(
        path,
        ["check", "passed", "detail"],
        [
            ("nonnegative", report.nonnegative, report.min_value),
            ("wells", report.wells_valid, len(report.well_messages)),
            ("no_unregistered_zeros", not report.unregistered_zeros,
             len(report.unregistered_zeros)),
            ("positive_at_infinity", report.positive_at_infinity, report.floor_margin),
            ("smoothness", True, report.smoothness),
        ],
    )
    _summary(cfg, "validate", report.passed, {"zero_count": report.zero_count}, path)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_kappa(cfg: RunConfig) -> int:
    kappas = _default(cfg.kappas, [0.2, 0.1, 0.05, 0.025])
    n_max = _default(cfg.nmax, 5)
    omega = (cfg.omega or [1.0])[0]
    study = semiclassics.harmonic_kappa_study(omega, kappas, n_max,
                                              threads=cfg.threads)
    rows = [(r.kappa, r.n, r.energy, r.ratio, r.target, r.abs_err)
            for r in study.rows]
    path = _csv_path(cfg, "kappa.csv")
    write_csv(path, ["kappa", "n", "E_n", "ratio", "target", "abs_err"], rows)
    decreasing = all(
        all(d2 < d1 for d1, d2 in zip(study.deviations(n), study.deviations(n)[1:]))
        for n in range(n_max + 1)
    )
    orders = {str(n): study.deviation_orders[n] for n in range(n_max + 1)}
    _summary(cfg, "kappa", decreasing, {"deviation_orders": orders}, path)
    return EXIT_OK if decreasing else EXIT_ASSERTION


def cmd_converge(cfg: RunConfig) -> int:
    V = _resolve_potential(cfg)
    report = potentials.validate_assumptions(
        V,
        _default(cfg.scan_radius, V.positivity_radius + 3.0),
        _default(cfg.grid_step, 0.02),
    )
    if not report.passed:
        print("assumption validation failed; see `lsc validate`", file=sys.stderr)
        return EXIT_VALIDATION
    gamma = (cfg.gammas or [0.0])[0]
    Ns = _default(cfg.Ns, [128, 256, 512, 1024])
    n_max = _default(cfg.nmax, 1)
    table = semiclassics.converge_study(V, gamma, Ns, n_max, threads=cfg.threads)
    rows = [(r.gamma, r.N, r.n, r.energy, r.lam, r.ratio, r.target, r.abs_err)
            for r in table.rows]
    path = _csv_path(cfg, "converge.csv")
    write_csv(path, ["gamma", "N", "n", "E_n", "lambda_N", "ratio", "target",
                     "abs_err"], rows)
    passed = all(table.errors_decreasing.values())
    _summary(cfg, "converge", passed,
             {"orders": {str(n): table.orders[n] for n in table.orders}}, path)
    return EXIT_OK if passed else EXIT_ASSERTION


def cmd_regimes(cfg: RunConfig) -> int:
    gammas = _default(cfg.gammas, [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5])
    Ns = _default(cfg.Ns, [8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096])
    n_max = _default(cfg.nmax, 2)
    omega = (cfg.omega or [1.0])[0]
    sweep = semiclassics.regime_sweep(omega, gammas, Ns, n_max, threads=cfg.threads)
    rows = [(r.gamma, r.n, r.slope_fit, r.slope_pred, r.limit_const_fit,
             r.limit_const_pred) for r in sweep.rows]
    path = _csv_path(cfg, "regimes.csv")
    write_csv(path, ["gamma", "n", "slope_fit", "slope_pred",
                     "limit_const_fit", "limit_const_pred"], rows)
    worst = max(abs(r.slope_fit - r.slope_pred)
                for r in sweep.rows if not (r.gamma < -1.0 and r.n == 0))
    constants = {"worst_slope_error": worst}
    if sweep.minus_one_exact_dev is not None:
        constants["minus_one_exact_dev"] = sweep.minus_one_exact_dev
    passed = worst <= 0.1
    _summary(cfg, "regimes", passed, constants, path)
    return EXIT_OK if passed else EXIT_ASSERTION


def cmd_quasimode(cfg: RunConfig) -> int:
    kappas = _default(cfg.kappas, [0.2, 0.1])
    n_max = _default(cfg.nmax, 3)
    rows = []
    cross_worst = 0.0
    ritz_ok = True
    for kappa in kappas:
        box = LatticeBox.centered(1, hermite.box_halfwidth(n_max, kappa))
        xs = box.coords().astype(float)
        op = lattice.assemble_Hkappa(kappa, box)
        spectrum = eigensolve.eigs_tridiag(op, n_max + 1).values
        quasimodes = [hermite.weighted_eval(n, kappa * xs) for n in range(n_max + 1)]
        thetas = eigensolve.subspace_upper_bounds(op, quasimodes)
        for n in range(n_max + 1):
            psi, resid = hermite.quasimode_apply(n, kappa, box)
            sup = float(np.abs(resid).max())
            gram_dev = abs(
                hermite.gram_entry(n, n, kappa, box)
                - math.sqrt(math.pi) * 2.0**n * math.factorial(n) / kappa
            )
            x0 = int(np.abs(resid).argmax())
            cross = abs(resid[x0] + hermite.residual_integral(n, kappa, int(xs[x0])))
            cross_worst = max(cross_worst, cross)
            if thetas[n] < spectrum[n] - 1e-12 * (1.0 + abs(spectrum[n])):
                ritz_ok = False
            rows.append((kappa, n, sup, sup / kappa**4, gram_dev,
                         float(thetas[n]) / kappa**2))
    path = _csv_path(cfg, "quasimode.csv")
    write_csv(path, ["kappa", "n", "resid_sup", "resid_over_kappa4",
                     "gram_diag_dev", "ritz_over_kappa2"], rows)
    passed = ritz_ok and cross_worst <= 1e-9
    _summary(cfg, "quasimode", passed,
             {"stencil_vs_integral": cross_worst}, path)
    return EXIT_OK if passed else EXIT_ASSERTION


def cmd_intervals(cfg: RunConfig) -> int:
    n = _default(cfg.nmax, 2)
    kappa = (cfg.kappas or [0.05])[0]
    delta = _default(cfg.delta_spike, 0.25)
    epsilon = _default(cfg.epsilon, 0.1)
    report = semiclassics.interval_lowerbound_experiment(n, kappa, delta, epsilon)
    cover = report.decomposition.cover_ok(report.halfwidth)
    rows = [(report.n, report.kappa, r.label, r.lo, r.hi,
             float(report.decomposition.beta[abs(r.label) - 1]) if r.label else 1.0,
             r.modified, r.ground_energy, r.ratio, r.cert_ok, r.cert_slack)
            for r in report.rows]
    path = _csv_path(cfg, "intervals.csv")
    write_csv(path, ["n", "kappa", "j", "lo", "hi", "beta", "modified",
                     "E0", "ratio", "cert_ok", "cert_slack"], rows)
    passed = cover and report.all_certificates_ok and report.ratio_ok
    _summary(cfg, "intervals", passed, {
        "min_ratio": report.min_ratio,
        "threshold": report.threshold,
        "cover_ok": cover,
    }, path)
    return EXIT_OK if passed else EXIT_ASSERTION


def cmd_ims(cfg: RunConfig) -> int:
    V = _resolve_potential(cfg)
    N = (cfg.Ns or [256])[0]
    gamma = (cfg.gammas or [0.0])[0]
    delta_cut = _default(cfg.delta_cut, 0.2)
    n_max = _default(cfg.nmax, 3)
    params = potentials.ScalingParams(
        N=N, gamma=gamma, omega=float(V.wells[0].frequencies[0])
    )
    report = semiclassics.ims_general_experiment(V, params, delta_cut, n_max)
    rows = [("eta0", report.eta0_commutator_norm, report.eta0_bound, 0.0, 0.0, 0.0)]
    rows += [(f"well{i}", r.commutator_norm, r.commutator_bound, r.variation,
              r.potdiff_norm, r.potdiff_scale)
             for i, r in enumerate(report.rows)]
    path = _csv_path(cfg, "ims.csv")
    write_csv(path, ["patch", "commutator_norm", "commutator_bound",
                     "variation", "potdiff_norm", "potdiff_scale"], rows)
    passed = (
        report.identity_residual <= 1e-12
        and report.commutators_ok
        and report.eta0_commutator_norm <= report.eta0_bound
        and report.floor_ok
    )
    _summary(cfg, "ims", passed, {
        "identity_residual": report.identity_residual,
        "inner_radius": report.inner_radius,
        "floor_min": report.floor_min,
        "floor_target": report.floor_target,
    }, path)
    return EXIT_OK if passed else EXIT_ASSERTION


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "sigma": cmd_sigma,
    "converge": cmd_converge,
    "kappa": cmd_kappa,
    "regimes": cmd_regimes,
    "quasimode": cmd_quasimode,
    "intervals": cmd_intervals,
    "ims": cmd_ims,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    eigensolve.set_tolerance_overrides(bisection=cfg.tol_eig, box=cfg.tol_box)
    try:
        return _COMMANDS[args.command](cfg)
    except (KeyError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceFailure, BoxTooSmall, DegenerateDecomposition) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except LscError as exc:
        print(f"experiment failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
