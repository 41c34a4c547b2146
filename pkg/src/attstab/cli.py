"""Command-line surface: simulate, analyze, tune, validate.

Configuration is a JSON file (quaternions as [q0, q1, q2, q3], matrices
row-major); see the README for the schema. All diagnostics go to stderr,
all data to files under --out and to stdout. Every command is deterministic
given its config and seed, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, benchmark, observer, sim, so3, tuning
from .controller import ControlGains, w_rho
from .observer import FilterGains
from .plant import PlantConfig
from .sim import GainSet, SimConfig, SimulationDiverged


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def _require(mapping: dict, path: str):
    node = mapping
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"{path}: required field is missing")
        node = node[part]
    return node


def _optional(mapping: dict, path: str, default=None):
    node = mapping
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _array(value, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric array ({exc})") from exc
    if not np.isfinite(arr).all():
        raise ConfigError(f"{path}: entries must be finite")
    return arr


def _square3(value, path: str) -> np.ndarray:
    arr = _array(value, path)
    if arr.shape == (3,):
        return np.diag(arr)
    if arr.shape == (3, 3):
        return arr
    raise ConfigError(f"{path}: expected a 3x3 matrix or a 3-entry diagonal, got shape {arr.shape}")


def load_plant(cfg: dict) -> PlantConfig:
    inertia = _square3(_require(cfg, "plant.inertia"), "plant.inertia")
    refs = _array(_require(cfg, "plant.reference_vectors"), "plant.reference_vectors")
    qd = _array(_optional(cfg, "plant.desired_attitude", [1.0, 0.0, 0.0, 0.0]),
                "plant.desired_attitude")
    try:
        return PlantConfig(inertia, refs, qd)
    except ValueError as exc:
        raise ConfigError(f"plant: {exc}") from exc


def load_gains(cfg: dict, n_vectors: int) -> GainSet:
    kappa = _optional(cfg, "gains.kappa")
    try:
        if kappa is not None:
            return tuning.unpack_kappa(_array(kappa, "gains.kappa"))
        rho = _array(_require(cfg, "gains.rho"), "gains.rho")
        lambdas_raw = _require(cfg, "gains.lambdas")
        if not isinstance(lambdas_raw, list) or len(lambdas_raw) != n_vectors:
            raise ConfigError(f"gains.lambdas: expected {n_vectors} weight matrices")
        lambdas = np.stack([_square3(m, f"gains.lambdas[{i}]") for i, m in enumerate(lambdas_raw)])
        coeffs = _array(_require(cfg, "gains.poly_coeffs"), "gains.poly_coeffs")
        return GainSet(ControlGains(rho), FilterGains(lambdas, coeffs))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"gains: {exc}") from exc


def load_sim_config(cfg: dict, args) -> SimConfig:
    pc = load_plant(cfg)
    gains = load_gains(cfg, pc.n_vectors)
    dt = args.dt if args.dt is not None else float(_optional(cfg, "sim.dt", sim.DEFAULT_DT))
    t_final = (args.t_final if args.t_final is not None
               else float(_optional(cfg, "sim.t_final", sim.DEFAULT_T_FINAL)))
    q0 = _array(_require(cfg, "sim.initial_attitude"), "sim.initial_attitude")
    w0 = _array(_optional(cfg, "sim.initial_omega", [0.0, 0.0, 0.0]), "sim.initial_omega")
    ferr = _optional(cfg, "sim.initial_filter_error")
    if ferr is not None:
        ferr = _array(ferr, "sim.initial_filter_error")
    try:
        initial = sim.initial_state(pc, so3.quat_normalize(q0, max_drift=1e-3), w0, ferr)
        return SimConfig(pc, gains, initial, dt=dt, t_final=t_final)
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc


def read_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = read_config(args.config)
    run = load_sim_config(cfg, args)
    traj = sim.simulate(run)
    w = w_rho(run.gains.control, run.plant_config.reference_vectors)
    qbar_f, _, _ = traj.final_state()
    terminal_label, terminal_dist = None, None
    if w.simple_spectrum:
        state_f = sim.SimState(
            plant=sim.PlantState(traj.quat[-1], traj.omega[-1]),
            filter=observer.FilterState(_final_bhat(traj, run)),
        )
        eq, terminal_dist = analysis.nearest_equilibrium(state_f, w, run.plant_config)
        terminal_label = eq.label
    tau_norm = np.linalg.norm(traj.tau, axis=1)
    summary = {
        "samples": traj.n_samples,
        "dt": run.dt,
        "t_final": run.t_final,
        "convergence_time": traj.convergence_time,
        "terminal_equilibrium": terminal_label,
        "terminal_distance": terminal_dist,
        "terminal_qbar0": float(qbar_f[0]),
        "peak_torque": float(tau_norm.max()),
        "torque_energy": float(np.trapezoid(tau_norm ** 2, dx=run.dt)),
        "max_quat_drift": traj.max_quat_drift,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    _write_json(out / "summary.json", summary)
    print(json.dumps(_jsonable(summary), indent=2))
    return 0


def _final_bhat(traj: sim.Trajectory, run: SimConfig) -> np.ndarray:
    from . import plant as plant_mod
    n = run.plant_config.n_vectors
    state = sim.PlantState(traj.quat[-1], traj.omega[-1])
    b = plant_mod.body_vectors(state, run.plant_config)
    return b - traj.xi[-1].reshape(n, 3)


def _eig_pairs(values) -> list:
    return [[float(v.real), float(v.imag)] for v in values]


def cmd_analyze(args) -> int:
    cfg = read_config(args.config)
    pc = load_plant(cfg)
    gains = load_gains(cfg, pc.n_vectors)
    w = w_rho(gains.control, pc.reference_vectors)
    gen = analysis.check_gen(w)
    report = {
        "w_rho": {
            "matrix": w.matrix,
            "eigenvalues": w.eigenvalues,
            "eigenvectors_columns": w.eigenvectors.T,
        },
        "gen": {
            "simple_spectrum": gen.simple,
            "min_gap": gen.min_gap,
            "relative_gap": gen.relative_gap,
            "discriminant": gen.discriminant,
            "discriminant_sign": gen.discriminant_sign,
        },
        "filter_matrices": observer.build_A_matrices(gains.filters, pc.desired_attitude),
    }
    if gen.simple:
        equilibria = analysis.enumerate_equilibria(w)
        report["equilibria"] = [
            {"label": eq.label, "qbar": eq.q_bar, "classification": eq.classification}
            for eq in equilibria
        ]
        stable = analysis.linearize_stable(pc, gains)
        report["stable_linearization"] = {
            "eigenvalues": _eig_pairs(stable.eigenvalues),
            "max_real_part": stable.max_real_part,
            "verdict": stable.verdict,
        }
        report["unstable_linearizations"] = []
        for eq in equilibria:
            if eq.classification != analysis.UNSTABLE:
                continue
            lin = analysis.linearize_unstable(eq, pc, gains)
            report["unstable_linearizations"].append({
                "label": eq.label,
                "eigenvalues": _eig_pairs(lin.eigenvalues),
                "max_real_part": lin.max_real_part,
                "min_abs_real_part": lin.min_abs_real_part,
                "verdict": lin.verdict,
            })
    else:
        report["equilibria"] = None
        print("warning: W eigenvalues are not simple; equilibria are a continuum",
              file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "analysis.json", report)
    print(json.dumps(_jsonable(report), indent=2))
    return 0


def cmd_tune(args) -> int:
    cfg = read_config(args.config)
    run = load_sim_config(cfg, args)
    kind = str(_optional(cfg, "tuning.objective", "ise")).lower()
    sigma = float(_optional(cfg, "tuning.sigma", 0.1))
    n_starts = int(_optional(cfg, "tuning.n_starts", 4))
    seed = args.seed if args.seed is not None else int(_optional(cfg, "tuning.seed", 0))
    max_iter = int(_optional(cfg, "tuning.max_iter", tuning.DEFAULT_MAX_ITER))
    bounds_cfg = _optional(cfg, "tuning.bounds")
    if bounds_cfg is None:
        bounds = tuning.default_bounds()
    else:
        bounds = tuning.Bounds(_array(_require(cfg, "tuning.bounds.lower"), "tuning.bounds.lower"),
                               _array(_require(cfg, "tuning.bounds.upper"), "tuning.bounds.upper"))
    result = tuning.multistart_optimize(
        run, bounds, kind=kind, sigma=sigma, n_starts=n_starts,
        rng_seed=seed, max_iter=max_iter,
        log=lambda msg: print(msg, file=sys.stderr),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "tune_result.json", result.as_dict())
    if bool(_optional(cfg, "tuning.save_trajectory", False)):
        best_cfg = SimConfig(run.plant_config, tuning.unpack_kappa(result.best_kappa),
                             run.initial, dt=run.dt, t_final=run.t_final)
        sim.simulate(best_cfg).write_csv(out / "best_trajectory.csv")
    print(json.dumps(_jsonable(result.as_dict()), indent=2))
    return 0


# --------------------------------------------------------------------------
# built-in validation
# --------------------------------------------------------------------------

# published gain-matrix table for the benchmark: W entries, its spectrum, and
# the filter matrices as printed there (the latter disagree with the stated
# construction; see the note emitted by `validate`)
_W_EXPECTED = np.array([[24.3144, 0.0, -1.7736],
                        [0.0, 26.0881, 0.0],
                        [-1.7736, 0.0, 1.7736]])
_W_EIGVALS_EXPECTED = np.array([1.6349, 24.4531, 26.0881])
_W_EIGVECS_EXPECTED = np.array([[0.0780, 0.0, 0.9970],
                                [-0.9970, 0.0, 0.0780],
                                [0.0, -1.0, 0.0]])     # rows are eigenvectors
_A_PUBLISHED = (np.array([550.0, 255.2727, 0.5838]),
                np.array([11.4541, 10.6873, 102.7916]))


def _validation_rows() -> list[tuple[str, bool, str]]:
    rows = []
    pc = benchmark.plant_config()
    gains = tuning.unpack_kappa(benchmark.KAPPA_OPT_ISE)
    w = w_rho(gains.control, pc.reference_vectors)

    err = np.abs(w.matrix - _W_EXPECTED).max()
    rows.append(("W matrix entries (tol 1e-3)", err < 1e-3, f"max entry error {err:.2e}"))

    err = np.abs(w.eigenvalues - _W_EIGVALS_EXPECTED).max()
    rows.append(("W eigenvalues (tol 1e-3)", err < 1e-3, f"max error {err:.2e}"))

    cosines = [abs(float(w.eigenvectors[:, k] @ _W_EIGVECS_EXPECTED[k])) for k in range(3)]
    ok = all(c > 1.0 - 1e-2 for c in cosines)
    rows.append(("W eigenvectors (direction cosine within 1e-2)", ok,
                 "cosines " + ", ".join(f"{c:.5f}" for c in cosines)))

    a_mats = observer.build_A_matrices(gains.filters, pc.desired_attitude)
    coeffs = gains.filters.poly_coeffs
    lam_diag = [np.diag(m) for m in gains.filters.lambdas]
    ok = True
    for i in range(2):
        expected = coeffs[i, 0] + coeffs[i, 1] * lam_diag[i] + coeffs[i, 2] * lam_diag[i] ** 2
        ok = ok and np.abs(np.diag(a_mats[i]) - expected).max() < 1e-9
    rows.append(("filter matrices match a0 I + a1 L + a2 L^2", ok,
                 "A1 diag " + np.array2string(np.diag(a_mats[0]), precision=4)))

    for scenario, attitude, target in (("aligned start", benchmark.ATTITUDE_Z_PLUS, "Omega1+"),
                                       ("antipodal start", benchmark.ATTITUDE_Z_MINUS, "Omega1-")):
        run = SimConfig(pc, gains, sim.initial_state(pc, attitude), dt=0.01, t_final=20.0)
        try:
            traj = sim.simulate(run)
            qbar_f, omega_f, _ = traj.final_state()
            converged = (traj.convergence_time is not None
                         and np.linalg.norm(qbar_f[1:]) < 1e-3
                         and np.linalg.norm(omega_f) < 1e-3)
            sign_ok = (qbar_f[0] > 0) == (target == "Omega1+")
            rows.append((f"{scenario} converges to {target}", bool(converged and sign_ok),
                         f"convergence at t = {traj.convergence_time}, qbar0 = {qbar_f[0]:+.6f}"))
        except SimulationDiverged as exc:
            rows.append((f"{scenario} converges to {target}", False, str(exc)))
    return rows


def cmd_validate(_args) -> int:
    rows = _validation_rows()
    width = max(len(name) for name, _, _ in rows)
    failures = 0
    for name, ok, detail in rows:
        status = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"{status}  {name:<{width}}  {detail}")
    gains = tuning.unpack_kappa(benchmark.KAPPA_OPT_ISE)
    a_mats = observer.build_A_matrices(gains.filters, np.array([1.0, 0.0, 0.0, 0.0]))
    print("\nnote: the published gain-matrix table lists the filter matrices as")
    for i, pub in enumerate(_A_PUBLISHED):
        print(f"  A{i + 1} = diag{np.array2string(pub, precision=4, separator=', ')}"
              f"  vs constructed diag{np.array2string(np.diag(a_mats[i]), precision=4, separator=', ')}")
    print("which matches (a0 + a1) L + a2 L^2 instead of the stated a0 I + a1 L + a2 L^2;")
    print("this package implements the stated construction (documented inconsistency, not a failure).")
    return 1 if failures else 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attstab",
        description="Velocity-free attitude stabilization: simulation, analysis, and gain tuning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("config", help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="override tuning seed")
        p.add_argument("--dt", type=float, default=None, help="override integration step")
        p.add_argument("--t-final", dest="t_final", type=float, default=None,
                       help="override simulation horizon")

    p_sim = sub.add_parser("simulate", help="integrate the closed loop; write CSV + summary")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="equilibria, genericity, and linearization spectra")
    common(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_tune = sub.add_parser("tune", help="multi-start bounded gain search")
    common(p_tune)
    p_tune.set_defaults(func=cmd_tune)

    p_val = sub.add_parser("validate", help="run the built-in golden-value checks")
    common(p_val, needs_config=False)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationDiverged, observer.DegenerateMeasurementsError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
