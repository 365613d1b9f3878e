"""Experiment driver.

Runs parameter sweeps that record GMRES iteration counts for one implicit
midpoint step from a Gaussian elevation disturbance, and a verification mode
that exercises the coupling-matrix identities, eigenvalue brackets, energy
behavior, reformulation identity, and equivalence windows.  Results are
emitted as CSV tables (sweeps) or a plain-text report (verify).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis
from .krylov import make_solver
from .layers import (LayerStack, coupling_inverse, coupling_matrix, ldlt,
                     random_admissible_stack, spectral_bounds)
from .mesh import build_unit_square_mesh
from .precond import (INNER_EXACT, INNER_ILU0, VARIANT_DECOUPLED,
                      VARIANT_FULL_ILU0, VARIANT_TRIDIAG, VARIANT_WEIGHTED,
                      build_preconditioner, reform_c_tilde, weighted_c_matrix)
from .system import (PhysicalParams, assemble_block_system, energy,
                     initial_disturbance, midpoint_step)

EXPERIMENTS = ("fr-sweep", "cfl-sweep", "layer-sweep", "verify")

PC_NAMES = {
    "ilu": VARIANT_FULL_ILU0,
    "wtd-norm": VARIANT_WEIGHTED,
    "layer-decoupled": VARIANT_DECOUPLED,
    "tridiag": VARIANT_TRIDIAG,
}
INNER_NAMES = {"exact": INNER_EXACT, "ilu0": INNER_ILU0}

# layer sweeps compare these solver configurations side by side
LAYER_SWEEP_CONFIGS = (
    ("ilu", "exact"),
    ("wtd-norm", "exact"),
    ("wtd-norm", "ilu0"),
    ("layer-decoupled", "exact"),
    ("layer-decoupled", "ilu0"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of one driver invocation."""

    experiment: str
    mesh_sizes: tuple
    layers: tuple
    densities: tuple = (1.03, 1.06)
    fr: tuple = (1.0,)
    cfl: tuple = (1.0,)
    epsilon: float = 1.0
    damping: float = 0.0
    pc: str | None = "wtd-norm"
    inner: str = "exact"
    rtol: float = 1e-5
    cap: int = 500
    amplitude: float = 0.01
    width: float = 0.1
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        for name in ("mesh_sizes", "layers", "fr", "cfl"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be nonempty")
        if any(n < 1 for n in self.mesh_sizes):
            raise ValueError("mesh sizes must be positive")
        if any(n < 1 for n in self.layers):
            raise ValueError("layer counts must be positive")
        if any(v <= 0 for v in self.fr) or any(v <= 0 for v in self.cfl):
            raise ValueError("Fr and CFL values must be positive")
        if len(self.densities) != 2 or not 0 < self.densities[0] < self.densities[1]:
            raise ValueError("densities must be an increasing positive pair")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.damping < 0:
            raise ValueError("damping must be nonnegative")
        if not 0 < self.rtol < 1:
            raise ValueError("rtol must lie in (0, 1)")
        if self.cap < 1:
            raise ValueError("iteration cap must be positive")
        if self.pc is not None and self.pc not in PC_NAMES:
            raise ValueError(f"unknown preconditioner {self.pc!r}")
        if self.inner not in INNER_NAMES:
            raise ValueError(f"unknown inner solver {self.inner!r}")


# experiment-specific defaults applied beneath config file and flags
_DEFAULTS = {
    "fr-sweep": dict(mesh_sizes=(8, 16, 32, 64), layers=(5,),
                     fr=(0.1, 0.5, 1.0, 3.0), cfl=(1.0,), pc="wtd-norm"),
    "cfl-sweep": dict(mesh_sizes=(8, 16, 32, 64), layers=(5,),
                      fr=(1.0,), cfl=(0.5, 1.0, 2.0, 4.0, 20.0),
                      pc="wtd-norm"),
    "layer-sweep": dict(mesh_sizes=(64,), layers=tuple(range(2, 11)),
                        fr=(1.0,), cfl=(2.0,), pc=None),
    "verify": dict(mesh_sizes=(8,), layers=(3, 5), fr=(1.0,), cfl=(1.0,),
                   pc="wtd-norm"),
}

_INT_LIST = ("mesh_sizes", "layers")
_FLOAT_LIST = ("fr", "cfl", "densities")
_FLOATS = ("epsilon", "damping", "rtol", "amplitude", "width")
_INTS = ("cap", "seed")
_STRINGS = ("pc", "inner", "out", "experiment")


def _parse_value(key, raw):
    raw = raw.strip()
    if key in _INT_LIST:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    if key in _FLOAT_LIST:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    if key in _FLOATS:
        return float(raw)
    if key in _INTS:
        return int(raw)
    if key in _STRINGS:
        return None if raw.lower() == "none" else raw
    raise ValueError(f"unknown configuration key {key!r}")


def load_config_file(path):
    """Parse a line-oriented key = value file into a settings dict."""
    settings = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, raw = text.split("=", 1)
            key = key.strip().replace("-", "_")
            settings[key] = _parse_value(key, raw)
    return settings


def build_parser():
    p = argparse.ArgumentParser(
        prog="layertide",
        description="Multilayer rotating shallow-water solver experiments.")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=False,
                   help="sweep or verification mode to run")
    p.add_argument("--config", help="key = value settings file; flags of "
                   "the same name override it")
    p.add_argument("--mesh-sizes", dest="mesh_sizes",
                   help="comma list of cells per side, e.g. 8,16,32,64")
    p.add_argument("--layers", help="comma list of layer counts (a single "
                   "value for fr/cfl sweeps)")
    p.add_argument("--densities", help="density range lo,hi "
                   "(equidistributed; default 1.03,1.06)")
    p.add_argument("--fr", help="comma list of Froude numbers")
    p.add_argument("--cfl", help="comma list of CFL numbers (CFL = dt/h)")
    p.add_argument("--epsilon", help="Rossby number (default 1)")
    p.add_argument("--damping", help="bottom-layer damping (default 0)")
    p.add_argument("--pc", choices=sorted(PC_NAMES),
                   help="preconditioner variant (layer-sweep default: all)")
    p.add_argument("--inner", choices=sorted(INNER_NAMES),
                   help="inner solver for block variants (default exact)")
    p.add_argument("--rtol", help="GMRES relative tolerance (default 1e-5)")
    p.add_argument("--cap", help="GMRES iteration cap (default 500)")
    p.add_argument("--amplitude", help="disturbance height (default 0.01)")
    p.add_argument("--width", help="disturbance width (default 0.1)")
    p.add_argument("--seed", help="rng seed (default 0)")
    p.add_argument("--out", help="output path (default stdout)")
    return p


def resolve_config(argv=None):
    """Merge defaults, optional config file, and flags into a config."""
    args = build_parser().parse_args(argv)
    file_settings = load_config_file(args.config) if args.config else {}

    experiment = args.experiment or file_settings.get("experiment")
    if experiment is None:
        raise SystemExit("an --experiment (or config entry) is required")
    if experiment not in EXPERIMENTS:
        raise SystemExit(f"unknown experiment {experiment!r}")

    settings = dict(_DEFAULTS[experiment])
    settings["experiment"] = experiment
    for key, value in file_settings.items():
        if key != "experiment":
            settings[key] = value
    for key in ("mesh_sizes", "layers", "densities", "fr", "cfl", "epsilon",
                "damping", "pc", "inner", "rtol", "cap", "amplitude",
                "width", "seed", "out"):
        raw = getattr(args, key)
        if raw is not None:
            settings[key] = raw if key in _STRINGS else _parse_value(key, raw)
    try:
        return ExperimentConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"invalid configuration: {exc}")


def _solver_configs(config):
    if config.experiment == "layer-sweep" and config.pc is None:
        return LAYER_SWEEP_CONFIGS
    pc = config.pc or "wtd-norm"
    return ((pc, config.inner),)


def _config_label(pc, inner):
    return pc if pc == "ilu" else f"{pc}-{inner}"


def _sweep_values(config):
    if config.experiment == "fr-sweep":
        return "Fr", config.fr
    if config.experiment == "cfl-sweep":
        return "CFL", config.cfl
    return "layers", config.layers


def _point_settings(config, value):
    """Per-point (n_layers, fr, cfl) for one sweep value."""
    if config.experiment == "fr-sweep":
        return config.layers[0], value, config.cfl[0]
    if config.experiment == "cfl-sweep":
        return config.layers[0], config.fr[0], value
    return int(value), config.fr[0], config.cfl[0]


def run_point(config, mesh_size, n_layers, fr, cfl, pc_name, inner_name):
    """One sweep point: assemble, disturb, take one midpoint step.

    Returns (iterations, converged).
    """
    mesh = build_unit_square_mesh(mesh_size, mesh_size)
    stack = LayerStack.equidistributed(n_layers, *config.densities)
    dt = cfl * mesh.h
    k = 0.5 * dt
    rinv = 1.0 / config.epsilon
    if config.damping > 0:
        params = PhysicalParams.bottom_damping(fr, k, rinv, n_layers,
                                               config.damping)
    else:
        params = PhysicalParams(fr, k, rinv)
    system = assemble_block_system(mesh, stack, params)
    state = initial_disturbance(mesh, stack, config.amplitude, config.width)
    pc = build_preconditioner(system, PC_NAMES[pc_name],
                              INNER_NAMES[inner_name])
    solver = make_solver(system, pc, config.rtol, config.cap,
                         raise_on_failure=False)
    _, report = midpoint_step(system, state, dt, solver)
    return report.iterations, report.converged


def _metadata_lines(config, param_name, values):
    lines = [
        f"# layertide {config.experiment}",
        f"# mesh sizes: {','.join(str(n) for n in config.mesh_sizes)}"
        " (unit square; h = 1/N)",
        "# CFL := dt/h; midpoint step with k = dt/2",
        f"# densities equidistributed in [{config.densities[0]},"
        f" {config.densities[1]}]; flat unit-depth layers",
        f"# epsilon = {config.epsilon}; damping = {config.damping};"
        f" amplitude = {config.amplitude}; width = {config.width}",
        f"# rtol = {config.rtol}; cap = {config.cap}; seed = {config.seed}",
    ]
    if config.experiment == "fr-sweep":
        lines.append(f"# fixed: layers = {config.layers[0]},"
                     f" CFL = {config.cfl[0]}")
    elif config.experiment == "cfl-sweep":
        lines.append(f"# fixed: layers = {config.layers[0]},"
                     f" Fr = {config.fr[0]}")
    else:
        lines.append(f"# fixed: Fr = {config.fr[0]}, epsilon = "
                     f"{config.epsilon} (assumed defaults), CFL = "
                     f"{config.cfl[0]}")
    lines.append(f"# sweep parameter: {param_name} in "
                 f"{','.join(_fmt(v) for v in values)}")
    lines.append("# nonconverged lists sweep values that hit the cap")
    return lines


def _fmt(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


def run_sweep(config, stream):
    """Emit the iteration-count table for the configured sweep."""
    param_name, values = _sweep_values(config)
    configs = _solver_configs(config)
    lines = _metadata_lines(config, param_name, values)
    multi = len(configs) > 1
    header = ["N"] + (["config"] if multi else []) \
        + [_fmt(v) for v in values] + ["nonconverged"]
    lines.append(",".join(header))

    for mesh_size in config.mesh_sizes:
        for pc_name, inner_name in configs:
            counts, failed = [], []
            for value in values:
                n_layers, fr, cfl = _point_settings(config, value)
                its, ok = run_point(config, mesh_size, n_layers, fr, cfl,
                                    pc_name, inner_name)
                counts.append(its)
                if not ok:
                    failed.append(_fmt(value))
            row = [str(mesh_size)]
            if multi:
                row.append(_config_label(pc_name, inner_name))
            row += [str(c) for c in counts] + [";".join(failed)]
            lines.append(",".join(row))
    stream.write("\n".join(lines) + "\n")
    return 0


def _check(lines, ok, label, detail=""):
    tag = "PASS" if ok else "FAIL"
    lines.append(f"{tag}  {label}" + (f"  ({detail})" if detail else ""))
    return ok


def run_verification(config, stream):
    """Identity, bracket, factorization, energy, and window suites."""
    rng = np.random.default_rng(config.seed)
    lines = []
    all_ok = True

    # tridiagonal inverse identity and eigenvalue brackets on random stacks
    worst_inv, worst_ldl, bracket_fail = 0.0, 0.0, None
    for _ in range(200):
        stack = random_admissible_stack(rng)
        n = stack.n_layers
        amat = coupling_matrix(stack)
        cinv = coupling_inverse(stack)
        resid = np.abs(cinv.toarray() @ amat - np.eye(n)).max() / n
        worst_inv = max(worst_inv, resid)
        ldl = ldlt(cinv)
        lmat = ldl.l_toarray()
        recon = lmat @ np.diag(ldl.d) @ lmat.T
        dense = cinv.toarray()
        worst_ldl = max(worst_ldl,
                        np.abs(recon - dense).max() / np.abs(dense).max())
        try:
            spectral_bounds(stack)
        except ValueError as exc:
            bracket_fail = str(exc)
            break
    all_ok &= _check(lines, worst_inv < 1e-12,
                     "tridiagonal inverse identity",
                     f"max |CA - I|/N = {worst_inv:.2e} over 200 stacks")
    all_ok &= _check(lines, worst_ldl < 1e-13, "LDL^T reconstruction",
                     f"max relative entry error {worst_ldl:.2e}")
    all_ok &= _check(lines, bracket_fail is None, "eigenvalue brackets",
                     bracket_fail or "all estimates inside brackets")

    # reformulation identity u'Cv = u~'C~v~ and matching applications
    mesh = build_unit_square_mesh(config.mesh_sizes[0], config.mesh_sizes[0])
    stack = LayerStack.equidistributed(max(config.layers), *config.densities)
    k = 0.5 * config.cfl[0] * mesh.h
    params = PhysicalParams(config.fr[0], k, 1.0 / config.epsilon)
    system = assemble_block_system(mesh, stack, params)
    cmat = weighted_c_matrix(system)
    ctilde, ldl = reform_c_tilde(system)
    nv = system.n_vdofs
    worst = 0.0
    for _ in range(100):
        u = rng.standard_normal(system.n_velocity)
        v = rng.standard_normal(system.n_velocity)
        lhs = u @ cmat.matvec(v)
        rhs = ldl.lkron_solve(u, nv) @ ctilde.matvec(ldl.lkron_solve(v, nv))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    all_ok &= _check(lines, worst < 1e-12, "reformulation identity",
                     f"max relative defect {worst:.2e}")

    p_w = build_preconditioner(system, VARIANT_WEIGHTED, INNER_EXACT)
    p_t = build_preconditioner(system, VARIANT_TRIDIAG, INNER_EXACT)
    worst = 0.0
    for _ in range(20):
        r = rng.standard_normal(system.size)
        a, b = p_w.apply(r), p_t.apply(r)
        worst = max(worst, np.max(np.abs(a - b)) / np.max(np.abs(a)))
    all_ok &= _check(lines, worst < 1e-9, "reformulated application",
                     f"max relative gap {worst:.2e}")

    # energy conservation and damped decay
    ok, detail = _energy_suite(config)
    all_ok &= _check(lines, ok, "midpoint energy behavior", detail)

    # equivalence windows on each configured layer count
    for n_layers in config.layers:
        st = LayerStack.equidistributed(n_layers, *config.densities)
        rep = analysis.verify_chi_window(mesh, st, params, seed=config.seed)
        all_ok &= _check(
            lines, rep.passed, f"equivalence window, {n_layers} layers",
            f"quotients [{rep.quotient_min:.4f}, {rep.quotient_max:.4f}] in "
            f"chi [{rep.chi0:.4f}, {rep.chi1:.4f}] in "
            f"lambda [{rep.lambda_min:.4f}, {rep.lambda_max:.4f}]")

    lines.append("all checks passed" if all_ok else "FAILURES detected")
    stream.write("\n".join(lines) + "\n")
    return 0 if all_ok else 1


def _energy_suite(config, steps=40):
    mesh = build_unit_square_mesh(16, 16)
    stack = LayerStack.equidistributed(3, *config.densities)
    dt = 2.0 * mesh.h
    k = 0.5 * dt

    def drift(params):
        system = assemble_block_system(mesh, stack, params)
        state = initial_disturbance(mesh, stack, config.amplitude,
                                    config.width)
        pc = build_preconditioner(system, VARIANT_WEIGHTED, INNER_EXACT)
        solver = make_solver(system, pc, 1e-12, 2000)
        e0 = energy(state, system)
        energies = [e0]
        for _ in range(steps):
            state, _ = midpoint_step(system, state, dt, solver)
            energies.append(energy(state, system))
        return np.asarray(energies)

    conserved = drift(PhysicalParams(1.0, k, 1.0))
    rel = np.max(np.abs(conserved - conserved[0])) / conserved[0]
    if rel > 1e-9:
        return False, f"undamped relative drift {rel:.2e} exceeds 1e-9"
    damped = drift(PhysicalParams.bottom_damping(1.0, k, 1.0, 3, 0.1))
    if np.any(np.diff(damped) > 1e-14 * damped[0]):
        return False, "damped energy failed to decrease monotonically"
    return True, (f"undamped drift {rel:.2e} over {steps} steps; "
                  "damped run monotone")


def main(argv=None):
    config = resolve_config(argv)
    if config.out:
        with open(config.out, "w") as f:
            if config.experiment == "verify":
                return run_verification(config, f)
            return run_sweep(config, f)
    if config.experiment == "verify":
        return run_verification(config, sys.stdout)
    return run_sweep(config, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
