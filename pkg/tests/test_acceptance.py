"""Acceptance gate for the layertide solver.

Each test verifies one numbered acceptance criterion at its stated tolerance
and prints exactly one PASS/FAIL line (visible in the pytest summary under
``-rA``).  The iteration-count criteria share cached sweep points so every
sparse factorization runs once.
"""

import functools
import time

import numpy as np

from layertide import (
    INNER_EXACT,
    LayerStack,
    PhysicalParams,
    VARIANT_TRIDIAG,
    VARIANT_WEIGHTED,
    analysis,
    assemble_block_system,
    build_preconditioner,
    build_unit_square_mesh,
    cli,
    coupling_inverse,
    coupling_matrix,
    energy,
    initial_disturbance,
    ldlt,
    make_solver,
    midpoint_step,
    random_admissible_stack,
    reform_c_tilde,
    spectral_bounds,
    weighted_c_matrix,
)

FR_VALUES = (0.1, 0.5, 1.0, 3.0)
FR_MESHES = (8, 16, 32, 64)
LAYER_RANGE = tuple(range(2, 11))
LAYER_POINTS = (2, 6, 10)


def _report(num, name, ok, detail=""):
    line = f"criterion {num} [{name}]: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


@functools.lru_cache(maxsize=1)
def _random_stacks():
    rng = np.random.default_rng(2026)
    return tuple(random_admissible_stack(rng) for _ in range(1000))


_SWEEP_BASE = cli.resolve_config(["--experiment", "fr-sweep"])


@functools.lru_cache(maxsize=None)
def _counts(mesh_size, n_layers, fr, cfl, pc, inner):
    """One cached sweep point; returns (iterations, converged)."""
    return cli.run_point(_SWEEP_BASE, mesh_size, n_layers, fr, cfl, pc, inner)


def test_criterion_1_exact_inverse_identity():
    start = time.perf_counter()
    worst = 0.0
    for stack in _random_stacks():
        n = stack.n_layers
        prod = coupling_inverse(stack).toarray() @ coupling_matrix(stack)
        worst = max(worst, np.abs(prod - np.eye(n)).max() / n)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and elapsed < 5.0
    _report(1, "exact-inverse identity", ok,
            f"max |CA - I|/N = {worst:.2e} over 1000 stacks, N in [1, 50], "
            f"{elapsed:.2f} s")


def test_criterion_2_spectral_brackets():
    stacks = _random_stacks()
    start = time.perf_counter()
    violations = []
    for i, stack in enumerate(stacks):
        try:
            sb = spectral_bounds(stack)
        except ValueError as exc:
            violations.append(f"stack {i}: {exc}")
            continue
        lo, hi = sb.bracket_max
        if not lo * (1 - 1e-12) <= sb.lambda_max <= hi * (1 + 1e-12):
            violations.append(
                f"stack {i}: lambda_1 = {sb.lambda_max} outside [{lo}, {hi}]")
        if stack.n_layers >= 2:
            blo, bhi = sb.bracket_min
            if sb.lambda_min < blo * (1 - 1e-12):
                violations.append(
                    f"stack {i}: lambda_N = {sb.lambda_min} below {blo}")
            if stack.n_layers >= 5 and sb.lambda_min > bhi * (1 + 1e-12):
                violations.append(
                    f"stack {i}: lambda_N = {sb.lambda_min} above {bhi}")
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 30.0
    _report(2, "spectral brackets", ok,
            violations[0] if violations else
            f"0 violations over 1000 stacks, {elapsed:.2f} s")


def test_criterion_3_ldlt_and_reformulation():
    # (a) per-entry LDL^T reconstruction on the acceptance stacks
    worst_ldl = 0.0
    example = LayerStack(np.array([1.0, 2.0, 3.0]), np.ones(3), strict=False)
    for stack in (example, LayerStack.equidistributed(3),
                  LayerStack.equidistributed(5)):
        cinv = coupling_inverse(stack)
        ldl = ldlt(cinv)
        lmat = ldl.l_toarray()
        recon = lmat @ np.diag(ldl.d) @ lmat.T
        worst_ldl = max(worst_ldl, np.abs(recon - cinv.toarray()).max())

    # (b) congruence identity u'Cv = u~'C~v~, 100 random pairs, mesh 8, N = 5
    mesh = build_unit_square_mesh(8, 8)
    stack = LayerStack.equidistributed(5)
    params = PhysicalParams(1.0, 0.5 * mesh.h, 1.0)
    system = assemble_block_system(mesh, stack, params)
    cmat = weighted_c_matrix(system)
    ctilde, ldl = reform_c_tilde(system)
    nv = system.n_vdofs
    rng = np.random.default_rng(7)
    worst_id = 0.0
    for _ in range(100):
        u = rng.standard_normal(system.n_velocity)
        v = rng.standard_normal(system.n_velocity)
        cv = cmat.matvec(v)
        lhs = u @ cv
        rhs = ldl.lkron_solve(u, nv) @ ctilde.matvec(ldl.lkron_solve(v, nv))
        worst_id = max(worst_id,
                       abs(lhs - rhs) / (np.linalg.norm(u)
                                         * np.linalg.norm(cv)))

    # (c) tridiagonal-reformulation and weighted-norm exact applications agree
    p_w = build_preconditioner(system, VARIANT_WEIGHTED, INNER_EXACT)
    p_t = build_preconditioner(system, VARIANT_TRIDIAG, INNER_EXACT)
    worst_app = 0.0
    for _ in range(20):
        r = rng.standard_normal(system.size)
        a = p_w.apply(r)
        gap = np.max(np.abs(a - p_t.apply(r))) / np.max(np.abs(a))
        worst_app = max(worst_app, gap)

    ok = worst_ldl < 1e-13 and worst_id < 1e-12 and worst_app < 1e-9
    _report(3, "LDLT and reformulation", ok,
            f"LDL entry error {worst_ldl:.1e} < 1e-13; identity defect "
            f"{worst_id:.1e} < 1e-12; application gap {worst_app:.1e} < 1e-9")


def test_criterion_4_equivalence_windows():
    mesh = build_unit_square_mesh(8, 8)
    params = PhysicalParams(1.0, 0.5 * mesh.h, 1.0)
    details = []
    ok = True
    for n_layers in (3, 5):
        stack = LayerStack.equidistributed(n_layers)
        rep = analysis.verify_chi_window(mesh, stack, params, seed=4)
        good = (rep.passed
                and rep.lambda_min <= rep.quotient_min
                and rep.quotient_max <= rep.lambda_max
                and rep.chi0 <= rep.quotient_min
                and rep.quotient_max <= rep.chi1
                and rep.chi1 < rep.lambda_max)
        ok = ok and good
        details.append(
            f"{n_layers} layers: quotients [{rep.quotient_min:.4f}, "
            f"{rep.quotient_max:.4f}] in chi [{rep.chi0:.4f}, {rep.chi1:.4f}]"
            f" in lambda [{rep.lambda_min:.4f}, {rep.lambda_max:.4f}]")
    _report(4, "equivalence windows", ok, "; ".join(details))


def test_criterion_5_infsup_continuity():
    mesh = build_unit_square_mesh(4, 4)
    stack = LayerStack.equidistributed(3)
    k = 0.5 * mesh.h
    configs = (
        PhysicalParams(1.0, k, 1.0),
        PhysicalParams.bottom_damping(1.0, k, 1.0, 3, 0.5),
        # strong rotation and damping so the constant exceeds the floor of 2
        PhysicalParams.bottom_damping(1.0, 0.5, 4.0, 3, 1.0),
    )
    ok = True
    min_ratio, max_cont, constants = np.inf, 0.0, []
    for params in configs:
        system = assemble_block_system(mesh, stack, params)
        rep = analysis.verify_infsup_continuity(system, trials=500, seed=5)
        ok = ok and rep.passed
        ok = ok and rep.min_infsup_ratio >= rep.infsup_floor - 1e-12
        min_ratio = min(min_ratio, rep.min_infsup_ratio)
        max_cont = max(max_cont, rep.max_continuity_ratio)
        constants.append(rep.continuity_constant)
    ok = ok and constants[0] == 2.0 and constants[2] > 2.0
    _report(5, "inf-sup and continuity", ok,
            f"500 trials x {len(configs)} configs: continuity ratio "
            f"{max_cont:.3f} <= 1 with C = {[f'{c:g}' for c in constants]}; "
            f"inf-sup ratio {min_ratio:.4f} >= 1/(2*sqrt(3)) - 1e-12")


def test_criterion_6_energy_conservation():
    mesh = build_unit_square_mesh(16, 16)
    stack = LayerStack.equidistributed(3)
    dt = 2.0 * mesh.h
    k = 0.5 * dt

    def run(params):
        system = assemble_block_system(mesh, stack, params)
        state = initial_disturbance(mesh, stack, 0.01, 0.1)
        pc = build_preconditioner(system, VARIANT_WEIGHTED, INNER_EXACT)
        solver = make_solver(system, pc, 1e-12, 2000)
        energies = [energy(state, system)]
        for _ in range(100):
            state, _ = midpoint_step(system, state, dt, solver)
            energies.append(energy(state, system))
        return np.asarray(energies)

    conserved = run(PhysicalParams(1.0, k, 1.0))
    drift = np.max(np.abs(conserved - conserved[0])) / conserved[0]
    damped = run(PhysicalParams.bottom_damping(1.0, k, 1.0, 3, 0.1))
    monotone = bool(np.all(np.diff(damped) <= 1e-14 * damped[0]))
    ok = drift < 1e-9 and monotone
    _report(6, "energy conservation", ok,
            f"relative drift {drift:.2e} < 1e-9 over 100 steps; damped run "
            + ("monotone nonincreasing" if monotone else "NOT monotone"))


def test_criterion_7_preconditioner_quality():
    start = time.perf_counter()
    counts = {}
    fails = []
    for fr in FR_VALUES:
        for mesh_size in FR_MESHES:
            its, converged = _counts(mesh_size, 5, fr, 1.0,
                                     "wtd-norm", "exact")
            counts[(mesh_size, fr)] = its
            if not converged:
                fails.append(f"Fr = {fr:g}, mesh {mesh_size}: hit the cap")
    for fr in FR_VALUES:
        if counts[(64, fr)] > counts[(16, fr)] + 2:
            fails.append(f"Fr = {fr:g}: mesh-64 count {counts[(64, fr)]} "
                         f"exceeds mesh-16 count {counts[(16, fr)]} + 2")
    worst = max(counts.values())
    if worst > 16:
        fails.append(f"max count {worst} > 16")
    elapsed = time.perf_counter() - start
    if elapsed >= 600.0:
        fails.append(f"runtime {elapsed:.0f} s >= 600 s")
    table = "; ".join(
        f"Fr {fr:g}: " + "/".join(str(counts[(m, fr)]) for m in FR_MESHES)
        for fr in FR_VALUES)
    _report(7, "preconditioner quality", not fails,
            fails[0] if fails else
            f"counts over meshes 8/16/32/64 -- {table}; max {worst} <= 16; "
            f"{elapsed:.0f} s")


def test_criterion_8_layer_robustness():
    counts = [_counts(64, n, 1.0, 2.0, "wtd-norm", "exact")[0]
              for n in LAYER_RANGE]
    spread = max(counts) - min(counts)
    ok = spread <= 3
    _report(8, "layer robustness", ok,
            f"mesh 64, dt = 0.03125, layers 2-10: counts {counts}, "
            f"spread {spread} <= 3")


def test_criterion_9_ordering_sanity():
    fails = []
    points = [(m, 5, fr, 1.0) for fr in FR_VALUES for m in FR_MESHES]
    points += [(64, n, 1.0, 2.0) for n in LAYER_POINTS]
    for mesh_size, n_layers, fr, cfl in points:
        w = _counts(mesh_size, n_layers, fr, cfl, "wtd-norm", "exact")[0]
        wi = _counts(mesh_size, n_layers, fr, cfl, "wtd-norm", "ilu0")[0]
        d = _counts(mesh_size, n_layers, fr, cfl,
                    "layer-decoupled", "exact")[0]
        tag = f"mesh {mesh_size}, {n_layers} layers, Fr {fr:g}, CFL {cfl:g}"
        if w > wi:
            fails.append(f"{tag}: weighted exact {w} > weighted ilu0 {wi}")
        if w > d:
            fails.append(f"{tag}: weighted exact {w} > decoupled {d}")

    # the decoupled-cost ratio is a layer-sweep statement; check it there
    ratios = []
    for n_layers in LAYER_POINTS:
        w = _counts(64, n_layers, 1.0, 2.0, "wtd-norm", "exact")[0]
        d = _counts(64, n_layers, 1.0, 2.0, "layer-decoupled", "exact")[0]
        ratios.append(d / w)
        if d > 4 * w:
            fails.append(f"{n_layers} layers: decoupled {d} > 4 x "
                         f"weighted {w}")
    _report(9, "ordering sanity", not fails,
            fails[0] if fails else
            f"orderings hold at all {len(points)} points; decoupled/weighted "
            f"ratios {[f'{r:.2f}' for r in ratios]} <= 4")
