import numpy as np
import pytest

from layertide import (INFSUP_FLOOR, LayerStack, PhysicalParams,
                       assemble_block_system, build_unit_square_mesh,
                       continuity_constant, measure_inverse_constant,
                       verify_chi_window, verify_infsup_continuity)
from layertide.analysis import TheoryReport


def _setup(mesh_n, n_layers, k=None, damping=0.0):
    mesh = build_unit_square_mesh(mesh_n, mesh_n)
    stack = LayerStack.equidistributed(n_layers)
    k = 0.5 * mesh.h if k is None else k
    if damping > 0:
        params = PhysicalParams.bottom_damping(1.0, k, 1.0, n_layers, damping)
    else:
        params = PhysicalParams(1.0, k, 1.0)
    return mesh, stack, params


def test_inverse_constant_roughly_mesh_independent():
    """C_I absorbs the 1/h factor, so it stabilizes under refinement."""
    values = []
    for n in (4, 8, 16):
        mesh = build_unit_square_mesh(n, n)
        values.append(measure_inverse_constant(mesh,
                                               LayerStack.equidistributed(3)))
    values = np.array(values)
    assert np.all(values > 0)
    assert values.max() / values.min() < 1.3


def test_inverse_constant_bounds_divergence():
    """Random velocities obey ||div u|| <= (C_I/h) ||u||_M."""
    mesh, stack, params = _setup(8, 3)
    system = assemble_block_system(mesh, stack, params)
    c_i = measure_inverse_constant(mesh, stack)
    rng = np.random.default_rng(50)
    inv_areas = 1.0 / system.single.cell_areas
    for _ in range(50):
        u = rng.standard_normal(system.n_velocity)
        div_sq = 0.0
        for ub in u.reshape(system.n_layers, -1):
            d = system.single.div.matvec(ub) * inv_areas
            div_sq += d @ (system.single.cell_areas * d)
        norm_sq = u @ system.mass_v.matvec(u)
        assert div_sq <= (c_i / mesh.h) ** 2 * norm_sq * (1 + 1e-9)


def test_continuity_constant_formula():
    mesh, stack, params = _setup(4, 3, k=0.25, damping=0.5)
    system = assemble_block_system(mesh, stack, params)
    mu_min = stack.mu.min()
    expected = max(2.0, 1.0 + 0.25 + 0.25 * 0.5 / mu_min)
    assert continuity_constant(system) == pytest.approx(expected)


def test_infsup_continuity_passes():
    mesh, stack, params = _setup(4, 3)
    system = assemble_block_system(mesh, stack, params)
    report = verify_infsup_continuity(system, trials=100, seed=7)
    assert report.passed
    assert report.min_infsup_ratio >= INFSUP_FLOOR - 1e-12
    assert report.max_continuity_ratio <= report.continuity_constant


def test_infsup_continuity_with_damping():
    mesh, stack, params = _setup(4, 3, damping=0.3)
    system = assemble_block_system(mesh, stack, params)
    report = verify_infsup_continuity(system, trials=100, seed=8)
    assert report.passed


def test_chi_window_brackets_quotients():
    mesh, stack, params = _setup(8, 3)
    report = verify_chi_window(mesh, stack, params, n_samples=25, seed=9)
    assert report.passed
    assert report.lambda_min <= report.chi0 <= report.quotient_min
    assert report.quotient_max <= report.chi1 <= report.lambda_max
    assert report.chi1 < report.lambda_max
    h2, q2 = mesh.h ** 2, report.q ** 2
    assert report.chi0 >= h2 / (q2 + h2) * (1 - 1e-12)


def test_chi_window_single_layer():
    """One layer: divergence-free directions give quotient one, so the
    window runs from one up to the chi bound below the density."""
    mesh, stack, params = _setup(4, 1)
    report = verify_chi_window(mesh, stack, params, n_samples=5, seed=10,
                               eig_tol=1e-8, eig_maxit=100_000)
    assert report.lambda_min == report.lambda_max == stack.densities[0]
    assert report.chi0 == 1.0
    assert 1.0 < report.chi1 < stack.densities[0]
    assert report.passed


def test_window_narrows_with_small_timestep():
    """As k shrinks, q shrinks and the window collapses toward 1."""
    mesh = build_unit_square_mesh(8, 8)
    stack = LayerStack.equidistributed(3)
    widths = []
    for k in (0.5, 0.05, 0.005):
        rep = verify_chi_window(mesh, stack, PhysicalParams(1.0, k, 1.0),
                                n_samples=5, seed=11, eig_tol=1e-8,
                                eig_maxit=100_000)
        widths.append(rep.chi1 - rep.chi0)
        assert rep.passed
    assert widths[0] > widths[1] > widths[2]


def test_report_summary_and_failures():
    report = TheoryReport()
    report.checks["alpha"] = True
    report.checks["beta"] = False
    text = report.summary()
    assert "PASS  alpha" in text
    assert "FAIL  beta" in text
    assert not report.passed
    report.checks["beta"] = True
    report.failures.append("trial 3 oddity")
    assert not report.passed
