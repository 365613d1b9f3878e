import numpy as np
import pytest

from layertide import (CsrMatrix, SolveFailure, direct_factor, gmres,
                       make_solver)


class _DenseOp:
    def __init__(self, a):
        self.a = a

    def matvec(self, x):
        return self.a @ x


class _DenseInv:
    def __init__(self, a):
        self.inv = np.linalg.inv(a)

    def apply(self, r):
        return self.inv @ r


def test_two_by_two_oracle():
    """Hand-worked example: one orthogonalization step already solves it."""
    a = np.array([[2.0, 0.0], [0.0, 4.0]])
    b = np.array([1.0, 2.0])
    x, report = gmres(_DenseOp(a), None, b, rtol=1e-12)
    assert np.allclose(x, [0.5, 0.5])
    assert report.converged
    # two distinct eigenvalues: exact termination after two steps
    assert report.iterations == 2


def test_exact_preconditioner_converges_immediately():
    rng = np.random.default_rng(30)
    a = rng.standard_normal((40, 40)) + 10 * np.eye(40)
    b = rng.standard_normal(40)
    x, report = gmres(_DenseOp(a), _DenseInv(a), b, rtol=1e-10)
    assert report.iterations == 1
    assert np.allclose(a @ x, b, atol=1e-8)


def test_unpreconditioned_dense_system():
    rng = np.random.default_rng(31)
    a = rng.standard_normal((60, 60)) + 12 * np.eye(60)
    b = rng.standard_normal(60)
    x, report = gmres(_DenseOp(a), None, b, rtol=1e-10)
    assert np.linalg.norm(a @ x - b) <= 1e-9 * np.linalg.norm(b)
    assert report.achieved_rtol <= 1e-10
    assert len(report.residual_history) == report.iterations + 1


def test_finite_termination():
    """Unrestarted GMRES solves an n-dimensional system in at most n steps."""
    rng = np.random.default_rng(32)
    a = rng.standard_normal((25, 25))
    a += 25 * np.eye(25)
    b = rng.standard_normal(25)
    _, report = gmres(_DenseOp(a), None, b, rtol=1e-13, maxit=25)
    assert report.converged
    assert report.iterations <= 25


def test_zero_rhs():
    a = np.eye(3)
    x, report = gmres(_DenseOp(a), None, np.zeros(3))
    assert np.array_equal(x, np.zeros(3))
    assert report.iterations == 0
    assert report.converged


def test_residual_history_monotone():
    rng = np.random.default_rng(33)
    a = rng.standard_normal((30, 30)) + 8 * np.eye(30)
    b = rng.standard_normal(30)
    _, report = gmres(_DenseOp(a), None, b, rtol=1e-12)
    hist = np.array(report.residual_history)
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])


def test_right_preconditioning_reports_true_residual():
    """The reported relative residual is the unpreconditioned one."""
    rng = np.random.default_rng(34)
    a = rng.standard_normal((20, 20)) + 6 * np.eye(20)
    m = np.diag(np.diag(a))
    b = rng.standard_normal(20)
    x, report = gmres(_DenseOp(a), _DenseInv(m), b, rtol=1e-9)
    true_rel = np.linalg.norm(a @ x - b) / np.linalg.norm(b)
    assert true_rel <= 1e-9
    assert report.achieved_rtol == pytest.approx(true_rel, rel=1e-6)


def test_rtol_validation():
    a = np.eye(2)
    with pytest.raises(ValueError):
        gmres(_DenseOp(a), None, np.ones(2), rtol=0.0)
    with pytest.raises(ValueError):
        gmres(_DenseOp(a), None, np.ones(2), rtol=1.5)


def test_cap_raises_through_make_solver():
    rng = np.random.default_rng(35)
    a = rng.standard_normal((50, 50)) + 2 * np.eye(50)
    b = rng.standard_normal(50)
    solver = make_solver(_DenseOp(a), None, rtol=1e-14, maxit=3)
    with pytest.raises(SolveFailure) as info:
        solver(b)
    assert info.value.report.iterations == 3
    assert not info.value.report.converged
    assert info.value.best is not None


def test_cap_reported_without_raise():
    rng = np.random.default_rng(36)
    a = rng.standard_normal((50, 50)) + 2 * np.eye(50)
    b = rng.standard_normal(50)
    solver = make_solver(_DenseOp(a), None, rtol=1e-14, maxit=3,
                         raise_on_failure=False)
    x, report = solver(b)
    assert report.iterations == 3
    assert not report.converged
    assert x.shape == b.shape


def test_sparse_operator_and_factor_pc():
    rng = np.random.default_rng(37)
    dense = rng.standard_normal((35, 35))
    dense[np.abs(dense) < 1.0] = 0.0
    np.fill_diagonal(dense, 40.0)
    m = CsrMatrix.from_dense(dense)
    pc = direct_factor(m)

    class _Pc:
        def apply(self, r):
            return pc.solve(r)

    b = rng.standard_normal(35)
    x, report = gmres(m, _Pc(), b, rtol=1e-11)
    assert report.iterations == 1
    assert np.allclose(m.matvec(x), b, atol=1e-9)
