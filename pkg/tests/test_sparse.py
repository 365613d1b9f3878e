import numpy as np
import pytest

from layertide import (CsrMatrix, SingularMatrixError, ZeroPivotError,
                       direct_factor, ilu0_factor, read_matrix_market, spmv,
                       write_matrix_market)
from layertide.sparse import block_csr


def _random_sparse(rng, n, density=0.3):
    dense = rng.standard_normal((n, n))
    dense[rng.random((n, n)) > density] = 0.0
    np.fill_diagonal(dense, rng.uniform(2.0, 3.0, n) * n)
    return dense


def test_from_coo_sums_duplicates():
    rows = np.array([0, 0, 1, 0])
    cols = np.array([1, 1, 0, 2])
    vals = np.array([2.0, 3.0, 4.0, 5.0])
    m = CsrMatrix.from_coo(2, 3, rows, cols, vals)
    assert m.toarray().tolist() == [[0.0, 5.0, 5.0], [4.0, 0.0, 0.0]]


def test_matvec_matches_dense():
    rng = np.random.default_rng(3)
    dense = _random_sparse(rng, 40)
    m = CsrMatrix.from_dense(dense)
    x = rng.standard_normal(40)
    assert np.allclose(m.matvec(x), dense @ x)
    assert np.allclose(spmv(m, x), dense @ x)


def test_transpose_add_scaled():
    rng = np.random.default_rng(4)
    a = _random_sparse(rng, 15)
    b = _random_sparse(rng, 15)
    ma, mb = CsrMatrix.from_dense(a), CsrMatrix.from_dense(b)
    assert np.allclose(ma.transpose().toarray(), a.T)
    assert np.allclose(ma.add(mb).toarray(), a + b)
    assert np.allclose(ma.scaled(-2.5).toarray(), -2.5 * a)


def test_add_same_pattern_fast_path():
    rng = np.random.default_rng(5)
    a = _random_sparse(rng, 10)
    ma = CsrMatrix.from_dense(a)
    mb = ma.with_values(2.0 * ma.values)
    out = ma.add(mb)
    assert out.same_pattern(ma)
    assert np.allclose(out.toarray(), 3.0 * a)


def test_identity_diagonal():
    eye = CsrMatrix.identity(4)
    assert np.allclose(eye.toarray(), np.eye(4))
    d = CsrMatrix.from_diagonal(np.array([1.0, 2.0, 3.0]))
    assert np.allclose(d.diagonal(), [1.0, 2.0, 3.0])


def test_block_csr_layout():
    a = CsrMatrix.from_dense(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = CsrMatrix.from_dense(np.array([[5.0], [6.0]]))
    grid = [[a, b], [None, CsrMatrix.identity(1)]]
    m = block_csr(grid, [2, 1], [2, 1])
    expected = np.array([[1, 2, 5], [3, 4, 6], [0, 0, 1.0]])
    assert np.allclose(m.toarray(), expected)


def test_ilu0_exact_on_tridiagonal():
    """Without fill the incomplete factorization is the exact one."""
    n = 25
    main = np.full(n, 4.0)
    off = np.full(n - 1, -1.0)
    dense = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    m = CsrMatrix.from_dense(dense)
    factors = ilu0_factor(m)
    rng = np.random.default_rng(0)
    b = rng.standard_normal(n)
    assert np.allclose(factors.apply(b), np.linalg.solve(dense, b))


def test_ilu0_approximates():
    rng = np.random.default_rng(7)
    dense = _random_sparse(rng, 30)
    m = CsrMatrix.from_dense(dense)
    factors = ilu0_factor(m)
    b = rng.standard_normal(30)
    x = factors.apply(b)
    assert np.linalg.norm(dense @ x - b) < 0.5 * np.linalg.norm(b)


def test_ilu0_zero_pivot():
    dense = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ZeroPivotError):
        ilu0_factor(CsrMatrix.from_dense(dense))


def test_direct_factor_solves():
    rng = np.random.default_rng(8)
    dense = _random_sparse(rng, 50)
    b = rng.standard_normal(50)
    x = direct_factor(CsrMatrix.from_dense(dense)).solve(b)
    assert np.allclose(dense @ x, b)


def test_direct_factor_singular():
    dense = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        direct_factor(CsrMatrix.from_dense(dense))


def test_matrix_market_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    dense = _random_sparse(rng, 12)
    m = CsrMatrix.from_dense(dense)
    path = tmp_path / "m.mtx"
    write_matrix_market(m, path)
    back = read_matrix_market(path)
    assert np.allclose(back.toarray(), dense)


def test_validation_rejects_bad_shapes():
    with pytest.raises(ValueError):
        CsrMatrix(2, 2, np.array([0, 1]), np.array([0]), np.array([1.0]))
    with pytest.raises(ValueError):
        CsrMatrix(1, 1, np.array([0, 1]), np.array([5]), np.array([1.0]))
    m = CsrMatrix.identity(3)
    with pytest.raises(ValueError):
        m.matvec(np.zeros(4))
