"""Banded and sparse solves against the longhand dense elimination oracle."""

import numpy as np
import pytest
import scipy.sparse as sp

from cbcfd.linalg import (
    BandedFactor,
    BandedMatrix,
    SolverError,
    SparseFactor,
    SparseMatrix,
    banded_solve,
    dense_oracle_solve,
    sparse_solve,
    sparse_solve_iterative,
)


def _hilbert(n):
    i, j = np.indices((n, n))
    return 1.0 / (i + j + 1.0)


def test_dense_oracle_hilbert():
    # classic frozen value: H4 x = (1,1,1,1) has integer solution
    x = dense_oracle_solve(_hilbert(4), np.ones(4))
    assert np.allclose(x, [-4.0, 60.0, -180.0, 140.0], atol=1e-8)


def test_dense_oracle_identity_and_permutation():
    rhs = np.array([3.0, -1.0, 2.0])
    assert np.allclose(dense_oracle_solve(np.eye(3), rhs), rhs, atol=1e-15)
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    x = dense_oracle_solve(P, rhs)
    assert np.allclose(P @ x, rhs, atol=1e-14)


def test_dense_oracle_singular_names_pivot():
    A = np.eye(4)
    A[:, 2] = 0.0
    with pytest.raises(SolverError, match="singular pivot at index 2"):
        dense_oracle_solve(A, np.ones(4))


def test_banded_identity_and_diagonal():
    n = 6
    I = BandedMatrix.from_sparse(sp.identity(n, format="csr"), kl=0, ku=0)
    rhs = np.arange(1.0, 7.0)
    assert np.allclose(banded_solve(I, rhs), rhs, atol=1e-15)
    D = BandedMatrix.from_sparse(2.0 * sp.identity(n, format="csr"), kl=0, ku=0)
    assert np.allclose(banded_solve(D, np.ones(n)), 0.5, atol=1e-15)


def _random_banded(rng, n, kl, ku):
    dense = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - kl), min(n, i + ku + 1)):
            dense[i, j] = rng.standard_normal()
        dense[i, i] += kl + ku + 3.0  # diagonally dominant
    return dense


def test_banded_solve_matches_oracle():
    rng = np.random.default_rng(21)
    for kl, ku in ((1, 1), (2, 3), (4, 2)):
        dense = _random_banded(rng, 12, kl, ku)
        A = BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=kl, ku=ku)
        rhs = rng.standard_normal(12)
        xb = banded_solve(A, rhs)
        xd = dense_oracle_solve(dense, rhs)
        assert np.max(np.abs(xb - xd)) <= 1e-12 * max(1.0, np.max(np.abs(xd)))


def test_banded_matvec_and_dense_roundtrip():
    rng = np.random.default_rng(22)
    dense = _random_banded(rng, 9, 2, 1)
    A = BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=2, ku=1)
    assert np.allclose(A.to_dense(), dense, atol=1e-15)
    v = rng.standard_normal(9)
    assert np.allclose(A.matvec(v), dense @ v, atol=1e-13)
    assert A.inf_norm() == pytest.approx(np.max(np.abs(dense).sum(axis=1)), rel=1e-14)


def test_from_sparse_rejects_out_of_band():
    dense = np.eye(5)
    dense[0, 4] = 1.0  # far off the declared band
    with pytest.raises(ValueError):
        BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=1, ku=1)


def test_from_sparse_accumulates_duplicates():
    coo = sp.coo_matrix(([1.0, 2.0, 4.0], ([0, 0, 1], [0, 0, 1])), shape=(2, 2))
    A = BandedMatrix.from_sparse(coo, kl=0, ku=0)
    assert A.to_dense()[0, 0] == 3.0


def test_set_entry_out_of_band():
    A = BandedMatrix(4, kl=1, ku=1)
    A.set_entry(2, 1, 5.0)
    with pytest.raises(ValueError):
        A.set_entry(0, 3, 1.0)


def test_banded_singular_names_pivot():
    dense = np.diag([1.0, 1.0, 0.0, 1.0, 1.0])
    A = BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=0, ku=0)
    with pytest.raises(SolverError, match="singular pivot at index 2"):
        banded_solve(A, np.ones(5))


def test_banded_factor_reuse():
    rng = np.random.default_rng(23)
    dense = _random_banded(rng, 10, 2, 2)
    A = BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=2, ku=2)
    fac = BandedFactor(A)
    for _ in range(3):
        rhs = rng.standard_normal(10)
        assert np.allclose(fac.solve(rhs), banded_solve(A, rhs), atol=1e-12)


def test_sparse_solve_matches_oracle():
    rng = np.random.default_rng(24)
    n = 100
    dense = np.zeros((n, n))
    for i in range(n):
        cols = rng.choice(n, size=4, replace=False)
        dense[i, cols] = rng.standard_normal(4)
        dense[i, i] += 8.0
    A = SparseMatrix.from_scipy(sp.csc_matrix(dense))
    rhs = rng.standard_normal(n)
    xs = sparse_solve(A, rhs)
    xd = dense_oracle_solve(dense, rhs)
    assert np.max(np.abs(xs - xd)) <= 1e-11 * max(1.0, np.max(np.abs(xd)))


def test_sparse_singular_names_pivot():
    dense = np.eye(6)
    dense[:, 3] = 0.0
    A = SparseMatrix.from_scipy(sp.csc_matrix(dense))
    with pytest.raises(SolverError, match="singular pivot at index"):
        sparse_solve(A, np.ones(6))


def test_sparse_factor_reuse():
    rng = np.random.default_rng(25)
    dense = _random_banded(rng, 30, 3, 3)
    A = SparseMatrix.from_scipy(sp.csc_matrix(dense))
    fac = SparseFactor(A)
    for _ in range(3):
        rhs = rng.standard_normal(30)
        x = fac.solve(rhs)
        assert np.max(np.abs(dense @ x - rhs)) <= 1e-11 * np.max(np.abs(rhs))


def test_three_route_agreement():
    # the same (small, banded) system through all three solve routes
    rng = np.random.default_rng(26)
    dense = _random_banded(rng, 12, 2, 2)
    rhs = rng.standard_normal(12)
    xd = dense_oracle_solve(dense, rhs)
    xb = banded_solve(BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=2, ku=2), rhs)
    xs = sparse_solve(SparseMatrix.from_scipy(sp.csc_matrix(dense)), rhs)
    assert np.allclose(xb, xd, atol=1e-12)
    assert np.allclose(xs, xd, atol=1e-12)


def test_sparse_iterative_converges():
    # 1D Laplacian: SPD, well conditioned at this size
    n = 40
    main = 2.0 * np.ones(n)
    off = -1.0 * np.ones(n - 1)
    dense = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
    A = SparseMatrix.from_scipy(sp.csc_matrix(dense))
    rhs = np.ones(n)
    x = sparse_solve_iterative(A, rhs)
    resid = np.max(np.abs(dense @ x - rhs))
    assert resid <= 1e-12 * max(1.0, np.max(np.abs(rhs)) + np.max(np.abs(dense)) * np.max(np.abs(x)))


def test_sparse_iterative_reports_failure():
    # a singular system can never reach the required residual; the solver
    # must say so instead of returning garbage
    dense = np.eye(20)
    dense[:, 7] = 0.0
    A = SparseMatrix.from_scipy(sp.csc_matrix(dense))
    with pytest.raises(SolverError, match="converge"):
        sparse_solve_iterative(A, np.ones(20), maxiter=5)


def test_sparse_matrix_duplicates_summed():
    coo = sp.coo_matrix(([1.0, 2.5], ([0, 0], [1, 1])), shape=(3, 3))
    A = SparseMatrix.from_scipy(coo)
    assert A.mat[0, 1] == 3.5


def test_solution_residual_contract():
    # the documented residual bound holds on a well-conditioned solve
    rng = np.random.default_rng(28)
    dense = _random_banded(rng, 20, 2, 2)
    A = BandedMatrix.from_sparse(sp.csr_matrix(dense), kl=2, ku=2)
    rhs = rng.standard_normal(20)
    x = banded_solve(A, rhs)
    resid = np.max(np.abs(A.matvec(x) - rhs))
    bound = 1e-11 * (A.inf_norm() * np.max(np.abs(x)) + np.max(np.abs(rhs)))
    assert resid <= bound
