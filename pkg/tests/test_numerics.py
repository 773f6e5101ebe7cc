import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from conftest import random_sym
from dgode.errors import DiagonalizabilityError, ShapeError, SymmetryError
from dgode.numerics import (general_eig, mat_exp, mat_log_clamped, mat_pow_int,
                            mat_power_real, sym_eig)


def test_identity_eigenvalues():
    es = sym_eig(np.eye(3))
    np.testing.assert_allclose(es.values, [1, 1, 1])
    np.testing.assert_allclose(es.vectors @ es.vectors.T, np.eye(3), atol=1e-14)


def test_swap_matrix():
    np.testing.assert_allclose(sym_eig([[0, 1], [1, 0]]).values, [-1, 1], atol=1e-14)


def test_random_5x5_reconstructs(rng):
    m = random_sym(rng, 5)
    es = sym_eig(m)
    assert es.reconstruction_error(m) < 1e-9
    np.testing.assert_allclose(es.values, np.linalg.eigvalsh(m), atol=1e-12)
    np.testing.assert_allclose(es.vectors @ es.inverse, np.eye(5), atol=1e-12)


def test_values_sorted_and_match_lapack_at_64(rng):
    m = random_sym(rng, 64)
    es = sym_eig(m)
    assert np.all(np.diff(es.values) >= 0)
    assert es.reconstruction_error(m) < 1e-9
    np.testing.assert_allclose(es.values, sla.eigh(m, eigvals_only=True), atol=1e-10)


def test_asymmetric_rejected():
    with pytest.raises(SymmetryError):
        sym_eig([[0.0, 1.0], [0.0, 0.0]])


def test_nonsquare_rejected():
    with pytest.raises(ShapeError):
        sym_eig(np.zeros((2, 3)))


def test_general_eig_diagonal():
    np.testing.assert_allclose(general_eig(np.diag([2.0, 3.0])).values, [2, 3])


def test_general_eig_spd_at_least_one(rng):
    m = rng.normal(size=(4, 4))
    assert np.all(general_eig(m.T @ m + np.eye(4)).values >= 1 - 1e-12)


def test_general_eig_nonsymmetric_diagonalizable():
    m = np.array([[2.0, 1.0], [0.0, 3.0]])
    es = general_eig(m)
    np.testing.assert_allclose(es.values, [2, 3])
    assert es.reconstruction_error(m) < 1e-12


def test_rotation_rejected():
    with pytest.raises(DiagonalizabilityError):
        general_eig([[0.0, -1.0], [1.0, 0.0]])


def test_defective_rejected():
    with pytest.raises(DiagonalizabilityError):
        general_eig([[1.0, 1.0], [0.0, 1.0]])


def test_pow_int_cases(rng):
    m = rng.normal(size=(3, 3))
    np.testing.assert_array_equal(mat_pow_int(m, 0), np.eye(3))
    np.testing.assert_array_equal(mat_pow_int([[2.0]], 10), [[1024.0]])
    s = random_sym(rng, 4)
    es = np.linalg.eigh(s)
    oracle = (es[1] * es[0] ** 5) @ es[1].T
    np.testing.assert_allclose(mat_pow_int(s, 5), oracle, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(mat_pow_int(m, 7), np.linalg.matrix_power(m, 7), rtol=1e-12)


def test_mat_exp_cases(rng):
    np.testing.assert_allclose(mat_exp(np.zeros((3, 3)), 2.5), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(mat_exp(np.diag([1.0, 2.0])), np.diag([2.71828, 7.38906]),
                               atol=1e-5)
    m = random_sym(rng, 4)
    series, term = np.eye(4), np.eye(4)
    for k in range(1, 31):
        term = term @ (0.5 * m) / k
        series = series + term
    np.testing.assert_allclose(mat_exp(m, 0.5), series, atol=1e-9)
    np.testing.assert_allclose(mat_exp(m, 0.5), sla.expm(0.5 * m), atol=1e-11)


def test_mat_log_cases():
    np.testing.assert_allclose(mat_log_clamped(np.eye(3)), np.zeros((3, 3)), atol=1e-15)
    np.testing.assert_allclose(mat_log_clamped([[2.0]]), [[0.693147]], atol=1e-6)
    m = np.array([[0.5, 0.5], [0.5, 0.5]])  # eigenvalues 0 and 1
    vals = np.linalg.eigvalsh(mat_log_clamped(m, 1e-6))
    np.testing.assert_allclose(sorted(vals), [np.log(1e-6), 0.0], atol=1e-9)


def test_fractional_power_matches_scipy(rng):
    m = random_sym(rng, 5, 0.1, 2.0)
    np.testing.assert_allclose(mat_power_real(m, 0.37), sla.fractional_matrix_power(m, 0.37).real,
                               rtol=1e-9, atol=1e-12)


sizes = st.integers(1, 8)
seeds = st.integers(0, 2**31 - 1)


@given(sizes, seeds)
def test_exp_log_round_trip(n, seed):
    m = random_sym(np.random.default_rng(seed), n, 1e-6, 10.0)
    np.testing.assert_allclose(mat_exp(mat_log_clamped(m, 1e-6), 1.0), m, atol=1e-8 * 10)


@given(sizes, seeds, st.floats(-1, 1), st.floats(-1, 1))
def test_exp_semigroup(n, seed, s, t):
    m = random_sym(np.random.default_rng(seed), n)
    np.testing.assert_allclose(mat_exp(m, s + t), mat_exp(m, s) @ mat_exp(m, t),
                               rtol=1e-8, atol=1e-8)


@given(sizes, seeds, st.integers(0, 6))
def test_pow_int_matches_exp_log(n, seed, k):
    m = random_sym(np.random.default_rng(seed), n, 1e-3, 2.0)
    np.testing.assert_allclose(mat_pow_int(m, k), mat_exp(mat_log_clamped(m, 1e-6), k),
                               rtol=1e-7, atol=1e-7)


@given(st.integers(1, 24), seeds)
def test_reconstruction_property(n, seed):
    m = random_sym(np.random.default_rng(seed), n)
    es = sym_eig(m)
    assert es.reconstruction_error(m) < 1e-9
    np.testing.assert_allclose(es.values, np.linalg.eigvalsh(m), atol=1e-10 * max(1, np.abs(m).max()))
