import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsad.errors import EmptySampleSet, NoConvergence, NotSymmetric, SingularAfterRidge, TooFewSamples
from hsad.stats import (CovarianceMatrix, covariance, fix_eigenvector_signs, jacobi_eigen, mean_vector,
                        regularized_inverse, symmetric_eigen)


def test_mean_examples():
    assert mean_vector([[1, 2], [3, 4]]).tolist() == [2, 3]
    assert mean_vector([[1.5, -2.0]]).tolist() == [1.5, -2.0]
    x = np.random.default_rng(0).normal(size=(50, 6))
    assert np.max(np.abs(mean_vector(x - mean_vector(x)))) < 1e-12
    with pytest.raises(EmptySampleSet):
        mean_vector(np.zeros((0, 3)))


def test_covariance_examples():
    c = covariance([[1, 0], [-1, 0]], [0, 0])
    assert c.entries.tolist() == [[1, 0], [0, 0]] and c.ridge_applied == 0
    assert not covariance(np.ones((5, 3))).entries.any()
    with pytest.raises(TooFewSamples):
        covariance([[1.0, 2.0]])


def test_covariance_double_loop_oracle():
    x = np.random.default_rng(1).normal(size=(30, 5))
    mu = x.mean(axis=0)
    ref = np.zeros((5, 5))
    for i in range(5):
        for j in range(5):
            ref[i, j] = sum((x[k, i] - mu[i]) * (x[k, j] - mu[j]) for k in range(30)) / 30
    c = covariance(x, mu).entries
    assert np.max(np.abs(c - ref)) < 1e-12
    assert np.array_equal(c, c.T)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
def test_covariance_is_psd(n, dim, seed):
    x = np.random.default_rng(seed).normal(size=(n, dim)) * 10.0 ** np.random.default_rng(seed).integers(-3, 3)
    c = covariance(x).entries
    assert np.linalg.eigvalsh(c).min() >= -1e-10 * max(1.0, np.trace(c))


def test_regularized_inverse_examples():
    assert np.array_equal(regularized_inverse(np.eye(3), 0.0).entries, np.eye(3))
    assert np.allclose(regularized_inverse(np.diag([2.0, 4.0]), 0.0).entries, np.diag([0.5, 0.25]), atol=1e-15)
    singular = np.ones((2, 2))
    inv = regularized_inverse(singular, 1e-6)
    delta = 1e-6 * 2 / 2
    assert inv.ridge_applied == pytest.approx(delta)
    loaded = np.array([[1 + delta, 1], [1, 1 + delta]])
    # closed-form 2x2 inverse
    det = (1 + delta) ** 2 - 1
    closed = np.array([[1 + delta, -1], [-1, 1 + delta]]) / det
    assert np.max(np.abs(inv.entries - closed)) / np.max(np.abs(closed)) < 1e-6
    assert np.max(np.abs(loaded @ inv.entries - np.eye(2))) < 1e-6


def test_regularized_inverse_failures():
    with pytest.raises(SingularAfterRidge):
        regularized_inverse(np.zeros((3, 3)), 1e-6)
    with pytest.raises(SingularAfterRidge):
        regularized_inverse(np.diag([1.0, -1.0]), 0.0)
    with pytest.raises(ValueError):
        regularized_inverse(np.eye(2), -1.0)


@pytest.mark.parametrize("size", [1, 2, 5, 16, 32])
def test_regularized_inverse_identity_residual(size):
    rng = np.random.default_rng(size)
    a = rng.normal(size=(size, max(1, size // 2)))
    c = a @ a.T  # rank deficient for size > 1
    inv = regularized_inverse(c, 1e-6)
    loaded = c + inv.ridge_applied * np.eye(size)
    assert np.max(np.abs(loaded @ inv.entries - np.eye(size))) < 1e-6


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_eigen_hand_examples(method):
    e = symmetric_eigen(np.diag([1.0, 3.0]), method)
    assert e.values.tolist() == [3.0, 1.0]
    assert np.array_equal(np.abs(e.vectors), [[0, 1], [1, 0]])
    e = symmetric_eigen([[2.0, 1.0], [1.0, 2.0]], method)
    assert np.allclose(e.values, [3, 1], atol=1e-14)
    s = 1 / np.sqrt(2)
    assert np.allclose(e.vectors[:, 0], [s, s], atol=1e-14)
    assert np.allclose(np.abs(e.vectors[:, 1]), [s, s], atol=1e-14)
    assert np.allclose(e.vectors[:, 1] * np.sign(e.vectors[0, 1]), [s, -s], atol=1e-14)


@pytest.mark.parametrize("size", [1, 2, 3, 8, 17, 32])
@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_eigen_postconditions(size, method):
    rng = np.random.default_rng(100 + size)
    b = rng.normal(size=(size, size))
    a = (b + b.T) / 2
    e = symmetric_eigen(a, method)
    scale = max(1.0, np.max(np.abs(a)))
    assert np.max(np.abs(e.vectors @ np.diag(e.values) @ e.vectors.T - a)) < 1e-8 * scale
    assert abs(e.values.sum() - np.trace(a)) < 1e-8 * scale
    assert np.max(np.abs(e.vectors.T @ e.vectors - np.eye(size))) < 1e-10
    assert np.all(np.diff(e.values) <= 0)
    for i in range(size):
        v = e.vectors[:, i]
        assert v[np.argmax(np.abs(v))] > 0
        assert np.max(np.abs(a @ v - e.values[i] * v)) < 1e-8 * scale


def test_jacobi_agrees_with_lapack():
    rng = np.random.default_rng(7)
    b = rng.normal(size=(12, 12))
    a = b + b.T
    j = symmetric_eigen(a, "jacobi")
    l = symmetric_eigen(a, "lapack")
    assert np.max(np.abs(j.values - l.values)) < 1e-10
    assert np.max(np.abs(j.vectors - l.vectors)) < 1e-8


def test_eigen_is_deterministic():
    b = np.random.default_rng(5).normal(size=(9, 9))
    a = b @ b.T
    e1, e2 = symmetric_eigen(a), symmetric_eigen(a)
    assert np.array_equal(e1.values, e2.values) and np.array_equal(e1.vectors, e2.vectors)


def test_eigen_errors():
    with pytest.raises(NotSymmetric):
        symmetric_eigen([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NotSymmetric):
        symmetric_eigen(np.ones((2, 3)))
    with pytest.raises(ValueError):
        symmetric_eigen(np.eye(2), "qr")
    b = np.random.default_rng(0).normal(size=(10, 10))
    with pytest.raises(NoConvergence):
        jacobi_eigen(b + b.T, max_sweeps=1)


def test_sign_convention_ties_take_first():
    v = np.array([[-0.5, 0.6], [0.5, -0.8]])
    fixed = fix_eigenvector_signs(v)
    assert fixed[:, 0].tolist() == [0.5, -0.5]
    assert fixed[:, 1].tolist() == [-0.6, 0.8]


def test_covariance_matrix_wrapper_accepted():
    c = CovarianceMatrix(np.diag([4.0, 1.0]))
    assert np.allclose(regularized_inverse(c, 0.0).entries, np.diag([0.25, 1.0]))
