import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from driftbridge.exceptions import DimensionMismatchError, InvalidParameterError, NotPositiveDefiniteError
from driftbridge.numerics import (
    SampleSet,
    cholesky_factor,
    default_jitter,
    make_rng,
    pairwise_power_distances,
    squared_distances,
)
from oracles import euclid


def test_identical_points_have_zero_distance():
    np.testing.assert_array_equal(pairwise_power_distances([[0.0]], [[0.0]], 2), [[0.0]])


def test_one_dimensional_absolute_differences():
    np.testing.assert_array_equal(pairwise_power_distances([[0.0], [3.0]], [[4.0]], 1), [[4.0], [1.0]])


def test_three_four_five():
    np.testing.assert_allclose(pairwise_power_distances([[0.0, 0.0]], [[3.0, 4.0]], 2), [[25.0]], rtol=1e-15)


def test_distances_match_scalar_loop(rng):
    X = rng.normal(size=(7, 4))
    Y = rng.normal(size=(5, 4))
    for p in (0.5, 1.0, 2.0, 3.0):
        D = pairwise_power_distances(X, Y, p)
        ref = np.array([[euclid(x, y) ** p for y in Y] for x in X])
        np.testing.assert_allclose(D, ref, rtol=1e-12, atol=1e-14)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        pairwise_power_distances(np.zeros((2, 3)), np.zeros((2, 2)), 2)


def test_nonpositive_exponent():
    with pytest.raises(InvalidParameterError):
        pairwise_power_distances([[0.0]], [[1.0]], 0)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 5)), elements=st.floats(-1e3, 1e3)),
    st.sampled_from([0.5, 1.0, 2.0, 3.0]),
)
def test_self_distances_symmetric_zero_diagonal(x, p):
    D = pairwise_power_distances(x, x, p)
    assert np.all(np.diag(D) == 0.0)
    assert np.all(D >= 0.0)
    np.testing.assert_allclose(D, D.T, rtol=1e-12, atol=1e-12)


def test_sampleset_validation():
    s = SampleSet([1.0, 2.0, 3.0])
    assert (s.n, s.d) == (3, 1)
    np.testing.assert_allclose(s.weights, 1 / 3)
    with pytest.raises(ValueError):
        s.points[0, 0] = 5.0
    with pytest.raises(InvalidParameterError):
        SampleSet(np.array([[np.nan]]))
    with pytest.raises(InvalidParameterError):
        SampleSet(np.zeros((0, 2)))
    with pytest.raises(InvalidParameterError):
        SampleSet([[0.0], [1.0]], weights=[0.7, 0.7])


def test_cholesky_scalar():
    np.testing.assert_allclose(cholesky_factor([[4.0]]), [[2.0]])


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky_factor(np.eye(3)), np.eye(3))


def test_cholesky_two_by_two():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    R = cholesky_factor(A)
    assert np.allclose(np.tril(R, -1), 0.0)
    np.testing.assert_allclose(R.T @ R, A, atol=1e-12)


def test_cholesky_jitter_and_errors():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_factor(A - 1e-3 * np.eye(2))
    R = cholesky_factor(A, jitter=None)
    np.testing.assert_allclose(R.T @ R, A + default_jitter(A) * np.eye(2), rtol=1e-12)
    with pytest.raises(InvalidParameterError):
        cholesky_factor([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DimensionMismatchError):
        cholesky_factor(np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_cholesky_reconstruction_random_spd(n, seed):
    g = np.random.default_rng(seed)
    B = g.normal(size=(n, n))
    A = B @ B.T + n * np.eye(n)
    R = cholesky_factor(A)
    assert np.linalg.norm(R.T @ R - A) / np.linalg.norm(A) < 1e-8


def test_rng_streams_are_addressable():
    a = make_rng(7, 3).random(5)
    _ = [make_rng(7, i).random() for i in range(3)]
    np.testing.assert_array_equal(a, make_rng(7, 3).random(5))
    assert not np.array_equal(make_rng(7, 3).random(5), make_rng(7, 4).random(5))
    assert not np.array_equal(make_rng(7).random(5), make_rng(8).random(5))


def test_squared_distances_accept_sampleset(rng):
    X = rng.normal(size=(4, 2))
    np.testing.assert_array_equal(squared_distances(SampleSet(X), X), squared_distances(X, X))
