import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcselect.data_model import (
    Dataset,
    StructuralError,
    categorical_covariate,
    distance_matrix,
    functional_covariate,
    pairwise_distance,
    rmspe,
    scalar_covariate,
    trapezoid_weights,
    vector_covariate,
)

from conftest import random_covariate


def test_scalar_distance():
    c = scalar_covariate("a", [3.0, 7.0])
    assert pairwise_distance(c, 0, 1) == 4.0


def test_categorical_distance_two_values():
    c = categorical_covariate("g", ["a", "b", "a"])
    assert pairwise_distance(c, 0, 2) == 0.0
    assert pairwise_distance(c, 0, 1) == pytest.approx(math.sqrt(2.0), abs=0.0)
    d = distance_matrix(c)
    assert set(np.round(np.unique(d), 12)) <= {0.0, round(math.sqrt(2.0), 12)}


def test_functional_distance_constant_curves():
    grid = np.linspace(0.0, 1.0, 11)
    c = functional_covariate("f", grid, np.vstack([np.ones(11), np.zeros(11)]))
    assert pairwise_distance(c, 0, 1) == pytest.approx(1.0, abs=1e-12)


def test_functional_distance_quadrature_convergence():
    # || t - 0 ||_2 = 1/sqrt(3); trapezoid error shrinks as O(h^2)
    target = 1.0 / math.sqrt(3.0)
    errors = []
    for npts in (11, 101, 1001):
        grid = np.linspace(0.0, 1.0, npts)
        c = functional_covariate("f", grid, np.vstack([grid, np.zeros(npts)]))
        errors.append(abs(pairwise_distance(c, 0, 1) - target))
    assert errors[0] > errors[1] > errors[2]
    # a ten-fold finer grid should shrink the O(h^2) error by ~100x
    assert errors[1] < errors[0] / 50.0
    assert errors[2] < errors[1] / 50.0
    assert errors[2] < 5e-7


def test_trapezoid_weights_sum_to_range():
    grid = np.array([0.0, 0.1, 0.4, 1.0])
    w = trapezoid_weights(grid)
    assert w.sum() == pytest.approx(1.0)
    with pytest.raises(StructuralError):
        trapezoid_weights(np.array([0.0, 0.0, 1.0]))


@pytest.mark.parametrize("kind", ["scalar", "vector", "categorical", "functional"])
def test_distance_metric_properties(rng, kind):
    c = random_covariate(rng, kind, 12)
    d = distance_matrix(c)
    assert np.allclose(np.diag(d), 0.0, atol=1e-12)
    assert np.allclose(d, d.T, atol=1e-12)
    # triangle inequality over every triple
    for i in range(12):
        for j in range(12):
            for k in range(12):
                assert d[i, j] <= d[i, k] + d[k, j] + 1e-9
    # embedding agrees with the per-pair definition
    for i in range(12):
        for j in range(12):
            assert d[i, j] == pytest.approx(pairwise_distance(c, i, j), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20))
def test_scalar_triangle_inequality_hypothesis(values):
    c = scalar_covariate("x", values)
    d = distance_matrix(c)
    n = len(values)
    for i in range(n):
        for j in range(n):
            assert d[i, j] == pytest.approx(d[j, i])
            assert d[i, j] <= d[i, 0] + d[0, j] + 1e-6 * (1.0 + d[i, j])


def test_rmspe_examples():
    assert rmspe([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert rmspe([0.0, 0.0], [1.0, -1.0]) == pytest.approx(1.0)
    assert rmspe([2.0, 4.0, 6.0], [1.0, 4.0, 8.0]) == pytest.approx(math.sqrt(5.0 / 3.0))
    with pytest.raises(ValueError):
        rmspe([], [])
    with pytest.raises(ValueError):
        rmspe([1.0], [1.0, 2.0])


def test_missing_values_rejected():
    with pytest.raises(StructuralError):
        scalar_covariate("x", [1.0, float("nan")])
    with pytest.raises(StructuralError):
        functional_covariate("f", [0.0, 1.0], [[1.0, float("inf")]])


def test_functional_grid_validation():
    with pytest.raises(StructuralError):
        functional_covariate("f", [0.0], [[1.0]])
    with pytest.raises(StructuralError):
        functional_covariate("f", [1.0, 0.0], [[1.0, 2.0]])
    with pytest.raises(StructuralError):
        functional_covariate("f", [0.0, 1.0], [[1.0, 2.0, 3.0]])


def test_categorical_validation():
    with pytest.raises(StructuralError):
        categorical_covariate("g", ["a", "a"], levels=["a"])
    with pytest.raises(StructuralError):
        categorical_covariate("g", ["a", "c"], levels=["a", "b"])


def test_dataset_validation():
    y = scalar_covariate("Y", [1.0, 2.0, 3.0])
    z = scalar_covariate("Z", [1.0, 2.0, 3.0])
    data = Dataset(y, (z,))
    assert data.n == 3 and data.candidate_names == ["Z"]
    with pytest.raises(StructuralError):
        Dataset(y, (scalar_covariate("Z", [1.0, 2.0]),))
    with pytest.raises(StructuralError):
        Dataset(y, (z, scalar_covariate("Z", [0.0, 0.0, 0.0])))
    with pytest.raises(StructuralError):
        Dataset(categorical_covariate("Y", ["a", "b", "c"]), (z,))
    with pytest.raises(KeyError):
        data.candidate("missing")


def test_covariates_are_immutable():
    c = scalar_covariate("x", [1.0, 2.0])
    with pytest.raises(ValueError):
        c.values[0] = 5.0


def test_vector_covariate_shape():
    c = vector_covariate("v", [[1.0, 2.0], [3.0, 4.0]])
    assert c.feature_matrix().shape == (2, 2)
    with pytest.raises(StructuralError):
        vector_covariate("v", [1.0, 2.0])
