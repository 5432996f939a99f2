import math

import numpy as np
import pytest

from infoextract import (CapacityExceeded, HcrBasis, InvalidInput, JointDensityModel,
                         SampleTable, conditional_slice, fit_joint, fit_moment_regression,
                         legendre_matrix)
from infoextract import hcr


def _gauss_legendre(n=64):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


def test_basis_closed_forms():
    b = HcrBasis(4)
    assert b(0, 0.3) == 1.0
    assert b(1, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert b(1, 1.0) == pytest.approx(math.sqrt(3))


def test_basis_is_orthonormal_to_degree_8():
    x, w = _gauss_legendre()
    F = legendre_matrix(x, 8)
    np.testing.assert_allclose(F.T @ (w[:, None] * F), np.eye(9), atol=1e-9)


def test_f3_square_integrates_to_one():
    x, w = _gauss_legendre()
    assert np.sum(w * HcrBasis(3)(3, x) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_basis_rejects_points_outside_unit_interval():
    with pytest.raises(InvalidInput):
        HcrBasis(2)(1, 1.2)


def test_constant_coefficient_is_exactly_one(copula07):
    model = fit_joint(copula07, 3)
    assert model.coeffs[0, 0] == 1.0


def test_coefficients_bounded(copula07):
    model = fit_joint(copula07, 4)
    assert np.all(np.abs(model.coeffs) <= 3.0 ** 2)


def test_independent_coefficients_near_zero(rng):
    model = fit_joint(rng.random((100000, 2)), 4)
    off = model.coeffs.copy()
    off[0, 0] = 0
    assert np.max(np.abs(off)) <= 0.02


def test_two_row_example():
    model = fit_joint(np.array([[0.25, 0.25], [0.75, 0.75]]), 1)
    assert model.coeffs[1, 1] == pytest.approx(0.75)


def test_fit_is_order_independent(copula07):
    perm = np.random.default_rng(0).permutation(copula07.n_rows)
    a = fit_joint(copula07.data, 3).coeffs
    b = fit_joint(copula07.data[perm], 3).coeffs
    np.testing.assert_array_equal(a, b)


def test_capacity_cap():
    with pytest.raises(CapacityExceeded):
        fit_joint(np.full((2, 6), 0.5), 9, max_entries=1000)


def test_raw_density_examples():
    uniform = JointDensityModel(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert hcr.eval_raw_density(uniform, [0.3, 0.9]) == pytest.approx(1.0)
    model = JointDensityModel(np.array([[1.0, 0.0], [0.0, 0.75]]))
    assert hcr.eval_raw_density(model, [0.25, 0.25]) == pytest.approx(1.5625)


def test_raw_density_matches_naive_sum(rng):
    coeffs = rng.normal(size=(3, 3, 3)) * 0.1
    coeffs[0, 0, 0] = 1.0
    model = JointDensityModel(coeffs)
    p = rng.random(3)
    b = HcrBasis(2)
    naive = sum(coeffs[i, j, k] * b(i, p[0]) * b(j, p[1]) * b(k, p[2])
                for i in range(3) for j in range(3) for k in range(3))
    assert hcr.eval_raw_density(model, p) == pytest.approx(naive, abs=1e-12)


def test_model_serialization_roundtrip(copula07):
    model = fit_joint(copula07, 2)
    back = JointDensityModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(back.coeffs, model.coeffs)


def test_uniform_slice():
    model = JointDensityModel(np.pad([[1.0]], ((0, 4), (0, 4))))
    d = conditional_slice(model, 0, [0.3], grid_size=1024)
    np.testing.assert_allclose(d.density, 1.0, atol=1e-12)
    np.testing.assert_allclose(d.cumulative, np.arange(1024) / 1023, atol=1e-12)


def test_negative_slice_is_floored():
    # raw slice 1 + c f_1(x) with c chosen so that the minimum is -0.2
    c = 1.2 / math.sqrt(3)
    model = JointDensityModel(np.array([[1.0, 0.0], [c, 0.0]]))
    d = conditional_slice(model, 0, [0.5], grid_size=1024)
    assert d.density.min() == pytest.approx(0.1 / d.Z)
    assert np.all(np.diff(d.cumulative) > 0)


def test_slice_integrates_to_one(copula07):
    model = fit_joint(copula07, 4)
    for y in (0.0, 0.1, 0.5, 0.93, 1.0):
        d = conditional_slice(model, 0, [y])
        dx = 1 / (d.grid.size - 1)
        assert np.sum(0.5 * dx * (d.density[1:] + d.density[:-1])) == pytest.approx(1, abs=1e-9)
        assert d.density.min() >= 0.1 / d.Z - 1e-15


def test_slice_grid_lower_bound():
    with pytest.raises(InvalidInput):
        conditional_slice(JointDensityModel(np.eye(2)), 0, [0.5], grid_size=32)


def test_density_from_coefficients_closed_form():
    d = hcr.density_from_coefficients([1.0, 0.5], 1024)
    assert d.density[-1] == pytest.approx((1 + 0.5 * math.sqrt(3)) / d.Z)
    assert d.Z == pytest.approx(1.0, abs=1e-12)


def test_zero_moments_give_uniform():
    d = hcr.density_from_coefficients([1.0, 0, 0, 0, 0], 256)
    np.testing.assert_allclose(d.density, 1.0)


def test_cdf_and_quantile_are_inverse(copula07):
    model = fit_joint(copula07, 4)
    d = conditional_slice(model, 0, [0.2])
    u = np.linspace(0, 1, 57)
    np.testing.assert_allclose(d.cdf(d.quantile(u)), u, atol=1e-12)


def test_rows_cdf_and_quantile(rng):
    coeffs = np.column_stack([np.ones(200), rng.normal(0, 0.4, (200, 3))])
    x = rng.random(200)
    u = hcr.rows_cdf(coeffs, x)
    np.testing.assert_allclose(hcr.rows_quantile(coeffs, u), x, atol=2 / 1024)


def test_regression_independent_weights_vanish(rng):
    t = SampleTable(["x", "y"], rng.random((100000, 2)))
    model = fit_moment_regression(t, "x", ["y"], 4)
    assert np.max(np.abs(model.weights)) <= 0.05
    assert np.all(np.isfinite(model.predict_moments(rng.random((10, 1)))))


def test_regression_self_information(rng):
    x = rng.random(5000)
    t = SampleTable(["x", "y"], np.column_stack([x, x]))
    model = fit_moment_regression(t, "x", ["y"], 1)
    pred = model.predict_moments(x[:, None])[:, 0]
    assert np.corrcoef(pred, HcrBasis(1)(1, x))[0, 1] >= 0.999


def test_regression_drops_constant_feature(rng):
    t = SampleTable(["x", "y", "c"], np.column_stack([rng.random(500), rng.random(500),
                                                      np.full(500, 0.5)]))
    model = fit_moment_regression(t, "x", ["y", "c"], 3)
    assert model.dropped
    assert np.all(np.isfinite(model.predict_moments(rng.random((5, 2)))))


def test_regression_needs_enough_rows(rng):
    t = SampleTable(["x", "y"], rng.random((4, 2)))
    with pytest.raises(InvalidInput):
        fit_moment_regression(t, "x", ["y"], 4)


def test_regression_agrees_with_joint_slice(copula07):
    joint = fit_joint(copula07.select(["x", "y"]), 4)
    reg = fit_moment_regression(copula07, "x", ["y"], 4)
    ys = np.linspace(0.02, 0.98, 25)
    gaps = []
    for y in ys:
        a = conditional_slice(joint, 0, [y]).density
        cr = reg.row_coefficients(np.array([[y]]))[0]
        b = hcr.density_from_coefficients(cr).density
        gaps.append(np.mean(np.abs(a - b)))
    assert np.mean(gaps) <= 0.1


def test_regression_serialization_roundtrip(copula07):
    reg = fit_moment_regression(copula07, "x", ["y"], 3)
    back = hcr.model_from_dict(reg.to_dict())
    g = np.linspace(0, 1, 9)[:, None]
    np.testing.assert_array_equal(back.row_coefficients(g), reg.row_coefficients(g))
