import math

import numpy as np
import pytest
from scipy import optimize

from greedy_opt.experiments import gen_example
from greedy_opt.inner_solvers import (SolverError, minimize_full, minimize_plane, minimize_ray,
                                      minimize_scalar, minimize_subspace, soft_threshold)
from greedy_opt.objectives import Composite, ShiftedPNorm


def _grid_min(f, lo, hi, n):
    grid = np.linspace(lo, hi, n)
    vals = np.array([f(t) for t in grid])
    return grid, vals


@pytest.mark.parametrize("f,expected", [(lambda t: (t - 2.0) ** 2, 2.0),
                                        (lambda t: abs(t - 1.0) ** 3, 1.0)])
def test_scalar_examples(f, expected):
    res = minimize_scalar(f, 0.0, 1.0, 1e-10)
    assert res.argmin == pytest.approx(expected, abs=1e-4)
    assert res.min_value == f(res.argmin)
    assert res.min_value <= min(f(0.0), f(1.0))


def test_scalar_boundary_and_whole_line():
    assert minimize_scalar(lambda t: (t + 3.0) ** 2, 0.0, 1.0).argmin == 0.0
    res = minimize_scalar(lambda t: (t + 3.0) ** 2, -math.inf, 1.0, start=5.0)
    assert res.argmin == pytest.approx(-3.0, abs=1e-4)


def test_scalar_errors():
    with pytest.raises(SolverError):
        minimize_scalar(lambda t: -t, 0.0, 1.0)
    with pytest.raises(SolverError):
        minimize_scalar(lambda t: math.nan, 0.0, 1.0)
    with pytest.raises(ValueError):
        minimize_scalar(lambda t: t * t, 0.0, 1.0, tol=0.0)


def _ray_instance(seed=0):
    dic, obj, _ = gen_example(1, seed, dim=50, natoms=100, support=20)
    rng = np.random.default_rng(seed)
    base = 0.3 * dic.atoms[rng.permutation(100)[:5]].sum(axis=0)
    grad = dic.atoms @ obj.gradient(base)
    phi = -np.sign(grad[np.argmax(np.abs(grad))]) * dic.atoms[np.argmax(np.abs(grad))]
    return obj, base, phi


def test_scalar_matches_dense_grid_on_line_search():
    obj, base, phi = _ray_instance()
    f = lambda t: obj.value(base + t * phi)  # noqa: E731
    res = minimize_scalar(f, 0.0, 1.0, 1e-10)
    # bracket the minimizer, then scan it with 10^6 points
    hi = max(1.0, 4.0 * res.argmin)
    grid = np.linspace(0.0, hi, 10 ** 6)
    vals = obj.value_rows(base + grid[:, None] * phi)
    assert res.min_value <= vals.min() + 1e-8


def test_ray_examples():
    rng = np.random.default_rng(1)
    f = rng.standard_normal(6)
    res = minimize_ray(ShiftedPNorm(f, 2), np.zeros(6), f)
    assert res.argmin == pytest.approx(1.0, abs=1e-8)
    assert res.min_value == pytest.approx(0.0, abs=1e-14)
    # a direction with <-E'(base), dir> <= 0 gives no improvement
    obj = ShiftedPNorm(f, 2)
    res = minimize_ray(obj, np.zeros(6), -f)
    assert res.argmin == 0.0
    assert res.min_value == obj.value(np.zeros(6))
    with pytest.raises(ValueError):
        minimize_ray(obj, np.zeros(6), np.zeros(6))


def test_ray_matches_grid():
    for seed in range(3):
        obj, base, phi = _ray_instance(seed)
        res = minimize_ray(obj, base, phi)
        grid = np.linspace(0.0, max(1.0, 4.0 * res.argmin), 10 ** 5)
        assert res.min_value <= obj.value_rows(base + grid[:, None] * phi).min() + 1e-8
        assert res.min_value == pytest.approx(obj.value(base + res.argmin * phi), rel=1e-12)


def test_restricted_ray_stays_in_unit_interval():
    f = np.array([3.0, 0.0])
    res = minimize_ray(ShiftedPNorm(f, 2), np.zeros(2), np.array([1.0, 0.0]), restricted=True)
    assert res.argmin == pytest.approx(1.0, abs=1e-12)


def test_plane_with_zero_g_is_line_search():
    rng = np.random.default_rng(2)
    f = rng.standard_normal(5)
    obj = ShiftedPNorm(f, 1.5)
    phi = np.abs(rng.standard_normal(5))
    phi /= phi.sum()
    plane = minimize_plane(obj, np.zeros(5), phi)
    line = minimize_scalar(lambda t: obj.value(t * phi), -math.inf, 1.0)
    assert plane.min_value == pytest.approx(line.min_value, rel=1e-9)


@pytest.mark.parametrize("method", ["newton", "sweeps"])
def test_plane_hits_zero_when_target_in_span(method):
    rng = np.random.default_rng(3)
    G, phi = rng.standard_normal((2, 8))
    obj = ShiftedPNorm(0.7 * G - 1.3 * phi, 2)
    res = minimize_plane(obj, G, phi, method=method)
    omega, lam = res.argmin
    assert res.min_value == pytest.approx(0.0, abs=1e-10)
    assert (omega, lam) == pytest.approx((0.3, -1.3), abs=1e-5)


def test_plane_not_worse_than_grid_or_ray():
    obj, base, phi = _ray_instance(4)
    res = minimize_plane(obj, base, phi)
    omega, lam = res.argmin
    om = np.linspace(omega - 1.0, omega + 1.0, 512)
    la = np.linspace(lam - 1.0, lam + 1.0, 512)
    W, L = np.meshgrid(om, la, indexing="ij")
    pts = (1.0 - W.ravel())[:, None] * base + L.ravel()[:, None] * phi
    assert res.min_value <= obj.value_rows(pts).min() + 1e-6
    assert res.min_value <= minimize_ray(obj, base, phi).min_value + 1e-12
    assert res.min_value == pytest.approx(obj.value((1 - omega) * base + lam * phi), rel=1e-12)


def test_subspace_single_atom():
    f = np.array([2.5, -1.0, 0.5])
    res = minimize_subspace(ShiftedPNorm(f, 2), np.eye(3)[:1])
    assert res.argmin[0] == pytest.approx(2.5, abs=1e-12)
    assert res.converged


def test_subspace_full_basis_reaches_infimum():
    rng = np.random.default_rng(5)
    obj = ShiftedPNorm(rng.standard_normal(6), 3)
    res = minimize_subspace(obj, np.eye(6))
    assert res.min_value == pytest.approx(0.0, abs=1e-10)


def test_subspace_matches_high_accuracy_oracle():
    dic, obj, _ = gen_example(2, 0, dim=20, natoms=40)
    atoms = dic.atoms[[3, 7, 11, 19, 30]]
    res = minimize_subspace(obj, atoms)
    assert res.converged
    grad_k = atoms @ obj.gradient(res.argmin @ atoms)
    assert np.max(np.abs(grad_k)) <= 1e-8
    oracle = optimize.minimize(lambda c: obj.value(c @ atoms), np.zeros(5),
                               jac=lambda c: atoms @ obj.gradient(c @ atoms),
                               method="BFGS", options={"gtol": 1e-10, "maxiter": 100000})
    assert res.min_value <= oracle.fun + 1e-7 * max(1.0, abs(oracle.fun))
    assert res.min_value == pytest.approx(obj.value(res.argmin @ atoms), rel=1e-12)


def test_subspace_tolerates_redundant_atoms():
    f = np.array([1.0, 2.0, 0.0])
    atoms = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]])
    res = minimize_subspace(ShiftedPNorm(f, 2), atoms)
    assert res.min_value == pytest.approx(0.0, abs=1e-12)


def test_subspace_cap_reports_unconverged():
    obj = ShiftedPNorm(np.array([1.0, -2.0, 3.0]), 1.2)
    res = minimize_subspace(obj, np.eye(3) * 0.5 + 0.1, max_iters=1)
    assert not res.converged
    assert res.min_value == pytest.approx(obj.value(res.argmin @ (np.eye(3) * 0.5 + 0.1)),
                                          rel=1e-12)


def test_full_minimizer_examples():
    f = np.array([0.5, -1.5])
    res = minimize_full(ShiftedPNorm(f, 1.2))
    np.testing.assert_array_equal(res.argmin, f)
    assert res.min_value == 0.0
    comp = Composite(f, 3, f, 1.5)
    res = minimize_full(comp)
    np.testing.assert_allclose(res.argmin, f, atol=1e-6)
    assert res.min_value == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        minimize_full(comp, dim=3)


def test_full_minimizer_is_separable_on_example_four():
    _, obj, _ = gen_example(4, 0, dim=200)
    res = minimize_full(obj)
    a = obj.g_qq
    b = obj.f_pp
    total = 0.0
    for fi, gi in zip(obj.f, obj.g):
        lo, hi = min(fi, gi), max(fi, gi)
        one = optimize.minimize_scalar(
            lambda t: a * abs(t - fi) ** obj.p + b * abs(t - gi) ** obj.q,
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        total += one.fun
    assert res.min_value == pytest.approx(total, rel=1e-9)


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([3.0, -1.0, 0.5], 1.0), [2.0, 0.0, 0.0])
    v = np.array([0.3, -2.0, 7.0])
    np.testing.assert_array_equal(soft_threshold(v, 0.0), v)
    with pytest.raises(ValueError):
        soft_threshold(v, -1.0)


def test_soft_threshold_is_scalar_prox():
    rng = np.random.default_rng(6)
    grid = np.linspace(-6.0, 6.0, 120001)
    for v, kappa in zip(rng.standard_normal(20) * 2, rng.uniform(0, 2, 20)):
        vals = 0.5 * (grid - v) ** 2 + kappa * np.abs(grid)
        assert soft_threshold([v], kappa)[0] == pytest.approx(grid[np.argmin(vals)], abs=1e-4)
