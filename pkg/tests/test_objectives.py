import numpy as np
import pytest

from greedy_opt.experiments import gen_example
from greedy_opt.objectives import (Composite, ObjectiveSpec, ShiftedPNorm, SmoothnessProfile,
                                   estimate_modulus, grad_check, gradient, power_type_bound,
                                   value)

# 40-digit evaluation of the composite form at a fixed point (mpmath oracle)
F3 = [0.3, -1.2, 0.5]
G3 = [1.0, 0.25, -0.7]
X3 = [0.1, 0.2, -0.3]
COMPOSITE_VALUE = 8.3443350717612964321
COMPOSITE_GRAD = [-2.4299110468519859745, 9.5874884340661936915, -1.6569974259513315882]


def test_shifted_values():
    f = np.array([1.0, 1.0])
    obj = ShiftedPNorm(f, 2)
    assert value(obj, f) == 0.0
    assert value(obj, np.zeros(2)) == 2.0
    np.testing.assert_array_equal(gradient(obj, f), np.zeros(2))
    np.testing.assert_allclose(ShiftedPNorm([0.0, 0.0], 1.2).gradient(np.array([1.0, 0.0])),
                               [1.2, 0.0], rtol=1e-15)


def test_composite_against_high_precision_oracle():
    obj = Composite(F3, 3, G3, 1.2)
    assert obj.value(np.array(X3)) == pytest.approx(COMPOSITE_VALUE, rel=1e-14)
    np.testing.assert_allclose(obj.gradient(np.array(X3)), COMPOSITE_GRAD, rtol=1e-13)


def test_composite_against_termwise_recomputation():
    rng = np.random.default_rng(4)
    f, g, x = rng.standard_normal((3, 12))
    obj = Composite(f, 3, g, 1.2)
    t1 = sum(abs(a - b) ** 3 for a, b in zip(x, f)) * sum(abs(b) ** 1.2 for b in g)
    t2 = sum(abs(a - b) ** 1.2 for a, b in zip(x, g)) * sum(abs(b) ** 3 for b in f)
    assert obj.value(x) == pytest.approx(t1 + t2, rel=1e-13)


def test_construction_errors():
    with pytest.raises(ValueError):
        ShiftedPNorm([1.0], 1.0)
    with pytest.raises(ValueError):
        Composite([1.0], 2.0, [1.0], 0.9)
    with pytest.raises(ValueError):
        Composite([1.0, 2.0], 2.0, [1.0], 2.0)
    obj = ShiftedPNorm([1.0, 2.0], 2)
    with pytest.raises(ValueError):
        obj.value(np.zeros(3))
    with pytest.raises(ValueError):
        obj.gradient(np.zeros(1))


def test_round_trip_descriptor():
    for obj in (ShiftedPNorm([1.0, -2.0], 1.2), Composite(F3, 4, G3, 1.5)):
        back = ObjectiveSpec.from_dict(obj.to_dict())
        x = np.array([0.3, 0.1, 0.7])[:obj.dim]
        assert back.value(x) == obj.value(x)
    with pytest.raises(ValueError):
        ObjectiveSpec.from_dict({"kind": "huber"})


def test_value_rows_matches_value():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((7, 5))
    for obj in (ShiftedPNorm(rng.standard_normal(5), 1.2),
                Composite(rng.standard_normal(5), 7, rng.standard_normal(5), 3)):
        np.testing.assert_allclose(obj.value_rows(X), [obj.value(x) for x in X], rtol=1e-14)


def test_grad_check_examples():
    rng = np.random.default_rng(1)
    quad = ShiftedPNorm(rng.standard_normal(6), 2)
    assert grad_check(quad, rng.standard_normal(6), h=1e-5) <= 1e-8
    _, obj, _ = gen_example(2, 0, dim=30, natoms=60)
    assert grad_check(obj, 0.1 * rng.standard_normal(30)) <= 1e-5
    p12 = ShiftedPNorm(rng.standard_normal(4), 1.2)
    assert np.isfinite(grad_check(p12, p12.f.copy()))
    with pytest.raises(ValueError):
        grad_check(p12, p12.f, h=0.0)


def test_gradient_is_zero_exactly_at_kink_free_minimum():
    obj = ShiftedPNorm([0.5, -0.25], 1.2)
    g = obj.gradient(np.array([0.5, -0.25]))
    assert np.all(g == 0.0) and np.all(np.isfinite(g))


def test_hessian_diag_matches_gradient_differences():
    rng = np.random.default_rng(2)
    obj = Composite(rng.standard_normal(5), 4, rng.standard_normal(5), 1.5)
    x = rng.standard_normal(5)
    h = 1e-6
    fd = [(obj.gradient(x + h * e)[i] - obj.gradient(x - h * e)[i]) / (2 * h)
          for i, e in enumerate(np.eye(5))]
    np.testing.assert_allclose(obj.hessian_diag(x), fd, rtol=1e-6)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0, 3.0, 7.0])
def test_sampled_convexity_and_first_order_bound(p):
    rng = np.random.default_rng(int(p * 10))
    obj = ShiftedPNorm(rng.standard_normal(8), p)
    for _ in range(200):
        x, y = rng.standard_normal((2, 8))
        lam = rng.uniform()
        assert obj.value(lam * x + (1 - lam) * y) <= (lam * obj.value(x)
                                                      + (1 - lam) * obj.value(y) + 1e-10)
        assert obj.value(y) - obj.value(x) - obj.gradient(x) @ (y - x) >= -1e-10


def test_zero_gradient_only_at_minimizer():
    rng = np.random.default_rng(8)
    obj = Composite(rng.standard_normal(4), 3, rng.standard_normal(4), 1.2)
    x = obj.f.copy()
    assert np.linalg.norm(obj.gradient(x)) > 0
    # a point with nonzero gradient is beaten by a small step along -gradient
    step = 1e-4 * obj.gradient(x) / np.linalg.norm(obj.gradient(x))
    assert obj.value(x - step) < obj.value(x)


@pytest.mark.parametrize("p,expected", [(1.2, (1.2, 1 / 1.2)), (2.0, (2.0, 0.5)),
                                        (7.0, (2.0, 3.0)), (1.0, (1.0, 1.0))])
def test_power_type_bound_table(p, expected):
    prof = power_type_bound(p)
    assert (prof.q_power, prof.gamma) == pytest.approx(expected, rel=1e-15)


def test_power_type_bound_rejects_small_p():
    with pytest.raises(ValueError):
        power_type_bound(0.9)


def test_smoothness_profile():
    prof = SmoothnessProfile(1.5, 2.0)
    assert prof.dual_exponent == pytest.approx(3.0)
    assert prof.bound(4.0) == pytest.approx(16.0)


def test_modulus_of_quadratic_is_u_squared():
    rng = np.random.default_rng(0)
    obj = ShiftedPNorm(rng.standard_normal(6), 2)
    for u in (0.1, 1.0, 3.0):
        assert estimate_modulus(obj, [rng.standard_normal(6)], u) == pytest.approx(u * u,
                                                                                   rel=1e-12)
    with pytest.raises(ValueError):
        estimate_modulus(obj, [np.zeros(6)], 0.0)
    with pytest.raises(ValueError):
        estimate_modulus(obj, [], 1.0)


@pytest.mark.parametrize("ex", [1, 2, 3, 4])
def test_modulus_is_o_of_u(ex):
    _, obj, _ = gen_example(ex, 0, dim=20, natoms=40)
    rng = np.random.default_rng(1)
    pts = [0.1 * rng.standard_normal(20) for _ in range(3)]
    ratios = [estimate_modulus(obj, pts, u) / u for u in (1e-2, 1e-3, 1e-4)]
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 0.1 * ratios[0]


def test_modulus_uses_random_directions_in_high_dimension():
    obj = ShiftedPNorm(np.zeros(100), 2)
    # random unit-l1 directions only: the estimate stays below the axis value u^2
    est = estimate_modulus(obj, [np.zeros(100)], 1.0, seed=3)
    assert 0 < est < 1.0


def test_modulus_can_exceed_gamma_u_q_by_factor_two():
    # along a coordinate through the minimizer the half second difference is u^p,
    # i.e. p * gamma * u^p; the table value gamma u^q alone is not an upper bound
    for p in (1.2, 2.0):
        obj = ShiftedPNorm(np.zeros(3), p)
        prof = power_type_bound(p)
        est = estimate_modulus(obj, [np.zeros(3)], 0.5)
        assert est == pytest.approx(0.5 ** p, rel=1e-14)
        assert prof.bound(0.5) < est <= 2 * prof.bound(0.5)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0])
def test_modulus_within_twice_power_type_bound_globally(p):
    rng = np.random.default_rng(5)
    obj = ShiftedPNorm(rng.standard_normal(10), p)
    prof = power_type_bound(p)
    pts = [3 * rng.standard_normal(10) for _ in range(5)] + [obj.f.copy()]
    # absolute slack covers cancellation in the second difference at small u
    for u in (1e-3, 0.1, 1.0, 10.0):
        assert estimate_modulus(obj, pts, u, n_random=64) <= 2 * prof.bound(u) * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize("p", [3.0, 7.0])
def test_modulus_within_bound_near_target_only(p):
    # for p > 2 the quadratic bound needs |x_i - f_i| <= (2/p)^(1/(p-2)) along the segment
    rng = np.random.default_rng(6)
    obj = ShiftedPNorm(rng.standard_normal(10), p)
    prof = power_type_bound(p)
    radius = (2 / p) ** (1 / (p - 2))
    pts = [obj.f + rng.uniform(-radius / 2, radius / 2, 10) for _ in range(5)]
    for u in (1e-3, 0.1, radius / 2):
        assert estimate_modulus(obj, pts, u, n_random=64) <= 2 * prof.bound(u) * (1 + 1e-12) + 1e-12
    # far from the target the quadratic bound fails
    far = [obj.f + 5.0]
    assert estimate_modulus(obj, far, 1.0) > 2 * prof.bound(1.0)
