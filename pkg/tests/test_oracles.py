import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from online_newton.errors import (
    DegenerateOptimum,
    DerivativeMismatch,
    NoInteriorMinimum,
    SensorCoincidence,
)
from online_newton.oracles import (
    CallableOracle,
    LocalizationOracle,
    QuadraticOracle,
    RegularityConstants,
    SensorArray,
    SmoothNonconvexOracle,
    brute_force_optimum,
    check_derivatives,
    estimate_constants,
    localization_loss,
    newton_polish,
    quadratic_loss,
)

BENCHMARK_TARGET = np.array([2.0, 1.0])
# smallest eigenvalue of 2 sum u_i u_i^T at the target (2, 1), frozen from numpy.linalg.eigvalsh
BENCHMARK_H = 0.12823071547705790


def fd_gradient(f, x, step=1e-6):
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def noiseless_benchmark_oracle(target=BENCHMARK_TARGET):
    sensors = SensorArray.benchmark_default()
    return LocalizationOracle(sensors, sensors.ranges(target)[None, :])


class TestQuadraticLoss:
    def test_diag_example(self):
        v, g, H = quadratic_loss([0.0, 0.0], np.diag([2.0, 4.0]), [2.0, 4.0])
        assert v == 0.0
        np.testing.assert_array_equal(g, [-2.0, -4.0])
        np.testing.assert_array_equal(H, np.diag([2.0, 4.0]))

    def test_identity_example(self):
        v, g, _ = quadratic_loss([1.0, 1.0], np.eye(2), [0.0, 0.0])
        assert v == 1.0
        np.testing.assert_array_equal(g, [1.0, 1.0])

    def test_saddle_example(self):
        v, g, H = quadratic_loss([1.0, 1.0], np.diag([1.0, -1.0]), [0.0, 0.0])
        assert v == 0.0
        np.testing.assert_array_equal(g, [1.0, -1.0])
        np.testing.assert_array_equal(H, np.diag([1.0, -1.0]))

    def test_per_round_oracle(self):
        A = np.stack([np.eye(2), 2 * np.eye(2)])
        o = QuadraticOracle(A, [1.0, 1.0])
        assert o.T == 2
        np.testing.assert_allclose(o.stationary_point(1), [0.5, 0.5])
        with pytest.raises(IndexError):
            o.evaluate(2, [0.0, 0.0])


class TestLocalizationLoss:
    def test_single_sensor_example(self):
        v, g, H = localization_loss([2.0, 0.0], [[0.0, 0.0]], [1.0])
        assert v == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(g, [2.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(H, np.diag([2.0, 1.0]), atol=1e-15)

    def test_single_sensor_against_finite_differences(self):
        a, d = np.array([[0.0, 0.0]]), np.array([1.0])
        x = np.array([2.0, 0.0])
        f = lambda z: localization_loss(z, a, d)[0]
        g = lambda z: localization_loss(z, a, d)[1]
        np.testing.assert_allclose(fd_gradient(f, x), localization_loss(x, a, d)[1], atol=1e-8)
        fd_H = np.column_stack([fd_gradient(lambda z: g(z)[i], x, 1e-5) for i in range(2)]).T
        np.testing.assert_allclose(fd_H, localization_loss(x, a, d)[2], atol=1e-6)

    def test_consistent_measurements_give_zero(self):
        sensors = SensorArray.benchmark_default()
        v, g, _ = localization_loss(BENCHMARK_TARGET, sensors, sensors.ranges(BENCHMARK_TARGET))
        assert v == pytest.approx(0.0, abs=1e-28)
        np.testing.assert_allclose(g, 0.0, atol=1e-14)

    def test_coincidence(self):
        with pytest.raises(SensorCoincidence):
            localization_loss([0.5, 0.5], SensorArray.benchmark_default(), [1.0, 1.0, 1.0])

    def test_coincidence_large_array(self):
        # more sensors than the scalar path handles: vectorized branch
        pos = np.vstack([np.arange(10.0), np.zeros(10)]).T
        with pytest.raises(SensorCoincidence):
            localization_loss([3.0, 0.0], pos, np.ones(10))

    def test_scalar_and_vector_paths_agree(self):
        rng = np.random.default_rng(0)
        for m in (1, 3, 8, 9, 20):
            pos = rng.uniform(-1, 1, (m, 2))
            d = rng.uniform(0.5, 2.0, m)
            x = rng.uniform(2, 3, 2)
            small = localization_loss(x, pos, d)
            # compute the same quantities through the batched oracle path
            o = LocalizationOracle(pos, d[None, :])
            assert small[0] == pytest.approx(float(o.values(0, x[None])[0]), rel=1e-13)
            np.testing.assert_allclose(small[2], o.hessians(0, x[None])[0], rtol=1e-13, atol=1e-14)

    def test_noiseless_hessian_is_range_outer_products(self):
        sensors = SensorArray.benchmark_default()
        _, _, H = localization_loss(BENCHMARK_TARGET, sensors, sensors.ranges(BENCHMARK_TARGET))
        U = (BENCHMARK_TARGET - sensors.positions) / sensors.ranges(BENCHMARK_TARGET)[:, None]
        np.testing.assert_allclose(H, 2 * U.T @ U, atol=1e-10)
        assert np.all(np.linalg.eigvalsh(H) > 0)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_noiseless_hessian_pd_when_spanning(self, seed):
        rng = np.random.default_rng(seed)
        pos = rng.uniform(-1, 1, (3, 2))
        x = rng.uniform(-2, 2, 2)
        r = np.linalg.norm(x - pos, axis=1)
        if r.min() < 1e-3:
            return
        U = (x - pos) / r[:, None]
        _, _, H = localization_loss(x, pos, r)
        np.testing.assert_allclose(H, 2 * U.T @ U, atol=1e-10)
        if np.linalg.svd(U, compute_uv=False)[-1] > 1e-6:
            assert np.linalg.eigvalsh(H)[0] > 0

    def test_batched_queries_match_pointwise(self):
        rng = np.random.default_rng(2)
        sensors = SensorArray.benchmark_default()
        meas = sensors.ranges(BENCHMARK_TARGET) + 1e-3 * rng.standard_normal((4, 3))
        o = LocalizationOracle(sensors, meas)
        X = BENCHMARK_TARGET + 0.1 * rng.standard_normal((4, 5, 2))
        bv = o.batch_values(X)
        bh = o.batch_hessians(X)
        for t in range(4):
            for k in range(5):
                v, _, H = o.evaluate(t, X[t, k])
                assert bv[t, k] == pytest.approx(v, rel=1e-12)
                np.testing.assert_allclose(bh[t, k], H, rtol=1e-12, atol=1e-14)


class TestSmoothNonconvex:
    def test_stationary_point_and_hessian(self):
        rng = np.random.default_rng(4)
        o = SmoothNonconvexOracle.random(rng, 3, rng.standard_normal((2, 3)), indefinite=True)
        for t in range(2):
            _, g, H = o.evaluate(t, o.stationary_point(t))
            np.testing.assert_allclose(g, 0.0, atol=1e-14)
            np.testing.assert_allclose(H, o.A + o.alpha * o.omega**2 * np.eye(3), atol=1e-14)

    def test_batched_queries_match_pointwise(self):
        rng = np.random.default_rng(5)
        o = SmoothNonconvexOracle.random(rng, 3, rng.standard_normal((2, 3)))
        X = rng.standard_normal((2, 4, 3))
        bv, bh = o.batch_values(X), o.batch_hessians(X)
        for t in range(2):
            for k in range(4):
                v, _, H = o.evaluate(t, X[t, k])
                assert bv[t, k] == pytest.approx(v, rel=1e-12, abs=1e-14)
                np.testing.assert_allclose(bh[t, k], H, rtol=1e-12, atol=1e-14)


class TestCheckDerivatives:
    def test_quadratic_fixture(self):
        o = QuadraticOracle(np.diag([2.0, 4.0]), [2.0, 4.0])
        rep = check_derivatives(o, 0, [1.0, 2.0])
        assert rep.passed
        assert rep.grad_deviation <= 1e-9

    def test_localization_fixture(self):
        o = LocalizationOracle([[0.0, 0.0]], [[1.0]])
        assert check_derivatives(o, 0, [2.0, 0.0]).passed

    def test_wrong_gradient_sign(self):
        o = CallableOracle(lambda t, x: float(x @ x), lambda t, x: -2 * x, lambda t, x: 2 * np.eye(2), 2)
        with pytest.raises(DerivativeMismatch) as info:
            check_derivatives(o, 0, [1.0, 2.0])
        assert info.value.kind == "gradient"

    def test_wrong_hessian(self):
        o = CallableOracle(lambda t, x: float(x @ x), lambda t, x: 2 * x, lambda t, x: 3 * np.eye(2), 2)
        with pytest.raises(DerivativeMismatch) as info:
            check_derivatives(o, 0, [1.0, 2.0])
        assert info.value.kind == "hessian"

    @pytest.mark.parametrize("family", ["quadratic", "localization", "smooth"])
    def test_shipped_oracles_at_100_points(self, family):
        rng = np.random.default_rng(["quadratic", "localization", "smooth"].index(family))
        for _ in range(100):
            if family == "quadratic":
                n = int(rng.integers(1, 6))
                A = rng.standard_normal((n, n))
                o, x = QuadraticOracle(A + A.T, rng.standard_normal(n)), rng.uniform(-3, 3, n)
            elif family == "localization":
                pos = rng.uniform(-1, 1, (3, 2))
                x = rng.uniform(1.2, 3, 2) * rng.choice([-1, 1], 2)
                o = LocalizationOracle(pos, (np.linalg.norm(x - pos, axis=1) + rng.normal(0, 0.1, 3))[None])
            else:
                n = int(rng.integers(1, 6))
                o = SmoothNonconvexOracle.random(rng, n, rng.standard_normal((1, n)), indefinite=True)
                x = rng.uniform(-2, 2, n)
            assert check_derivatives(o, 0, x).passed


class TestRegularityConstants:
    def test_gamma_default(self):
        k = RegularityConstants(h=3.0, L=1.0, beta=10.0, ell=1.0)
        assert k.gamma == pytest.approx(2.0)
        assert RegularityConstants(h=3.0, L=1.0, beta=0.5, ell=1.0).gamma == 0.5

    def test_zero_lipschitz_caps_at_beta(self):
        k = RegularityConstants(h=2.0, L=0.0, beta=0.3, ell=1.0)
        assert k.gamma == 0.3
        assert k.newton_radius == math.inf

    def test_gamma_outside_range(self):
        with pytest.raises(ValueError):
            RegularityConstants(h=3.0, L=1.0, beta=10.0, ell=1.0, gamma=2.5)
        with pytest.raises(ValueError):
            RegularityConstants(h=3.0, L=1.0, beta=10.0, ell=1.0, gamma=0.0)

    def test_negative_fields(self):
        with pytest.raises(ValueError):
            RegularityConstants(h=-1.0, L=1.0, beta=1.0, ell=1.0)
        with pytest.raises(ValueError):
            RegularityConstants(h=1.0, L=1.0, beta=1.0, ell=-1.0)

    def test_motion_budget(self):
        k = RegularityConstants(h=3.0, L=1.0, beta=10.0, ell=1.0, gamma=1.0)
        assert k.motion_budget == pytest.approx(0.5)


class TestEstimateConstants:
    def test_quadratic_h(self):
        o = QuadraticOracle(np.diag([2.0, 4.0]), [2.0, 4.0])
        k = estimate_constants(o, [[1.0, 1.0]], radius=0.5)
        assert k.h == pytest.approx(2.0, rel=1e-12)
        assert k.L <= 1e-9
        assert k.gamma == 0.5

    def test_benchmark_geometry_regression(self):
        o = noiseless_benchmark_oracle()
        k = estimate_constants(o, BENCHMARK_TARGET[None, :], radius=0.025)
        sensors = SensorArray.benchmark_default()
        U = (BENCHMARK_TARGET - sensors.positions) / sensors.ranges(BENCHMARK_TARGET)[:, None]
        assert k.h == pytest.approx(np.linalg.eigvalsh(2 * U.T @ U)[0], rel=1e-10)
        assert k.h == pytest.approx(BENCHMARK_H, rel=1e-10)
        assert k.L > 0 and k.ell > 0

    def test_degenerate(self):
        o = QuadraticOracle(np.diag([1.0, 0.0]), [0.0, 0.0])
        with pytest.raises(DegenerateOptimum):
            estimate_constants(o, [[0.0, 0.0]], radius=0.1)

    def test_requires_stationary_optima(self):
        o = QuadraticOracle(np.eye(2), [0.0, 0.0])
        with pytest.raises(ValueError):
            estimate_constants(o, [[1.0, 0.0]], radius=0.1)

    def test_motion_of_optima(self):
        A = np.eye(2)
        b = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 5.0]])
        k = estimate_constants(QuadraticOracle(A, b), b, radius=0.1)
        assert k.v_bar == pytest.approx(5.0)
        assert k.V_bar == pytest.approx(6.0)

    def test_metadata(self):
        k = estimate_constants(noiseless_benchmark_oracle(), BENCHMARK_TARGET[None, :], 0.025, samples=100, seed=7)
        assert k.meta["samples"] == 100 and k.meta["seed"] == 7 and k.meta["estimated"]

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), extra=st.integers(1, 200))
    def test_monotone_in_samples(self, seed, extra):
        rng = np.random.default_rng(seed)
        o = SmoothNonconvexOracle.random(rng, 2, rng.standard_normal((2, 2)))
        optima = o.centers
        small = estimate_constants(o, optima, 0.3, samples=100, seed=seed)
        large = estimate_constants(o, optima, 0.3, samples=100 + extra, seed=seed)
        assert large.L >= small.L
        assert large.ell >= small.ell


class TestBruteForce:
    def test_noiseless_benchmark_target(self):
        x = brute_force_optimum(noiseless_benchmark_oracle(), 0, [[-1.0, 4.0], [-1.0, 4.0]], 50)
        np.testing.assert_allclose(x, BENCHMARK_TARGET, atol=1e-8)

    def test_quadratic(self):
        o = QuadraticOracle(np.diag([2.0, 4.0]), [2.0, 4.0])
        x = brute_force_optimum(o, 0, [[-3.0, 3.0], [-3.0, 3.0]], 50)
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-10)

    def test_saddle_stationary_mode(self):
        o = QuadraticOracle(np.diag([1.0, -1.0]), [0.0, 0.0])
        x = brute_force_optimum(o, 0, [[-1.0, 2.0], [-1.0, 2.0]], stationary=True, start=[1.0, 1.0])
        np.testing.assert_allclose(x, [0.0, 0.0], atol=1e-14)

    def test_boundary_minimum(self):
        o = QuadraticOracle(np.eye(2), [5.0, 0.0])
        with pytest.raises(NoInteriorMinimum):
            brute_force_optimum(o, 0, [[-1.0, 1.0], [-1.0, 1.0]], 50)

    def test_grid_minimum_size(self):
        o = QuadraticOracle(np.eye(2), [0.0, 0.0])
        with pytest.raises(ValueError):
            brute_force_optimum(o, 0, [[-1.0, 1.0], [-1.0, 1.0]], 10)

    def test_warm_start_in_wrong_basin_is_rejected(self):
        # double well with the deeper minimum near x = -1
        f = lambda t, x: float((x[0] ** 2 - 1) ** 2 + 0.3 * x[0] + x[1] ** 2)
        g = lambda t, x: np.array([4 * x[0] * (x[0] ** 2 - 1) + 0.3, 2 * x[1]])
        H = lambda t, x: np.diag([12 * x[0] ** 2 - 4, 2.0])
        o = CallableOracle(f, g, H, 2)
        box = [[-2.0, 2.0], [-1.0, 1.0]]
        cold = brute_force_optimum(o, 0, box, 50)
        warm = brute_force_optimum(o, 0, box, 50, start=[1.0, 0.0])
        assert cold[0] < 0
        np.testing.assert_allclose(warm, cold, atol=1e-12)

    def test_warm_start_agrees_with_cold(self):
        sensors = SensorArray.benchmark_default()
        rng = np.random.default_rng(9)
        d = sensors.ranges(BENCHMARK_TARGET) + 1e-4 * rng.standard_normal(3)
        o = LocalizationOracle(sensors, d[None])
        box = [[1.0, 3.0], [0.0, 2.0]]
        cold = brute_force_optimum(o, 0, box)
        warm = brute_force_optimum(o, 0, box, start=BENCHMARK_TARGET + 0.01)
        np.testing.assert_allclose(warm, cold, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), sigma=st.floats(0.0, 1e-2))
    def test_returned_point_is_stationary(self, seed, sigma):
        rng = np.random.default_rng(seed)
        sensors = SensorArray.benchmark_default()
        target = BENCHMARK_TARGET + rng.uniform(-0.5, 0.5, 2)
        d = sensors.ranges(target) + sigma * rng.standard_normal(3)
        o = LocalizationOracle(sensors, d[None])
        x = brute_force_optimum(o, 0, np.stack([target - 1, target + 1], axis=1))
        assert np.linalg.norm(o.gradient(0, x)) <= 1e-10

    def test_newton_polish_reports(self):
        o = QuadraticOracle(np.diag([2.0, 4.0]), [2.0, 4.0])
        x, f, gnorm = newton_polish(o, 0, [5.0, -5.0])
        np.testing.assert_allclose(x, [1.0, 1.0])
        assert gnorm <= 1e-12 and f == pytest.approx(-3.0)
