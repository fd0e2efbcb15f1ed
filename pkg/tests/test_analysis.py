import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from online_newton.algorithms import OnmState, onm_step
from online_newton.analysis import (
    RegretLedger,
    RoundRecord,
    bound_comparison,
    compute_regret,
    corollary1_bound,
    theorem1_bound,
    total_variation,
)
from online_newton.bench import MotionModel
from online_newton.errors import AssumptionViolated, ConditionFailed
from online_newton.oracles import QuadraticOracle, RegularityConstants

finite = st.floats(-1e6, 1e6, allow_nan=False)


def record(t, gap_pair, x=(0.0,), x_star=(0.0,)):
    return RoundRecord(t, np.array(x), np.array(x_star), gap_pair[0], gap_pair[1])


def fixture_constants(**kw):
    base = dict(h=3.0, L=1.0, beta=10.0, ell=1.0, gamma=1.0)
    base.update(kw)
    return RegularityConstants(**base)


class TestRoundRecord:
    def test_error_computed(self):
        r = RoundRecord(0, [3.0, 4.0], [0.0, 0.0], 1.0, 0.0)
        assert r.error == 5.0
        assert r.gap == 1.0

    def test_negative_error_rejected(self):
        with pytest.raises(ValueError):
            RoundRecord(0, [0.0], [0.0], 0.0, 0.0, error=-1.0)


class TestComputeRegret:
    def test_single_equal(self):
        assert compute_regret([record(0, (2.0, 2.0))]) == 0.0

    def test_two_records(self):
        assert compute_regret([record(0, (3.0, 1.0)), record(1, (2.0, 2.0))]) == 2.0

    def test_empty(self):
        with pytest.raises(ValueError):
            compute_regret([])

    def test_quadratic_fixture_only_round_zero(self):
        # static quadratic: after the first Newton step ONM sits on the optimum
        A = np.array([[3.0, 1.0], [1.0, 2.0]])
        b = np.array([1.0, -1.0])
        o = QuadraticOracle(A, b, T=6)
        x_star = np.linalg.solve(A, b)
        x = np.array([0.7, -0.4])
        records = []
        for t in range(o.T):
            records.append(RoundRecord(t, x, x_star, o.value(t, x), o.value(t, x_star)))
            x = onm_step(o, OnmState(x, t)).x
        d = np.array([0.7, -0.4]) - x_star
        assert compute_regret(records) == pytest.approx(0.5 * d @ A @ d, rel=1e-12)

    @settings(max_examples=200)
    @given(a=st.lists(st.tuples(finite, finite), min_size=1, max_size=20),
           b=st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
    def test_additive(self, a, b):
        ra = [record(i, p) for i, p in enumerate(a)]
        rb = [record(i, p) for i, p in enumerate(b)]
        whole = compute_regret(ra + rb)
        # each sum is correctly rounded, so the two sides differ by a few ulp of
        # the gap magnitudes (the totals themselves may cancel)
        parts = compute_regret(ra) + compute_regret(rb)
        scale = math.fsum(abs(r.gap) for r in ra + rb)
        assert abs(whole - parts) <= 4 * np.finfo(float).eps * scale

    @settings(max_examples=200)
    @given(a=st.lists(st.tuples(st.integers(-2**20, 2**20), st.integers(-2**20, 2**20)), min_size=1, max_size=20),
           b=st.lists(st.tuples(st.integers(-2**20, 2**20), st.integers(-2**20, 2**20)), min_size=1, max_size=20))
    def test_additive_exact_on_representable_sums(self, a, b):
        ra = [record(i, (float(p), float(q))) for i, (p, q) in enumerate(a)]
        rb = [record(i, (float(p), float(q))) for i, (p, q) in enumerate(b)]
        assert compute_regret(ra + rb) == compute_regret(ra) + compute_regret(rb)


class TestTotalVariation:
    def test_unit_steps(self):
        assert total_variation([[0, 0], [1, 0], [1, 1]]) == 2.0

    def test_constant(self):
        assert total_variation([[1.5, 2.0]] * 4) == 0.0

    def test_needs_two(self):
        with pytest.raises(ValueError):
            total_variation([[0.0, 0.0]])

    def test_general_variation_first_step(self):
        m = MotionModel("general_variation", 0.0025)
        v1 = m.displacement(1, 0, 2)
        v2 = m.displacement(2, 0, 2)
        path = np.cumsum([[2.0, 1.0], v1, v2], axis=0)
        assert np.linalg.norm(v1) == pytest.approx(0.0025, rel=1e-15)
        assert total_variation(path) == pytest.approx(0.0025 + 0.0025 / math.sqrt(2.0), rel=1e-12)

    @settings(max_examples=200)
    @given(pts=st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)), min_size=2, max_size=15),
           shift=st.tuples(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6)))
    def test_translation_invariant_exact(self, pts, shift):
        a = np.array(pts, dtype=float)
        assert total_variation(a + np.array(shift, dtype=float)) == total_variation(a)

    @settings(max_examples=200)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30))
    def test_translation_invariant_floats(self, seed, n):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, 3))
        s = rng.standard_normal(3)
        assert total_variation(a + s) == pytest.approx(total_variation(a), rel=1e-13)


class TestTheorem1:
    def test_hand_fixture(self):
        th = theorem1_bound(fixture_constants(), V_T=1.0, e0=0.0, eT=0.0)
        assert th.delta == 0.0
        assert th.factor == pytest.approx(2.0)
        assert th.bound == pytest.approx(2.0)
        assert th.assumptions_hold

    def test_no_variation(self):
        assert theorem1_bound(fixture_constants(), V_T=0.0, e0=0.3, eT=0.3).bound == 0.0

    def test_gamma_at_newton_radius(self):
        with pytest.raises(AssumptionViolated) as info:
            theorem1_bound(fixture_constants(gamma=2.0), V_T=1.0, e0=0.0, eT=0.0)
        assert "assumption 3" in str(info.value)

    def test_delta_formula(self):
        th = theorem1_bound(fixture_constants(), V_T=0.0, e0=0.4, eT=0.2)
        assert th.delta == pytest.approx(0.5 * (0.16 - 0.04))

    def test_checklist_flags_vacuous_runs(self):
        k = fixture_constants(v_bar=0.9)
        th = theorem1_bound(k, V_T=1.0, e0=1.5, eT=0.0)
        assert not th.checklist["A3_start_in_basin"]
        assert not th.checklist["A4_motion_budget"]
        assert not th.assumptions_hold


class TestCorollary1:
    def test_zero_discriminant(self):
        co = corollary1_bound(fixture_constants(V_bar=0.5), e0=0.0)
        assert co.E_upper == pytest.approx(1.0) and co.E_lower == pytest.approx(1.0)
        assert co.bound == pytest.approx(1.0)

    def test_no_variation(self):
        co = corollary1_bound(fixture_constants(V_bar=0.0), e0=0.0)
        assert co.E_lower == 0.0 and co.bound == 0.0

    def test_hand_fixture(self):
        co = corollary1_bound(fixture_constants(ell=2.0, V_bar=0.25), e0=0.0)
        assert co.E_lower == pytest.approx(1.0 - math.sqrt(0.5), rel=1e-12)
        assert co.bound == pytest.approx(2.0 * (1.0 - math.sqrt(0.5)), rel=1e-12)
        assert co.bound == pytest.approx(0.58579, abs=1e-5)

    def test_variation_too_large(self):
        with pytest.raises(ConditionFailed):
            corollary1_bound(fixture_constants(V_bar=0.6), e0=0.0)

    def test_gamma_above_upper_root(self):
        # V_bar + e0 = 0.25 gives E_upper = 1 + sqrt(0.5) ~ 1.707; gamma = 1.9 exceeds it
        with pytest.raises(ConditionFailed):
            corollary1_bound(fixture_constants(V_bar=0.25, gamma=1.9), e0=0.0)

    def test_roots_are_fixed_points(self):
        k = fixture_constants(V_bar=0.2)
        co = corollary1_bound(k, e0=0.05)
        c = k.contraction
        for E in (co.E_lower, co.E_upper):
            assert c * E * E + 0.25 == pytest.approx(E, rel=1e-12)


class TestBoundComparison:
    def test_equal_bounds(self):
        k = fixture_constants(V_bar=0.5)
        cmp_ = bound_comparison(k, V_T=0.5, e0=0.0, eT=0.0)
        assert cmp_.theorem1.bound == pytest.approx(1.0)
        assert cmp_.corollary1.bound == pytest.approx(1.0)
        assert cmp_.smaller == "equal"

    def test_no_variation_corollary_smaller(self):
        k = fixture_constants(V_bar=0.0)
        cmp_ = bound_comparison(k, V_T=0.3, e0=0.0, eT=0.0)
        assert cmp_.corollary1.bound == 0.0
        assert cmp_.corollary1.bound <= cmp_.theorem1.bound
        assert cmp_.smaller == "corollary1"

    def test_ybar_near_limit(self):
        k = fixture_constants(V_bar=0.49)
        cmp_ = bound_comparison(k, V_T=0.49, e0=0.0, eT=0.0)
        assert cmp_.ybar_exists
        assert 0 < cmp_.ybar < k.contraction * cmp_.corollary1.E_upper
        assert cmp_.y.shape == (100,)
        d = cmp_.as_dict()
        assert set(d) == {"theorem1_bound", "corollary1_bound", "smaller", "tightness_fraction", "ybar"}


class TestLedger:
    def test_from_records(self):
        recs = [
            RoundRecord(0, [1.0, 0.0], [0.0, 0.0], 2.0, 1.0),
            RoundRecord(1, [0.0, 0.0], [0.0, 1.0], 3.0, 3.0),
            RoundRecord(2, [0.0, 1.0], [0.0, 1.0], 1.0, 0.5),
        ]
        led = RegretLedger.from_records(recs)
        assert led.regret == 1.5
        assert led.V_T == 1.0
        assert led.E_T == 2.0
        assert led.e0 == 1.0 and led.eT == 0.0
        np.testing.assert_allclose(led.regret_curve(), [1.0, 1.0, 1.5])
        np.testing.assert_allclose(led.error_curve(), [1.0, 2.0, 2.0])
        np.testing.assert_allclose(led.optimum_motion(), [1.0, 0.0])

    def test_attach_bounds(self):
        recs = [RoundRecord(t, [0.0], [0.1 * t], 0.0, 0.0) for t in range(3)]
        led = RegretLedger.from_records(recs, constants=fixture_constants(V_bar=0.2))
        assert led.theorem1_bound is not None and led.corollary1_bound is not None
        led2 = RegretLedger.from_records(recs, constants=fixture_constants(V_bar=0.9))
        assert led2.corollary1_bound is None
