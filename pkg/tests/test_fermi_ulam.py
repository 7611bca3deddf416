import math

import numpy as np
import pytest

from bounce_lab import (
    ConstantProfile,
    LoopCurve,
    PhasePoint,
    PlatePair,
    PolynomialWindow,
    SinusoidProfile,
    StopRule,
    Tangency,
    collision_map,
    collision_map_factored,
    contraction_estimates,
    from_reciprocal,
    iterate_map,
    map_loop,
    map_residuals,
    poincare_cartan_integral,
    reciprocal_collision_map,
    singular_run,
    to_reciprocal,
    validate_scale,
)
from bounce_lab.errors import (
    AlternationBroken,
    BelowValidityThreshold,
    CurveInvalid,
    InvalidScale,
)

SQRT5 = math.sqrt(5.0)


class TestCollisionMap:
    def test_static_plates_closed_form(self, static_pair):
        p_out, (tm, vm) = collision_map(PhasePoint(0.0, 3.0), static_pair, 2.0)
        assert tm == pytest.approx((3.0 - SQRT5) / 2.0, abs=1e-12)
        assert vm == pytest.approx(-SQRT5, abs=1e-12)
        assert p_out.t == pytest.approx(3.0 - SQRT5, abs=1e-12)
        assert p_out.v == pytest.approx(3.0, abs=1e-12)

    def test_no_gravity_round_trip(self, static_pair):
        p_out, mid = collision_map(PhasePoint(0.0, 2.0), static_pair, 0.0)
        assert mid == (pytest.approx(0.5, abs=1e-12), pytest.approx(-2.0))
        assert (p_out.t, p_out.v) == (pytest.approx(1.0, abs=1e-12), pytest.approx(2.0))

    def test_oscillating_top_residuals(self):
        plates = PlatePair(ConstantProfile(0.0, 1.0), SinusoidProfile(0.1, 1.0, 0.0, 1.0))
        p = PhasePoint(0.0, 3.0)
        p_out, mid = collision_map(p, plates, 2.0)
        res = map_residuals(p, mid, p_out, plates, 2.0)
        assert max(abs(r) for r in res) < 1e-9

    def test_slow_state_rejected(self, static_pair):
        with pytest.raises(BelowValidityThreshold):
            collision_map(PhasePoint(0.0, 1.0), static_pair, 2.0)  # apex 0.25 < 1

    def test_residuals_on_random_states(self, small_sin_pair, rng):
        for _ in range(50):
            p = PhasePoint(rng.uniform(0.0, 1.0), rng.uniform(4.0, 9.0))
            p_out, mid = collision_map(p, small_sin_pair, 2.0)
            res = map_residuals(p, mid, p_out, small_sin_pair, 2.0)
            assert max(abs(r) for r in res) < 1e-9


class TestFactoredMap:
    def test_stage_values_static(self, static_pair):
        p_out, mid, stages = collision_map_factored(PhasePoint(0.0, 3.0), static_pair, 2.0)
        # ascent arrival speed 3 - g t_mid = sqrt 5; reflection flips it
        assert stages[0][1] == pytest.approx(SQRT5, abs=1e-12)
        assert stages[1][1] == pytest.approx(-SQRT5, abs=1e-12)
        assert stages[2][1] == pytest.approx(-3.0, abs=1e-12)
        assert stages[3][1] == pytest.approx(3.0, abs=1e-12)

    def test_matches_composite_map(self, small_sin_pair, rng):
        settings_tol = 1e-11
        for _ in range(200):
            p = PhasePoint(rng.uniform(0.0, 1.0), rng.uniform(4.0, 9.0))
            a_out, a_mid = collision_map(p, small_sin_pair, 2.0)
            f_out, f_mid, _ = collision_map_factored(p, small_sin_pair, 2.0)
            assert abs(a_out.t - f_out.t) <= 10.0 * settings_tol
            assert abs(a_out.v - f_out.v) <= 1e-9
            assert abs(a_mid[0] - f_mid[0]) <= 10.0 * settings_tol


class TestReciprocalCoords:
    def test_definition(self):
        q = to_reciprocal(PhasePoint(0.0, 4.0), 2.0)
        assert q.y == 1.0

    def test_round_trip(self, rng):
        for v in rng.uniform(1.0, 1e6, 10_000):
            p = PhasePoint(0.0, float(v))
            back = from_reciprocal(to_reciprocal(p, 2.0))
            assert abs(back.v - p.v) <= 1e-15 * p.v

    def test_scale_validation(self, static_pair):
        validate_scale(2.0, static_pair)  # gap 1 < 2: fine
        with pytest.raises(InvalidScale):
            validate_scale(0.5, static_pair)

    def test_defect_terms_static_no_gravity(self, static_pair):
        # v = 2000, l = 2: t' - t = 2 gap / v = 0.001, y = 0.002
        q0 = to_reciprocal(PhasePoint(0.0, 2000.0), 2.0)
        q1, psi, phi = reciprocal_collision_map(q0, static_pair, 0.0)
        assert psi == pytest.approx(-0.001, abs=1e-12)
        assert phi == pytest.approx(0.0, abs=1e-15)

    def test_defect_vanishes_when_l_equals_gap(self, static_pair):
        # l = 1 (the gap): leading flight-time term is exact, psi = 0
        q0 = to_reciprocal(PhasePoint(0.0, 2000.0), 1.0 + 1e-9)
        _, psi, _ = reciprocal_collision_map(q0, static_pair, 0.0)
        assert abs(psi) < 1e-11

    def test_conjugacy_with_section_map(self, small_sin_pair, rng):
        # the stretched map is the conjugated section map (same code path);
        # only the double rounding of v through y = 2l/v separates them
        for _ in range(20):
            p = PhasePoint(rng.uniform(0.0, 1.0), rng.uniform(5.0, 9.0))
            direct, _ = collision_map(p, small_sin_pair, 2.0)
            q_out, _, _ = reciprocal_collision_map(
                to_reciprocal(p, 2.0), small_sin_pair, 2.0
            )
            back = from_reciprocal(q_out)
            assert abs(back.t - direct.t) <= 1e-12
            assert abs(back.v - direct.v) <= 1e-13 * direct.v


class TestContractionEstimates:
    def test_static_no_gravity_values(self, static_pair):
        est = contraction_estimates(static_pair, 0.0, 2.0, 0.01, samples=8)
        assert est.c1_hat == pytest.approx(0.0, abs=1e-9)
        assert est.c0_hat == pytest.approx(0.5, abs=1e-6)
        assert est.contraction_ok

    def test_small_forcing_contraction_holds(self):
        plates = PlatePair(ConstantProfile(0.0, 1.0), SinusoidProfile(0.01, 1.0, 0.0, 1.0))
        est = contraction_estimates(plates, 2.0, 2.0, 0.005, samples=6)
        assert est.contraction_ok


class TestLoopIntegral:
    def test_constant_loop_static_lower(self, static_pair):
        curve = LoopCurve.from_callable(lambda t: 5.0, 0.0, 1.0, 512)
        val = poincare_cartan_integral(curve, static_pair, 2.0)
        assert val == pytest.approx(0.5 * 25.0, rel=1e-12)  # T R^2 / 2

    def test_constant_loop_sinusoid_lower(self):
        plates = PlatePair(SinusoidProfile(0.1, 1.0), ConstantProfile(5.0, 1.0))
        curve = LoopCurve.from_callable(lambda t: 3.0, 0.0, 1.0, 512)
        # sine and its slope integrate to zero over the period
        val = poincare_cartan_integral(curve, plates, 2.0)
        assert val == pytest.approx(4.5, rel=1e-10)

    def test_invariance_under_map(self, small_sin_pair, rng):
        for _ in range(3):
            a = rng.uniform(0.01, 0.04)
            phi = rng.uniform(0.0, 2 * math.pi)
            curve = LoopCurve.from_callable(
                lambda t: 100.0 * (1.0 + a * math.cos(2 * math.pi * t + phi)),
                0.0, 1.0, 1024,
            )
            base = poincare_cartan_integral(curve, small_sin_pair, 2.0)
            image = map_loop(curve, small_sin_pair, 2.0)
            mapped = poincare_cartan_integral(image, small_sin_pair, 2.0)
            assert abs(mapped - base) / abs(base) < 1e-6

    def test_too_few_samples_rejected(self, static_pair):
        curve = LoopCurve.from_callable(lambda t: 5.0, 0.0, 1.0, 128)
        with pytest.raises(CurveInvalid):
            poincare_cartan_integral(curve, static_pair, 2.0)

    def test_non_monotone_loop_rejected(self):
        t = np.asarray([0.0, 0.2, 0.1, 0.6])
        with pytest.raises(CurveInvalid):
            LoopCurve(t, np.full(4, 5.0), 1.0)


def _linear_contact_pair():
    return PlatePair(
        ConstantProfile(0.0, 1.0),
        PolynomialWindow((0.0, -1.0), (-10.0, 0.0)),
        Tangency(0.0, 1, 5.0),
    )


class TestSingularRun:
    def test_linear_contact_exact_increments(self):
        rec = singular_run(_linear_contact_pair(), 0.0, PhasePoint(-1.0, 10.0),
                           StopRule(n_events=2000))
        speeds = rec.post_speeds[1::2]
        incs = np.diff(np.concatenate([[10.0], speeds]))
        assert np.abs(incs - 2.0).max() <= 1e-8
        assert rec.growth_fit.model_coefficient == pytest.approx(2.0)
        assert rec.growth_fit.slope == pytest.approx(1.0, abs=1e-9)

    def test_linear_contact_times_follow_closed_form(self):
        # t_n = t0 v0 / (v0 + 2 n); the flight times telescope to t* - t0
        rec = singular_run(_linear_contact_pair(), 0.0, PhasePoint(-1.0, 10.0),
                           StopRule(n_events=2000))
        bottoms = rec.times[1::2]
        n = np.arange(1, len(bottoms) + 1)
        exact = -10.0 / (10.0 + 2.0 * n)
        assert np.abs(bottoms - exact).max() <= 1e-8
        total = bottoms[-1] - (-1.0)
        assert total == pytest.approx(np.diff(np.concatenate([[-1.0], rec.times])).sum())
        # remaining time to the touch vanishes like v0 / (v0 + 2n)
        assert abs(bottoms[-1]) == pytest.approx(10.0 / (10.0 + 2.0 * len(bottoms)), abs=1e-8)

    def test_monotone_speeds_when_increments_positive(self):
        rec = singular_run(_linear_contact_pair(), 0.0, PhasePoint(-1.0, 10.0),
                           StopRule(n_events=600))
        assert rec.growth_fit.positive_increments
        assert np.all(np.diff(rec.post_speeds[1::2]) >= 0.0)

    def test_quadratic_contact_slope(self):
        pair = PlatePair(
            ConstantProfile(0.0, 1.0),
            PolynomialWindow((0.0, 0.0, 1.0), (-10.0, 0.0)),
            Tangency(0.0, 2, 5.0),
        )
        rec = singular_run(pair, 0.0, PhasePoint(-0.5, 20.0), StopRule(n_events=200))
        assert abs(rec.growth_fit.slope - 1.0) <= 0.1
        assert np.all(np.diff(rec.post_speeds[1::2]) > 0.0)

    def test_slow_start_breaks_alternation(self):
        # with gravity a slow ball falls back before reaching the wedge
        with pytest.raises(AlternationBroken):
            singular_run(_linear_contact_pair(), 2.0, PhasePoint(-1.0, 0.5),
                         StopRule(n_events=10))

    def test_start_outside_window_rejected(self):
        with pytest.raises(ValueError):
            singular_run(_linear_contact_pair(), 0.0, PhasePoint(-7.0, 10.0),
                         StopRule(n_events=10))


class TestIterateMap:
    def test_fast_and_object_paths_agree(self, rng):
        plates = PlatePair(SinusoidProfile(0.01, 1.0), SinusoidProfile(0.01, 1.0, 1.0, 1.0))
        p = PhasePoint(rng.uniform(0.0, 1.0), rng.uniform(8.0, 10.0))
        slow = iterate_map(p, plates, 2.0, 300, use_fast=False)
        fast = iterate_map(p, plates, 2.0, 300, use_fast=True)
        assert slow.status == fast.status == "ok"
        assert np.abs(slow.times - fast.times).max() <= 1e-10
        assert np.abs(slow.speeds - fast.speeds).max() <= 1e-9

    def test_below_validity_reported(self, static_pair):
        res = iterate_map(PhasePoint(0.0, 1.0), static_pair, 2.0, 5, use_fast=False)
        assert res.status == "below_validity"
        assert res.n_done == 0
