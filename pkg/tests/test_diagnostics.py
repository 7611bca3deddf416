import numpy as np
import pytest

from bounce_lab import (
    ResonantSpec,
    build_resonant,
    creep_iterate,
    envelope,
    phase_portrait,
)
from bounce_lab.errors import LeftDomain, MixedScenario, TooShort


@pytest.fixture
def steady_record(sin_plate):
    spec = ResonantSpec.locate(sin_plate, 2.0, "steady", 3)
    return build_resonant(spec, sin_plate, 2.0, 64)


@pytest.fixture
def accelerating_record(sin_plate):
    spec = ResonantSpec.locate(sin_plate, 2.0, "accelerating", 3)
    return build_resonant(spec, sin_plate, 2.0, 64)


class TestEnvelope:
    def test_constant_orbit_is_bounded(self, steady_record):
        rep = envelope(steady_record, window=8)
        assert rep.verdict == "bounded_evidence"
        assert rep.slope == pytest.approx(0.0, abs=1e-12)

    def test_accelerating_orbit_shows_growth(self, accelerating_record):
        rep = envelope(accelerating_record, window=8)
        assert rep.verdict == "growth_evidence"
        # speed gains T g per plate hit, and the verdict carries its backing
        assert rep.slope == pytest.approx(2.0, rel=1e-6)
        assert rep.growth_confidence >= 0.99
        assert rep.half_ratio > 1.05

    def test_too_short_record(self, steady_record):
        with pytest.raises(TooShort):
            envelope(steady_record, window=64)

    def test_window_floor(self, steady_record):
        with pytest.raises(ValueError):
            envelope(steady_record, window=4)

    def test_deterministic_for_fixed_seed(self, accelerating_record):
        a = envelope(accelerating_record, window=8, seed=5)
        b = envelope(accelerating_record, window=8, seed=5)
        assert a.slope == b.slope and a.growth_confidence == b.growth_confidence


class TestCreepIterate:
    def test_first_iterates_square(self):
        res = creep_iterate("square", -0.5, 2)
        assert res.sequence[1] == pytest.approx(-0.25, abs=0.0)
        assert res.sequence[2] == pytest.approx(-0.1875, abs=0.0)

    def test_product_identity(self):
        # s_{n+1} = s_0 prod (1 + s_k) when tau is the square
        res = creep_iterate("square", -0.3, 1000)
        s = res.sequence
        prod = np.cumprod(1.0 + s[:-1])
        np.testing.assert_allclose(s[1:], s[0] * prod, rtol=1e-12)

    def test_divergence_flag_under_bound(self):
        res = creep_iterate("square", -0.5, 10**4, bound=8.0)
        assert res.partial_sums[-1] > 8.0
        assert res.diverged

    def test_asymptotic_reciprocal_decay(self):
        res = creep_iterate("square", -0.1, 10**5)
        n = np.arange(len(res.sequence))
        tail = n > 10**4
        prod = n[tail] * (-res.sequence[tail])
        assert prod.min() >= 0.8 and prod.max() <= 1.2

    def test_cubic_mix_runs(self):
        res = creep_iterate("cubic_mix", -0.2, 1000)
        assert np.all(np.diff(res.sequence) > 0.0)

    def test_custom_overshoot_leaves_domain(self):
        with pytest.raises(LeftDomain):
            creep_iterate("custom", -0.5, 10, coefficients=(10.0,))

    def test_nonpositive_tau_rejected(self):
        with pytest.raises(ValueError):
            creep_iterate("custom", -0.5, 10, coefficients=(-1.0,))

    def test_positive_start_rejected(self):
        with pytest.raises(ValueError):
            creep_iterate("square", 0.1, 10)


class TestPhasePortrait:
    def test_steady_orbit_is_a_fixed_point(self, steady_record):
        rows = phase_portrait([steady_record], coords="tv")
        t_mods = {round(r[2], 9) for r in rows}
        vs = {round(r[3], 9) for r in rows}
        assert len(t_mods) == 1 and len(vs) == 1

    def test_accelerating_orbit_fixed_phase_arithmetic_speed(self, accelerating_record):
        rows = phase_portrait([accelerating_record], coords="tv")
        t_mods = np.asarray([r[2] for r in rows])
        vs = np.asarray([r[3] for r in rows])
        assert np.ptp(t_mods) < 1e-7
        np.testing.assert_allclose(np.diff(vs), 2.0, atol=1e-7)

    def test_reciprocal_coordinate_column(self, steady_record):
        rows = phase_portrait([steady_record], coords="ty", l=2.0)
        assert rows[0][3] == pytest.approx(2.0 * 2.0 / 3.0, rel=1e-9)

    def test_mixed_scenarios_rejected(self, steady_record, accelerating_record):
        with pytest.raises(MixedScenario):
            phase_portrait([steady_record, accelerating_record])

    def test_ty_requires_scale(self, steady_record):
        with pytest.raises(ValueError):
            phase_portrait([steady_record], coords="ty")
