import math

import numpy as np
import pytest

from bounce_lab import (
    ConstantProfile,
    HarmonicsProfile,
    PlatePair,
    PolynomialWindow,
    SinusoidProfile,
    Tangency,
    critical_rescale_factor,
    peak_velocity,
    resonance_match,
)
from bounce_lab.errors import (
    DegenerateProfile,
    OrderUnsupported,
    OutOfWindow,
    ProfileError,
)


def test_constant_derivative_is_zero():
    f = ConstantProfile(0.0, 1.0)
    assert f.eval(0.3, 1) == 0.0
    assert f.eval(0.3) == 0.0


def test_sinusoid_first_derivative_closed_form():
    f = SinusoidProfile(0.5, 1.0)
    # d/dt A sin(2 pi t) at 0 is 2 pi A
    assert f.eval(0.0, 1) == pytest.approx(2.0 * math.pi * 0.5, abs=1e-14)


def test_polynomial_window_value():
    f = PolynomialWindow((0.0, 0.0, 1.0), (-1.0, 1.0))
    assert f.eval(-0.25) == pytest.approx(0.0625, abs=0.0)


def test_polynomial_out_of_window():
    f = PolynomialWindow((0.0, 1.0), (-1.0, 0.0))
    with pytest.raises(OutOfWindow):
        f.eval(0.5)


def test_order_unsupported():
    f = SinusoidProfile(0.5, 1.0)
    with pytest.raises(OrderUnsupported):
        f.eval(0.0, f.max_derivative_order + 1)


def test_harmonics_frequency_must_be_integer_multiple():
    with pytest.raises(ProfileError):
        HarmonicsProfile(((0.1, 2.5 * math.pi, 0.0),), period=1.0)


@pytest.mark.parametrize("profile", [
    SinusoidProfile(0.5, 1.0, 0.3),
    HarmonicsProfile(((0.2, 2 * math.pi, 0.1), (0.05, 6 * math.pi, 1.2)), 1.0, 0.4),
    ConstantProfile(0.7, 2.0),
])
def test_periodicity_sampled(profile, rng):
    ts = rng.uniform(-5.0, 5.0, 128)
    for t in ts:
        a, b = profile.eval(t), profile.eval(t + profile.period)
        assert abs(b - a) <= 1e-12 * (1.0 + abs(a))


@pytest.mark.parametrize("terms,offset", [
    (((0.5, 2 * math.pi, 0.3),), 0.0),
    (((0.2, 2 * math.pi, 0.1), (0.05, 4 * math.pi, 1.2)), 0.0),
])
def test_derivatives_match_central_differences(terms, offset, rng):
    # the difference quotients are formed in high precision so only the
    # O(h^2) truncation error remains; binary64 sampling noise at h = 1e-5
    # would otherwise swamp the second difference
    import mpmath

    profile = HarmonicsProfile(terms, 1.0, offset)

    def f_hp(t):
        acc = mpmath.mpf(offset)
        for a, w, p in terms:
            acc += mpmath.mpf(a) * mpmath.sin(mpmath.mpf(w) * t + mpmath.mpf(p))
        return acc

    with mpmath.workdps(40):
        h = mpmath.mpf("1e-5")
        for t in rng.uniform(0.0, 1.0, 32):
            tm = mpmath.mpf(t)
            d1 = (f_hp(tm + h) - f_hp(tm - h)) / (2 * h)
            d2 = (f_hp(tm + h) - 2 * f_hp(tm) + f_hp(tm - h)) / h**2
            assert abs(profile.eval(t, 1) - float(d1)) <= 1e-6
            assert abs(profile.eval(t, 2) - float(d2)) <= 1e-6


def test_array_and_scalar_eval_agree(rng):
    profile = HarmonicsProfile(((0.2, 2 * math.pi, 0.1), (0.05, 4 * math.pi, 1.2)), 1.0, 0.3)
    ts = rng.uniform(0.0, 3.0, 50)
    for order in (0, 1, 2):
        arr = profile.eval(ts, order)
        scal = np.asarray([profile.eval(float(t), order) for t in ts])
        np.testing.assert_allclose(arr, scal, rtol=0, atol=1e-15)


class TestPlatePair:
    def test_separated_pair_verifies(self, small_sin_pair):
        small_sin_pair.verify()

    def test_touching_without_declaration_rejected(self):
        pair = PlatePair(ConstantProfile(0.0, 1.0), SinusoidProfile(0.5, 1.0, 0.0, 0.4))
        with pytest.raises(ProfileError):
            pair.verify()

    def test_declared_linear_tangency_verifies(self):
        pair = PlatePair(
            ConstantProfile(0.0, 1.0),
            PolynomialWindow((0.0, -1.0), (-10.0, 0.0)),
            Tangency(0.0, 1, 5.0),
        )
        pair.verify()

    def test_wrong_contact_order_rejected(self):
        pair = PlatePair(
            ConstantProfile(0.0, 1.0),
            PolynomialWindow((0.0, 0.0, 1.0), (-10.0, 0.0)),
            Tangency(0.0, 1, 5.0),  # actually order 2
        )
        with pytest.raises(ProfileError):
            pair.verify()

    def test_sup_gap_bound_static(self, static_pair):
        assert static_pair.sup_gap_bound() == pytest.approx(1.0)


class TestResonanceMatch:
    def test_sinusoid_match(self):
        # invert 2 pi A cos(2 pi t0) = T g / 2 with A = 0.5, T = 1, g = 2
        m = resonance_match(SinusoidProfile(0.5, 1.0), 2.0, 3)
        assert m.k == 1
        expected = math.acos(1.0 / math.pi) / (2.0 * math.pi)
        assert m.t0 == pytest.approx(expected, abs=1e-9)

    def test_small_amplitude_absent(self):
        # max slope 0.2 pi < 1 = T g / 2
        assert resonance_match(SinusoidProfile(0.1, 1.0), 2.0, 5) is None

    def test_flat_profile_absent(self):
        assert resonance_match(ConstantProfile(0.0, 1.0), 2.0, 4) is None

    @pytest.mark.parametrize("amp,g,k_max", [(0.5, 2.0, 3), (1.0, 1.0, 4), (0.9, 3.0, 6)])
    def test_match_satisfies_slope_equation(self, amp, g, k_max):
        profile = SinusoidProfile(amp, 1.0, 0.4)
        m = resonance_match(profile, g, k_max)
        if m is not None:
            target = m.k * profile.period * g / 2.0
            assert abs(profile.eval(m.t0, 1) - target) <= 1e-10


class TestCriticalRescale:
    def test_half_amplitude_sinusoid(self):
        c0 = critical_rescale_factor(SinusoidProfile(0.5, 1.0), 2.0)
        assert c0 == pytest.approx(math.sqrt(1.0 / math.pi), rel=1e-9)

    def test_unit_amplitude_sinusoid(self):
        c0 = critical_rescale_factor(SinusoidProfile(1.0, 1.0), 2.0)
        assert c0 == pytest.approx(math.sqrt(1.0 / (2.0 * math.pi)), rel=1e-9)

    def test_doubling_g_scales_by_sqrt2(self):
        f = SinusoidProfile(0.3, 1.0, 0.2)
        assert critical_rescale_factor(f, 4.0) == pytest.approx(
            math.sqrt(2.0) * critical_rescale_factor(f, 2.0), rel=1e-12
        )

    def test_threshold_brackets_membership(self):
        f = SinusoidProfile(0.5, 1.0)
        g = 2.0
        c0 = critical_rescale_factor(f, g)
        fast = f.rescaled(1.01 * c0)
        slow = f.rescaled(0.99 * c0)
        assert resonance_match(fast, g, 1) is not None
        assert resonance_match(slow, g, 1) is None

    def test_flat_profile_degenerate(self):
        with pytest.raises(DegenerateProfile):
            critical_rescale_factor(ConstantProfile(0.0, 1.0), 2.0)


def test_peak_velocity_sinusoid():
    f = SinusoidProfile(0.5, 1.0, 0.7)
    assert peak_velocity(f) == pytest.approx(math.pi, rel=1e-10)
