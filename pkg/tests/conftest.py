import numpy as np
import pytest

from bounce_lab import ConstantProfile, PlatePair, SinusoidProfile


@pytest.fixture
def static_pair():
    return PlatePair(ConstantProfile(0.0, 1.0), ConstantProfile(1.0, 1.0))


@pytest.fixture
def sin_plate():
    return SinusoidProfile(0.5, 1.0)


@pytest.fixture
def small_sin_pair():
    return PlatePair(SinusoidProfile(0.02, 1.0), SinusoidProfile(0.02, 1.0, 0.9, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
