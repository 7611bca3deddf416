"""Exception hierarchy shared by all simulation modules."""


class BounceLabError(Exception):
    """Base class for all package errors."""


class ProfileError(BounceLabError):
    """Malformed or unsupported plate-motion profile."""


class OrderUnsupported(ProfileError):
    """Requested derivative order exceeds the profile's capability."""


class OutOfWindow(ProfileError):
    """Windowed profile evaluated outside its validity window."""


class DegenerateProfile(ProfileError):
    """Profile has no positive peak velocity, so no rescale threshold exists."""


class NotPeriodic(ProfileError):
    """Orbit or profile fails its periodicity check."""


class NoImpact(BounceLabError):
    """Flight never reaches the plate within the search horizon."""


class NonReturn(NoImpact):
    """Ball escapes upward and never returns to the plate (g = 0)."""


class GrazingImpact(BounceLabError):
    """Located root is tangential: |dG/dt| below the transversality floor."""


class BelowValidityThreshold(BounceLabError):
    """State too slow for the two-plate collision map (wrong event order)."""


class InvalidScale(BounceLabError):
    """Length scale l is not above the plate-separation supremum."""


class RegionTooLarge(BounceLabError):
    """Sampled region contains states outside the map's validity domain."""


class CurveInvalid(BounceLabError):
    """Loop fails its sampling, simplicity, or quadrature-consistency checks."""


class AlternationBroken(BounceLabError):
    """Singular run hit the same plate twice in a row (start speed too small)."""


class ResonanceBroken(BounceLabError):
    """Resonant hop pattern deviated beyond tolerance.

    Carries ``hop_index`` and ``deviation`` for diagnosis.
    """

    def __init__(self, message, hop_index=None, deviation=None):
        super().__init__(message)
        self.hop_index = hop_index
        self.deviation = deviation


class TripleCollision(BounceLabError):
    """Plate hit and ball-ball hit coincide with a massive lower ball.

    Carries the partial ``record`` accumulated before the event.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class EventStorm(BounceLabError):
    """Event count exceeded the configured hard cap."""


class TooShort(BounceLabError):
    """Record has too few events for the requested analysis."""


class LeftDomain(BounceLabError):
    """Creep sequence left its validity interval."""


class MixedScenario(BounceLabError):
    """Records from different scenarios cannot be combined."""


class ConfigError(BounceLabError):
    """Scenario configuration failed to parse or validate.

    Carries ``field`` naming the offending section/key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
