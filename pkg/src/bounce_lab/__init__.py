"""Event-driven simulators for balls bouncing between oscillating plates.

Core surfaces: plate-motion profiles and their resonance machinery
(``forcing``), the flight/collision kernel (``collision``), the two-plate
round-trip map with its invariants (``fermi_ulam``), the one- and two-ball
plate engines (``bouncing``), trajectory analysis (``diagnostics``), the
fixed-step cross-validation oracle (``oracle``), and the scenario/CLI
harness (``config``, ``cli``).
"""

from .collision import (
    FROM_ABOVE,
    FROM_BELOW,
    FlightState,
    RootSolveSettings,
    ball_ball_collide,
    next_plate_hit,
    reflect_off_plate,
)
from .bouncing import (
    BallState,
    ResonantSpec,
    build_resonant,
    equal_mass_equivalence_check,
    one_ball_map,
    orbit_as_upper_plate,
    paired_resonant_states,
    solo_ball_run,
    two_ball_simulate,
)
from .diagnostics import creep_iterate, envelope, phase_portrait
from .fermi_ulam import (
    LoopCurve,
    PhasePoint,
    ReciprocalPoint,
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
from .forcing import (
    ConstantProfile,
    ForcingProfile,
    HarmonicsProfile,
    ParabolicArcs,
    PlatePair,
    PolynomialWindow,
    SinusoidProfile,
    Tangency,
    critical_rescale_factor,
    make_profile,
    peak_velocity,
    resonance_match,
)
from .oracle import OracleSettings, oracle_run
from .records import CollisionEvent, GrowthFit, StopRule, TrajectoryRecord

__version__ = "0.1.0"
