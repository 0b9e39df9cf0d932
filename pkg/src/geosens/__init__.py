"""Global sensitivity analysis for models whose outputs live on a manifold.

The index compares the spread of ball-membership probabilities, with balls
spanned by geodesic diameters between output samples, before and after
conditioning on a subset of inputs.
"""

from __future__ import annotations

from .errors import (
    AntipodalPoints,
    ConfigError,
    DegenerateBalls,
    DegenerateDenominator,
    DegenerateInput,
    GeosensError,
    GridTooLarge,
    IncompatibleIsometry,
    InvalidNu,
    InvalidPoint,
    NumericalFailure,
    SamplingStalled,
    TooFewSamples,
    TooFewValidReplicates,
    TooLarge,
)
from .estimators import (
    ExactU,
    IncompleteU,
    IndexEstimate,
    estimate_B,
    estimate_cvm,
    estimate_D,
    estimate_S,
    kernel_G,
    kernel_J,
    parse_mode,
)
from .inference import (
    ConcentrationReport,
    ConfidenceInterval,
    bootstrap_ci,
    concentration_diagnostic,
    msd_study,
)
from .manifolds import (
    Circle,
    Congruence,
    CoordPermutation,
    Euclid,
    LogSurface,
    Manifold,
    RealLine,
    Rotation,
    ScalarAffine,
    SpdAffine,
    Sphere,
    apply_isometry,
    ball_contains,
    distance,
    midpoint,
    spd_geodesic,
)
from .models import (
    CustomModel,
    DistributionSpec,
    Example1,
    Example2,
    Example3,
    PickFreezeSample,
    Stiffness,
    WPool,
    evaluate_model,
    pick_freeze,
    sample_w_pool,
)
from .oracles import (
    DiscreteModel,
    closed_form_example1,
    enumerate_population_index,
    naive_estimate_reference,
    quadrature_index_example1,
)
from .rng import StreamKey, stream

__version__ = "0.1.0"
