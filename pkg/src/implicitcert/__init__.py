"""Evaluation and l-inf box robustness certification for implicit
(fixed-point) neural networks."""

from .certify import (
    CertificationResult,
    CertMethod,
    LabeledInput,
    RelativeClassifierMatrix,
    build_T,
    certified_fraction_curve,
    certified_radius,
    delta_ibp,
    delta_lip,
    delta_mm,
    delta_mm_c,
    empirical_margin_oracle,
    ibp_solve,
    lipschitz_bound,
    output_margin,
    z_lower,
)
from .embedding import (
    EmbeddedFixedPoint,
    IntervalVector,
    decomposition_function,
    embedded_solve,
    reach_box,
    verify_kamke,
)
from .errors import (
    DimensionMismatchError,
    InvalidLabelError,
    MaxIterExceededError,
    NonSquareError,
    NotWellPosedError,
    ParseError,
    ShapeError,
)
from .linalg import (
    embedded_measure_identity_check,
    metzler_part,
    negative_part,
    non_metzler_part,
    positive_part,
    weighted_linf_measure,
    weighted_linf_norm,
)
from .modelio import load_dataset, load_model, save_dataset, save_model, synth_model
from .network import (
    ActivationSpec,
    ImplicitNetwork,
    SolveDiagnostics,
    WellPosednessReport,
    apply_activation,
    build_wellposed_weights,
    check_well_posedness,
    forward_solve,
)

__version__ = "0.1.0"
