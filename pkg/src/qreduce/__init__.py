"""Finite-dimensional calculus of quantum measuring apparatuses."""
from qreduce.apparatus import (
    Apparatus,
    EffectDistribution,
    OperationalDistribution,
    OutcomeRecord,
    OutcomeStatistics,
    coarse_grain,
    commutant_deviation,
    effect_distribution,
    from_nonselective,
    from_output_states,
    identity_apparatus,
    is_a_compatible,
    is_repeatable,
    make_apparatus,
    measure,
    measured_observable,
    measures_observable,
    nonselective_operation,
    operation_deviation,
    projection_postulate_apparatus,
    verify_decomposition,
    verify_decomposition_parts,
)
from qreduce.dilation import (
    IndirectModel,
    complete_isometry_to_unitary,
    construct_nondegenerate_dilation,
    dilate_cp_distribution,
    realize,
    realized_effects,
    verify_realization,
)
from qreduce.errors import (
    CountMismatch,
    DegenerateObservable,
    DimensionError,
    InconsistentAction,
    InvalidOperator,
    NotCompatible,
    NotCP,
    NotIsometry,
    ParseError,
    QReduceError,
    ZeroProbability,
)
from qreduce.operators import (
    DEFAULT_TOL,
    DiscreteObservable,
    Outcome,
    Tolerances,
    decompose_four_densities,
    partial_trace_first,
    partial_trace_second,
    spectral_decompose,
    trace_distance,
    trace_norm,
)
from qreduce.sequential import (
    JointDistribution,
    PsvMeasureView,
    chain_probabilities,
    check_mixing_law,
    joint_distribution,
    joint_via_conditional,
    nonselective_marginal,
    psv_output_state,
    psv_probability,
    sample_trajectory,
)
from qreduce.superop import (
    KrausSet,
    SuperOperator,
    apply,
    check_positivity,
    choi,
    compose,
    contractivity_report,
    dual,
    from_choi,
    from_kraus,
    is_completely_positive,
    kraus_decompose,
    linear_extension,
    predual,
    sandwich,
    transpose_map,
)

__version__ = "0.1.0"
