"""Modeling, simulation and identification of rank-deficient stationary
vector processes through their deterministic feedback channel."""

from .errors import (
    ConfigError,
    InconsistencyError,
    IndeterminateZeroError,
    InvalidInputError,
    LowRankError,
    NumericError,
    SingularEvaluationError,
    SingularLoopError,
    SingularProjectionError,
)
from .ratfun import (
    ONE,
    RatTF,
    Z,
    Z_INV,
    arith,
    circle_grid,
    classify,
    closed_loop,
    eval_circle,
    from_delay_form,
    from_json_dict,
    para_conjugate,
    poles_zeros,
    reduce,
    spectrum,
    to_delay_form,
    to_json_dict,
)
from .factorize import (
    OuterInnerPair,
    blaschke,
    causal_project,
    inner_gcd,
    outer_inner,
    stabilize_poly,
)
from .simulate import (
    NoiseSpec,
    TimeSeries,
    filter_series,
    gen_noise,
    mix_seed,
    sim_low_rank,
    sim_with_input,
)
from .estimate import (
    AREstimator,
    ARMAEstimator,
    BicTable,
    FamilyMember,
    InputChannelEstimator,
    InputModelEstimator,
    RecoveredFactors,
    RelationEstimator,
    WienerPair,
    f_family,
    fit_ar,
    fit_arma,
    fit_relation,
    identify_with_input,
    recover_w1_w2,
    scan_bic,
    scan_bic_input,
    wiener_predictor,
)
from .harness import (
    BodeComparison,
    BoxStats,
    McSummary,
    bode_compare,
    boxplot_stats,
    run_monte_carlo,
)
from .scenarios import ScenarioConfig, load_scenario, preset, run_scenario

__version__ = "0.1.0"
