"""Effective CP tensor rank of conditional probability tables.

Parses Bayesian networks (HUGIN ``.net`` subset or JSON), decomposes each
CPT into sums of rank-one tensors with a multi-start damped Gauss-Newton
solver, finds the minimal rank meeting a max-error threshold, and reports
parameter savings and corpus-level rank statistics against random-table
controls.
"""

from .tensors import (
    CPModel,
    fold,
    frobenius_dist,
    khatri_rao,
    max_abs_diff,
    model_from_json,
    model_to_json,
    rank_one,
    reconstruct,
    tensor_from_flat,
    tensor_from_json,
    tensor_to_json,
    unfold,
)
from .solvers import (
    FitResult,
    SolverConfig,
    SolverNumericalError,
    als_decompose,
    lm_decompose,
    multi_start_decompose,
    nvec_init,
    random_init,
)
from .hugin import (
    Network,
    NodeSpec,
    ParseError,
    ValidationError,
    cpt_to_tensor,
    emit_net,
    load_network,
    network_from_json,
    network_to_json,
    parse_net,
    select_cpts,
)
from .analysis import (
    AnalysisConfig,
    ProfileEntry,
    RankProfile,
    cp_param_count,
    cp_param_count_general,
    general_param_count,
    minimal_rank,
    random_cpt_like,
    rank_profile,
)
from .report import (
    CorpusRecord,
    CorpusReport,
    emit_curve_csv,
    emit_report,
    load_report_json,
    profile_single,
    run_corpus,
)

__version__ = "0.1.0"
