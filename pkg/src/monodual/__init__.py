"""Monotone interacting particle systems with antichain-valued duals.

Forward simulation from shared Poisson event logs, exact backward dual
dynamics on antichains, small-system generator oracles, and Monte Carlo
estimators for survival and density, all deterministic under a master
seed.
"""

__version__ = "0.1.0"

from .antichain import (
    Antichain,
    agreement_level,
    antichain_from_json,
    antichain_to_json,
    antichain_window_distance,
    make_y_top,
    minimalize,
    order_leq,
    psi_mon,
)
from .configuration import (
    Configuration,
    LocalStateSpace,
    basis,
    config_distance,
    config_from_json,
    config_to_json,
    join,
    leq,
    meet,
    top,
    zero,
)
from .dual import (
    DualMap,
    backward_flow,
    check_pathwise_duality,
    dual_apply,
    make_dual,
)
from .estimators import (
    ergodicity_check,
    estimate_dual_correlations,
    estimate_rho,
    estimate_rho_dual,
    estimate_theta,
    estimate_theta_dual,
    monotone_coupling_audit,
    paired_survival_check,
    sweep,
    write_results_csv,
)
from .exact import (
    build_dual_generator,
    build_forward_generator,
    enumerate_antichains,
    enumerate_states,
    exact_extinction_probability,
    export_matrix_market,
    semigroup_duality_check,
    transient_distribution,
)
from .graphical import (
    BudgetError,
    CoupledSampler,
    EventLog,
    RatedFamily,
    cooperative_family,
    derive_rng,
    evolving_set,
    forward_flow,
    log_from_jsonl,
    log_to_jsonl,
    sample_coupled_logs,
    sample_event_log,
    summability_bounds,
)
from .lattice import (
    Grid,
    load_cayley_csv,
    make_cayley,
    make_small_grid,
    make_torus,
    translate_config,
)
from .localmap import (
    Branch,
    Coop,
    Custom,
    Death,
    apply_map,
    dependence_sets,
    is_additive,
    is_monotone,
    preserves_zero,
    translate_map,
)
