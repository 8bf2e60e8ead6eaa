"""Two-sided bargaining toolkit for firm-to-firm trade pricing.

Closed-form bilateral markups and pass-through elasticities, a fixed-network
equilibrium solver, synthetic panel generators, structural (phi, theta)
estimators, and the panel econometrics used to validate and decompose
tariff pass-through.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DataSchemaError,
    InfeasibleOutsideOptionError,
    ParameterDomainError,
    SingularSystemError,
    TradeBargainError,
    UnboundedMarkupError,
)
from .estimation import (
    EstimateResult,
    GmmConfig,
    KappaSpec,
    PairMoment,
    PhiStats,
    build_pair_moments,
    estimate_restricted_theta1,
    gmm_estimate,
    implied_phi_stats,
    logistic_phi,
    montecarlo_study,
    nls_joint,
    summarize_study,
)
from .network import (
    Edge,
    EquilibriumState,
    Exporter,
    Importer,
    SolverConfig,
    TradeNetwork,
    direct_passthrough_fd,
    full_passthrough_system,
    load_network,
    network_from_json,
    network_to_json,
    save_network,
    solve_equilibrium,
)
from .panel import (
    FilterPolicy,
    MonteCarloDesign,
    PanelConfig,
    SharePanel,
    TransactionRecord,
    aggregate_annual,
    apply_filters,
    compute_shares,
    generate_montecarlo_blocks,
    generate_panel,
    load_transactions,
    save_transactions,
)
from .pricing import (
    BilateralShares,
    CalibratedParams,
    ElasticityDecomposition,
    GeneralizedMarkup,
    GeneralizedOutsideOption,
    MarkupDecomposition,
    StructuralParams,
    bargaining_weight,
    bilateral_markup,
    cost_elasticity,
    derive_eta,
    efficient_bargain_price,
    gamma_oligopoly,
    gamma_oligopsony,
    gamma_omega,
    generalized_markup,
    heatmap_grid,
    lambda_components,
    markup_elasticity,
    markup_share_slopes,
    oligopoly_markup,
    oligopsony_markdown,
    passthrough,
    residual_demand_elasticity,
)
from .regression import (
    FitResult,
    RegressionSpec,
    ols,
    tsls,
    within_transform,
)
from .validation import (
    aggregate_decomposition,
    iv_fit_test,
    match_changes,
    predicted_changes,
)
from .config import RunConfig, default_config, load_config

__version__ = "0.1.0"
