"""Trading against negatively correlated Gaussian price increments.

Covariance models with negative memory, exact path samplers, closed-form
second-order moments, a price-impact cash ledger, the contrarian strategy
and its controls, and a Monte Carlo harness for profit growth rates.
"""
from .covariance import (
    AssumptionReport,
    CovarianceModel,
    fgn_covariance,
    partial_sum,
    verify_assumption,
)
from .market import (
    LedgerReport,
    LiquidationViolation,
    MarketParams,
    frictionless_check,
    gstar,
    gstar_constant,
    settle,
    settle_batch,
)
from .moments import (
    BoundsCertificate,
    LemmaViolation,
    ProfitTerms,
    SecondOrderTable,
    abs_moment_constant,
    analytic_profit_terms,
    certify_lemmas,
    cov_increment_past,
    q_of_t,
    rho,
    var_s,
)
from .montecarlo import (
    GrowthReport,
    ProfitEstimate,
    SweepReport,
    estimate_expected_profit,
    fit_growth_exponent,
    lambda_sweep,
    theory_exponent,
)
from .paths import (
    PathBatch,
    PathSampler,
    SpectrumDiagnostic,
    SpectrumError,
    derive_seed,
    prices_from_increments,
    sample_paths,
    spectrum_check,
)
from .strategies import Strategy, baselines, contrarian_speeds, paper_contrarian

__version__ = "0.1.0"
