"""Equilibrium stopping of geometric Brownian motion under weighted
(non-exponential) discounting.

Smooth-pasting candidate thresholds, equilibrium-or-not verdicts via the
equivalent inequality conditions, the real-option existence dichotomy, and
independent grid / Monte Carlo verification.
"""

__version__ = "0.1.0"

from .discounting import (  # noqa: F401
    CADI,
    ConstantSensitivity,
    Degenerate,
    DiscountFunction,
    DivergentMomentError,
    Exponential,
    FiniteMixture,
    FromWeights,
    GammaWeights,
    GeneralizedHyperbolic,
    NumericWeights,
    PseudoExponential,
    WeightingDistribution,
    bernstein_report,
    build_discount,
    build_weighting,
    evaluate_discount,
    evaluate_moment,
)
from .model import (  # noqa: F401
    AccuracyError,
    AdmissibilityError,
    AdmissibilityReport,
    CostSpec,
    DivergenceError,
    MarketModel,
    RunningCost,
    admissibility,
    alpha_minus_one,
    alpha_root,
    perpetual_cost,
    reduce_terminal_cost,
)
from .benchmark import BenchmarkSolution, benchmark_value, solve_benchmark  # noqa: F401
from .equilibrium import (  # noqa: F401
    CandidateSolution,
    Verdict,
    VerdictKind,
    assemble_value,
    assemble_w,
    candidate_at,
    classify_candidate,
    rearrangement_covariance,
    solve_candidate,
)
from .realoption import (  # noqa: F401
    FlipResult,
    GhdCertificate,
    RealOptionAnalysis,
    analyze_real_option,
    ghd_certificate,
    lambda_flip_search,
    real_option_value,
    real_option_w,
)
from .roots import SolveError  # noqa: F401
from .stopping import SimulationConfig, StoppingRule  # noqa: F401
from .verify import (  # noqa: F401
    VerificationReport,
    bellman_residuals,
    continuation_floor_scan,
    default_verification_grid,
    run_verification,
    spike_probe_analytic,
    value_bound_scan,
)
from .mc import McEstimate, SpikeTrendReport, mc_cost_estimate, mc_spike_probe  # noqa: F401
