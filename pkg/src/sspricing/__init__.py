"""Joint dynamic pricing and (s, S) ordering for Brownian inventory systems.

Solves the stationary free-boundary problem for the optimal band and
price curve, certifies the candidate against the variational
inequalities, and cross-checks it with a Monte-Carlo simulator and a
discretized-control oracle.
"""

from .cost import CostModel, CustomCost, PowerCost, QuadraticCost
from .demand import CustomDemand, DemandModel, HyperbolicDemand, LinearDemand
from .errors import (
    BlowUp,
    ConfigInvalid,
    ModelInvalid,
    NoBand,
    NoConvergence,
    NoSolution,
    OutOfRange,
    PriceOutOfBounds,
    RootBracketFailure,
    SolverError,
    SpecInvalid,
    SSPricingError,
    StepUnderflow,
    UndefinedAtZero,
    VerificationFailed,
)
from .oracle import (
    ChainProcess,
    ChainSpec,
    ComparisonReport,
    OracleSolution,
    birth_death_step,
    build_chain,
    compare,
    solve_average_reward,
)
from .policy import (
    Policy,
    ValueFunction,
    VerificationReport,
    build_value_function,
    curve_table,
    verify_upper_bound,
)
from .sim import SimConfig, SimResult, estimate_profit, simulate, simulate_path
from .solver import (
    ModelParams,
    PriceProfile,
    Segment,
    SolverOptions,
    WFragment,
    WSolution,
    asymptotic_init,
    band_area,
    find_reorder_levels,
    integrate_w,
    ode_residual,
    price_profile,
    solve_given_band,
    solve_optimal,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUp",
    "ChainProcess",
    "ChainSpec",
    "ComparisonReport",
    "ConfigInvalid",
    "CostModel",
    "CustomCost",
    "CustomDemand",
    "DemandModel",
    "HyperbolicDemand",
    "LinearDemand",
    "ModelInvalid",
    "ModelParams",
    "NoBand",
    "NoConvergence",
    "NoSolution",
    "OracleSolution",
    "OutOfRange",
    "Policy",
    "PowerCost",
    "PriceOutOfBounds",
    "PriceProfile",
    "QuadraticCost",
    "RootBracketFailure",
    "SSPricingError",
    "Segment",
    "SimConfig",
    "SimResult",
    "SolverError",
    "SolverOptions",
    "SpecInvalid",
    "StepUnderflow",
    "UndefinedAtZero",
    "ValueFunction",
    "VerificationFailed",
    "VerificationReport",
    "WFragment",
    "WSolution",
    "asymptotic_init",
    "band_area",
    "birth_death_step",
    "build_chain",
    "build_value_function",
    "compare",
    "curve_table",
    "estimate_profit",
    "find_reorder_levels",
    "integrate_w",
    "ode_residual",
    "price_profile",
    "simulate",
    "simulate_path",
    "solve_average_reward",
    "solve_given_band",
    "solve_optimal",
    "verify_upper_bound",
]
