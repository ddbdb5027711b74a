"""Batch clearing engine for limit orders and CFMMs."""

from .analysis import budget_invariance_probe, family_identity_check, rule_demand, trading_rule_family, wgs_probe
from .convex import ProgramState, SolveOptions, gradient, objective, solve_convex
from .density import DensityPair, density_cfmm, density_from_function, g_derivative, g_value, inverse_density
from .errors import *  # noqa: F401,F403
from .functions import (
    ConstantProduct,
    ConstantSum,
    Custom,
    FeeWrapped,
    HSpec,
    Lmsr,
    Monomial,
    WeightedProduct,
    apply_fee_wrapper,
    demand_response,
    spot_valuations,
)
from .kernels import BACKEND
from .market import (
    BatchInstance,
    BatchSolution,
    CfmmDecl,
    LimitBuyOffer,
    LimitSellOffer,
    PriceVector,
    normalize_prices,
    validate_instance,
)
from .rational import RationalSolution, extract_rational
from .reference import ReferenceOptions, legacy_exact_constant_check, solve_two_asset
from .sequencer import SequenceResult, run_sequence
from .tatonnement import TatonnementOptions, aggregate_demand, solve_tatonnement
from .verify import VerifierReport, check_nobeyond, verify_solution

__version__ = "0.1.0"
