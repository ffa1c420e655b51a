"""Optimal liquidation with limit orders: value functions, quotes and checks.

Hot loops run in numba-compiled kernels; set ``LIMITEXEC_BACKEND=numpy`` to
use the pure-numpy fallback.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, InvalidArgumentError, InvalidStateError, LimitExecError,
                     NumericalFailure, OutOfRangeError, PreconditionError, ResourceLimitError)
from .intensity import (ExponentialIntensity, TabulatedIntensity, figure1_tilde,
                        rescale_for_order_size, validate_hypotheses)
from .hamiltonian import (ConstrainedContext, QuoteContext, constrained_hamiltonian,
                          hamiltonian_value, inverse_hamiltonian, limit_hamiltonian,
                          limit_optimal_quote, optimal_quote)
from .value_solver import (LiquidationProblem, MarketMakerProblem, MultiAssetProblem, AssetSpec,
                           compute_quote_surface, solve_constrained, solve_market_maker,
                           solve_multi_asset, solve_theta, solve_theta_exponential)
from .asymptotics import asymptotic_quote, asymptotic_theta
from .limit_pde import (ImpactBridge, ac_hamiltonian, ac_impact_function, convergence_study,
                        solve_limit_hj)
from .execution_sim import (ConstantPolicy, ShiftedPolicy, SimulationConfig, SurfacePolicy,
                            certainty_equivalent, policy_tournament, simulate)

__all__ = [n for n in dir() if not n.startswith("_")]
