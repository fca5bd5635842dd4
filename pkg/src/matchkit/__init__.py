"""Separable transferable-utility matching markets.

Equilibrium computation, nonparametric identification, comoment estimation,
local comparative statics and a finite-population assignment oracle.
"""

from .comparative_statics import Shock, comparative_statics
from .equilibrium import EquilibriumResult, ipfp_logit, solve_equilibrium
from .errors import MatchkitError
from .heterogeneity import Logit, SimulatedSmoothed, emax, simulated_from_seed
from .identification import BasisFamily, estimate_lambda, recover_surplus
from .market import Matching, ValidatedMarket, make_market, validate_market
from .onetype import LOGISTIC, NORMAL, OneTypeModel, one_type_differentials, solve_one_type

__version__ = "0.1.0"

__all__ = [
    "BasisFamily", "EquilibriumResult", "LOGISTIC", "Logit", "MatchkitError", "Matching",
    "NORMAL", "OneTypeModel", "Shock", "SimulatedSmoothed", "ValidatedMarket",
    "comparative_statics", "emax", "estimate_lambda", "ipfp_logit", "make_market",
    "one_type_differentials", "recover_surplus", "simulated_from_seed",
    "solve_equilibrium", "solve_one_type",
    "validate_market",
]
