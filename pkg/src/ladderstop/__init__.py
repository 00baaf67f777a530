"""Threshold solutions of one-sided optimal stopping problems via ladder variables."""
from .distributions import Bernoulli, DivergenceError, FinitePMF, Gaussian, TwoSidedExp, degenerate
from .models import (
    AR1, ASCENDING, DESCENDING, ODDS, RANDOM_WALK, SHEPP_SHIRYAEV,
    ChainModel, ProblemError, StoppingProblem, validate_opt_condition,
)
from .rewards import (
    ConstantReward, ExponentialReward, LogisticReward, OddsReward, PowerReward, PutReward, TableReward,
)
from .rng import RandomStream

__version__ = "0.1.0"
