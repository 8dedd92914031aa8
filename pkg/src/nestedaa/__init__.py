"""Classical simulation of nested amplitude amplification for 0/1 knapsack."""

from .amptrack import BiasConfig, MarkedEnsemble
from .gas import CostLedger, Incumbent, baseline_gas
from .instances import CorrType, KnapsackInstance, Ordering, generate_instance
from .ksolve import MarkedSetTooLarge, Solution
from .nested import DepthPolicy, iif, nested_gas

__version__ = "0.1.0"

__all__ = [
    "BiasConfig",
    "CorrType",
    "CostLedger",
    "DepthPolicy",
    "Incumbent",
    "KnapsackInstance",
    "MarkedEnsemble",
    "MarkedSetTooLarge",
    "Ordering",
    "Solution",
    "baseline_gas",
    "generate_instance",
    "iif",
    "nested_gas",
]
