"""Tensor-train policies for parametric control with domain contraction."""

from .contraction import ContractedPolicy, ParamDistribution, WindowSpec, contract, retrieve_policy
from .cross import CrossConfig, CrossResult, cross_approximate
from .grid import DomainGrid, Grid
from .tt import TensorTrain, tt_from_full, tt_round
from .ttgo import SampleBudget, argmax_retrieve, prioritized_sample
from .ttpi import PolicyModel, TtpiConfig, greedy_action, policy_iteration

__version__ = "0.1.0"

__all__ = [
    "ContractedPolicy", "CrossConfig", "CrossResult", "DomainGrid", "Grid", "ParamDistribution",
    "PolicyModel", "SampleBudget", "TensorTrain", "TtpiConfig", "WindowSpec", "argmax_retrieve",
    "contract", "cross_approximate", "greedy_action", "policy_iteration", "prioritized_sample",
    "retrieve_policy", "tt_from_full", "tt_round",
]
