"""Stochastic submodular cover: adaptive greedy, exact optimal policies and
exhaustive verification of the greedy approximation accounting."""

from .accounting import (
    LEMMAS,
    MarkerSequence,
    RevenueLedger,
    VerificationReport,
    build_ledger,
    build_markers,
    hybrid_policy,
    kappa,
    leadsto,
    verify_all,
    verify_lemma,
    verify_sum_bound,
)
from .greedy import Selector, greedy_policy, greedy_select, unit_price
from .instance import EMPTY, Instance, Subrealization, enumerate_realizations, realization_probability
from .optimal import optimal_policy, optimal_value
from .policy import execute, expected_cost_exact, expected_cost_mc, materialize_tree
from .serialization import instance_from_dict, instance_to_dict
from .utility import ExplicitTable, StochasticCoverage, TruncatedAdditive, compute_eta

__all__ = [
    "EMPTY", "LEMMAS", "ExplicitTable", "Instance", "MarkerSequence", "RevenueLedger", "Selector",
    "StochasticCoverage", "Subrealization", "TruncatedAdditive", "VerificationReport", "build_ledger",
    "build_markers", "compute_eta", "enumerate_realizations", "execute", "expected_cost_exact",
    "expected_cost_mc", "greedy_policy", "greedy_select", "hybrid_policy", "instance_from_dict",
    "instance_to_dict", "kappa", "leadsto", "materialize_tree", "optimal_policy", "optimal_value",
    "realization_probability", "unit_price", "verify_all", "verify_lemma", "verify_sum_bound",
]
