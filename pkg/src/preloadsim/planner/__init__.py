"""Plan search: UCT tree search, exact oracles and comparator strategies."""

from .baselines import (
    BITRATE_RULES,
    fallback_plan,
    harmonic_mean,
    plan_fixed_nextk_baseline,
    plan_sequential_baseline,
    predict_bandwidth,
    trace_samples_until,
)
from .exhaustive import ENUMERATION_LIMIT, plan_branch_and_bound, plan_bruteforce
from .mcts import MCTS, ROLLOUT_POLICIES, PlannerConfig, SearchStats, expand, plan_mcts, uct_value
from .space import Prefix, SearchSpace

__all__ = [
    "BITRATE_RULES",
    "ENUMERATION_LIMIT",
    "MCTS",
    "PlannerConfig",
    "ROLLOUT_POLICIES",
    "Prefix",
    "SearchSpace",
    "SearchStats",
    "expand",
    "fallback_plan",
    "harmonic_mean",
    "plan_branch_and_bound",
    "plan_bruteforce",
    "plan_fixed_nextk_baseline",
    "plan_mcts",
    "plan_sequential_baseline",
    "predict_bandwidth",
    "trace_samples_until",
    "uct_value",
]
