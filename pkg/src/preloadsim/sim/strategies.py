"""Preloading strategies the simulator can drive."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import InfeasibleAllPruned
from ..model import BandwidthModel, DeviceModel, Feed, Plan, Weights
from ..planner import (
    PlannerConfig,
    plan_fixed_nextk_baseline,
    plan_mcts,
    plan_sequential_baseline,
)
from ..timeline import PlaybackState

STRATEGY_KINDS = ("mcts", "sequential", "fixed", "hybrid_off")


@dataclass(frozen=True)
class StrategyId:
    kind: str
    k: int = 2

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {STRATEGY_KINDS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @classmethod
    def parse(cls, text: str) -> StrategyId:
        """``mcts``, ``sequential``, ``hybrid_off``, ``fixed`` or ``fixed:K``."""
        name, _, arg = text.strip().lower().partition(":")
        name = {"hybridoff": "hybrid_off", "fixednextk": "fixed", "seq": "sequential"}.get(name, name)
        if arg:
            if name != "fixed":
                raise ValueError(f"strategy {name!r} takes no argument")
            return cls(name, int(arg))
        return cls(name)

    def __str__(self):
        return f"fixed:{self.k}" if self.kind == "fixed" else self.kind


MCTS = StrategyId("mcts")
SEQUENTIAL = StrategyId("sequential")
HYBRID_OFF = StrategyId("hybrid_off")


def FixedNextK(k: int = 2) -> StrategyId:
    return StrategyId("fixed", k)


@dataclass(frozen=True)
class SimConfig:
    planner: PlannerConfig = field(
        default_factory=lambda: PlannerConfig(horizon=4, simulation_budget=300)
    )
    startup_delay_ms: int = 200
    replan_interval_ms: int = 500
    bitrate_rule: str = "highest_fit"
    predictor_window: int = 5
    master_seed: int = 0

    def __post_init__(self):
        if self.startup_delay_ms < 0:
            raise ValueError("startup delay must be >= 0")
        if self.replan_interval_ms < 1:
            raise ValueError("replan interval must be >= 1 ms")
        if self.predictor_window < 1:
            raise ValueError("predictor window must be >= 1")


# (state, feed, predicted bandwidth, device, weights) -> plan
PlanFn = Callable[[PlaybackState, Feed, BandwidthModel, DeviceModel, Weights], Plan]


def make_planner(strategy, cfg: SimConfig, seed_source) -> PlanFn:
    """Turn a :class:`StrategyId` (or a bare callable) into a plan function.

    ``seed_source`` yields a fresh integer seed per tree-search call.
    """
    if callable(strategy) and not isinstance(strategy, StrategyId):
        return strategy
    kind = strategy.kind
    if kind in ("mcts", "hybrid_off"):

        def mcts(state, feed, bw, device, w):
            pcfg = PlannerConfig(
                horizon=cfg.planner.horizon,
                exploration=cfg.planner.exploration,
                simulation_budget=cfg.planner.simulation_budget,
                time_budget_ms=cfg.planner.time_budget_ms,
                rollout_policy=cfg.planner.rollout_policy,
                rng_seed=seed_source(),
            )
            try:
                plan, _ = plan_mcts(state, feed, device, bw, w, pcfg)
            except InfeasibleAllPruned as exc:
                plan = exc.fallback
            return plan

        return mcts
    if kind == "sequential":
        return lambda state, feed, bw, device, w: plan_sequential_baseline(
            state, feed, device, bw, w, cfg.planner.horizon
        )
    return lambda state, feed, bw, device, w: plan_fixed_nextk_baseline(
        state, feed, strategy.k, cfg.bitrate_rule, bw
    )
