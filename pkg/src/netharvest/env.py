"""Incomplete-network probing environment.

An episode starts from a seed target node.  Each probe spends one unit of
budget, reveals the probed node's label and full neighbor list, and pays
reward 1 exactly when the probed node is a target.  The agent-visible state
never exposes labels of unprobed nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EpisodeOverError, InvalidActionError
from .graph import GroundTruthGraph

INITIAL_REVEAL_RULES = ("seed_only",)


@dataclass
class EpisodeConfig:
    seed_node: int
    budget: int
    initial_reveal: str = "seed_only"
    rng_seed: int = 0

    def __post_init__(self):
        if self.initial_reveal not in INITIAL_REVEAL_RULES:
            raise ConfigError(f"unknown initial_reveal rule {self.initial_reveal!r}")
        if self.budget < 0:
            raise ConfigError("budget must be nonnegative")


@dataclass
class ObservedState:
    """The agent's partial view of the graph.

    ``boundary`` is exactly the action set: nodes observed as neighbors of
    probed nodes but not yet probed themselves.  ``known_labels`` holds only
    probed nodes (label reveal is tied to probing).  ``known_adj`` stores the
    revealed edges in both directions.
    """

    seed: int
    budget: int
    rng_seed: int = 0
    probed: set[int] = field(default_factory=set)
    probed_order: list[int] = field(default_factory=list)
    probed_targets: set[int] = field(default_factory=set)
    observed: set[int] = field(default_factory=set)
    boundary: set[int] = field(default_factory=set)
    known_labels: dict[int, int] = field(default_factory=dict)
    known_adj: dict[int, set[int]] = field(default_factory=dict)
    step: int = 0

    def known_edges(self):
        """Revealed edges as (u, v) pairs with u < v."""
        for u in sorted(self.known_adj):
            for v in sorted(self.known_adj[u]):
                if u < v:
                    yield (u, v)

    @property
    def n_known_edges(self) -> int:
        return sum(len(s) for s in self.known_adj.values()) // 2

    def copy(self) -> "ObservedState":
        return ObservedState(
            seed=self.seed,
            budget=self.budget,
            rng_seed=self.rng_seed,
            probed=set(self.probed),
            probed_order=list(self.probed_order),
            probed_targets=set(self.probed_targets),
            observed=set(self.observed),
            boundary=set(self.boundary),
            known_labels=dict(self.known_labels),
            known_adj={u: set(s) for u, s in self.known_adj.items()},
            step=self.step,
        )


def reset(gt: GroundTruthGraph, cfg: EpisodeConfig) -> ObservedState:
    """Start an episode: the seed is probed, its neighbors enter the boundary."""
    s = int(cfg.seed_node)
    if not (0 <= s < gt.n):
        raise ConfigError(f"seed node {s} out of range")
    if gt.labels[s] != 1:
        raise ConfigError(f"seed node {s} is not a target node")
    state = ObservedState(seed=s, budget=cfg.budget, rng_seed=cfg.rng_seed)
    _reveal(state, gt, s)
    return state


def _reveal(state: ObservedState, gt: GroundTruthGraph, a: int) -> None:
    state.probed.add(a)
    state.probed_order.append(a)
    state.observed.add(a)
    state.boundary.discard(a)
    label = int(gt.labels[a])
    state.known_labels[a] = label
    if label == 1:
        state.probed_targets.add(a)
    adj_a = state.known_adj.setdefault(a, set())
    for v in gt.neighbors(a):
        v = int(v)
        adj_a.add(v)
        state.known_adj.setdefault(v, set()).add(a)
        if v not in state.observed:
            state.observed.add(v)
            state.boundary.add(v)


def probe(state: ObservedState, gt: GroundTruthGraph, a: int) -> tuple[ObservedState, int]:
    """Probe boundary node ``a`` in place; returns the state and the 0/1 reward.

    Reveals a's label and all of its ground-truth edges (including edges to
    other boundary nodes).  Newly seen neighbors join the boundary.
    """
    a = int(a)
    if state.step >= state.budget:
        raise EpisodeOverError(f"budget {state.budget} exhausted")
    if a not in state.boundary:
        raise InvalidActionError(f"node {a} is not in the boundary set")
    _reveal(state, gt, a)
    state.step += 1
    return state, int(gt.labels[a])


def is_done(state: ObservedState) -> bool:
    """Episode ends on budget exhaustion or an empty boundary, whichever first."""
    return state.step >= state.budget or not state.boundary


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma**t * r_t with the first reward at exponent 0."""
    if not (0.0 <= gamma <= 1.0):
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
    rewards = list(rewards)
    if not rewards:
        raise ConfigError("empty reward sequence")
    total = 0.0
    g = 1.0
    for r in rewards:
        total += g * r
        g *= gamma
    return total


def targets_found(state: ObservedState, include_seed: bool = False) -> int:
    """Number of probed target nodes.

    The seed is given rather than discovered, so it is excluded by default.
    """
    n = len(state.probed_targets)
    if not include_seed and state.seed in state.probed_targets:
        n -= 1
    return n
