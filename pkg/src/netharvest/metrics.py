"""Evaluation-side metrics: per-step ranking accuracy, boundary-target rank
entropy, their budget-wide aggregate, and the ground-truth-guided traversal
used to score embeddings independently of any learned policy.

Everything here reads ground truth and therefore never feeds back into agent
decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbedConfig, Ranking, rank
from .env import EpisodeConfig, ObservedState, probe, reset, targets_found
from .errors import ConfigError
from .graph import GroundTruthGraph

UNDEFINED = "undefined"  # CSV sentinel for entropy with < 2 boundary targets


@dataclass
class MetricSeries:
    """Per-step evaluation log for one episode; lengths all match."""

    accuracy: list[float]
    entropy: list[float | None]  # None where undefined
    rewards: list[float]
    targets_found: list[int]
    auc: float = field(init=False)

    def __post_init__(self):
        n = len(self.accuracy)
        if not (len(self.entropy) == len(self.rewards) == len(self.targets_found) == n):
            raise ConfigError("metric series lengths disagree")
        self.auc = float(sum(self.accuracy))

    def __len__(self) -> int:
        return len(self.accuracy)


def accuracy_index(
    ranking: Ranking, state: ObservedState, gt: GroundTruthGraph
) -> float:
    """Fraction of all true targets that the ranking surfaces within its top
    candidate slice, sized to the number of undiscovered targets.

    Candidates are the nodes whose labels are still unknown: probed nodes are
    already identified and hold no slice position, so the metric scores only
    the ranking's ability to bring new targets forward.
    """
    total = gt.target_nodes.size
    if total == 0:
        raise ConfigError("instance has no target nodes")
    undiscovered = set(int(v) for v in gt.target_nodes) - state.probed
    k = len(undiscovered)
    if k == 0:
        return 0.0
    hits = 0
    slots = 0
    for v in ranking.order:
        v = int(v)
        if v in state.probed:
            continue
        if v in undiscovered:
            hits += 1
        slots += 1
        if slots == k:
            break
    return hits / total


def gaussian_entropy(var: float) -> float:
    """Differential entropy of a normal with the given variance (nats)."""
    return 0.5 * (1.0 + math.log(2.0 * math.pi * var))


def boundary_entropy(
    ranking: Ranking, state: ObservedState, gt: GroundTruthGraph
) -> float | None:
    """Gaussian entropy of the rank positions of the boundary's true targets;
    None (undefined) below two such nodes."""
    btargets = [v for v in state.boundary if gt.labels[v] == 1]
    if len(btargets) < 2:
        return None
    pos = {int(v): i for i, v in enumerate(ranking.order)}
    positions = np.array([pos[v] for v in btargets], dtype=np.float64)
    return gaussian_entropy(float(positions.var()))  # population normalization


def auc(accuracy_series) -> float:
    """Plain sum of the per-step accuracy values."""
    return float(sum(accuracy_series))


def traversal_metrics(
    gt: GroundTruthGraph,
    seed_node: int,
    cfgs: dict[str, EmbedConfig],
    max_steps: int | None = None,
    rng_seed: int = 0,
) -> dict[str, MetricSeries]:
    """Probe along a ground-truth-guided minimal route until every target is
    collected (or max_steps probes), recording each configured embedding's
    metrics before every probe.  The route never depends on the embeddings,
    so several can be scored in one pass.

    Route rule: any boundary node that is a true target goes first (lowest id
    among them); otherwise the boundary node closest to the nearest
    undiscovered target is probed, ties toward the lower id.  Already-probed
    nodes are never revisited.
    """
    if not cfgs:
        raise ConfigError("need at least one embedding configuration")
    state = reset(gt, EpisodeConfig(seed_node=seed_node, budget=gt.n))
    remaining = set(int(v) for v in gt.target_nodes) - {seed_node}
    from_seed = gt.bfs_distances([seed_node])
    unreachable = sorted(v for v in remaining if from_seed[v] < 0)
    if unreachable:
        raise ConfigError(
            f"targets unreachable from seed {seed_node}: {unreachable[:10]}"
            f"{'...' if len(unreachable) > 10 else ''}"
        )
    accuracy = {name: [] for name in cfgs}
    entropy = {name: [] for name in cfgs}
    rewards, found = [], []
    dist_to_target = None  # recomputed whenever the remaining set shrinks
    step = 0
    while remaining and (max_steps is None or step < max_steps):
        if not state.boundary:
            raise ConfigError("boundary emptied before all targets were collected")
        for name, cfg in cfgs.items():
            ranking = rank(state, cfg, rng_seed=rng_seed * 100_003 + step)
            accuracy[name].append(accuracy_index(ranking, state, gt))
            entropy[name].append(boundary_entropy(ranking, state, gt))
        btargets = [v for v in state.boundary if v in remaining]
        if btargets:
            node = min(btargets)
            dist_to_target = None
        else:
            if dist_to_target is None:
                dist_to_target = gt.bfs_distances(sorted(remaining))
            candidates = [v for v in state.boundary if dist_to_target[v] >= 0]
            if not candidates:
                raise ConfigError("remaining targets unreachable from boundary")
            node = min(candidates, key=lambda v: (dist_to_target[v], v))
        _, r = probe(state, gt, node)
        rewards.append(float(r))
        remaining.discard(node)
        found.append(targets_found(state))
        step += 1
    return {
        name: MetricSeries(accuracy[name], entropy[name], list(rewards), list(found))
        for name in cfgs
    }


def optimal_traversal(
    gt: GroundTruthGraph,
    seed_node: int,
    cfg: EmbedConfig,
    rng_seed: int = 0,
) -> MetricSeries:
    """Single-embedding convenience wrapper around traversal_metrics."""
    return traversal_metrics(gt, seed_node, {"only": cfg}, rng_seed=rng_seed)["only"]
