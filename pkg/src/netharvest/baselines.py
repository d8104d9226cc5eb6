"""Reference discovery strategies: MOD greedy, PPR greedy, an online-regression
policy in the NOL style, and a uniform-random floor.

All policies see only the agent's partial view.  Greedy ties break toward the
lower node id so runs are reproducible without a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbedConfig, rank_ppr
from .env import ObservedState
from .errors import ConfigError


def _require_boundary(state: ObservedState) -> list[int]:
    b = sorted(state.boundary)
    if not b:
        raise ConfigError("policy asked to act with an empty boundary")
    return b


def mod_policy(state: ObservedState) -> int:
    """Boundary node with the most known edges into probed targets."""
    best, best_count = None, -1
    for v in _require_boundary(state):
        count = len(state.known_adj.get(v, set()) & state.probed_targets)
        if count > best_count:
            best, best_count = v, count
    return best


def ppr_policy(state: ObservedState, cfg: EmbedConfig | None = None) -> int:
    """Boundary node with the highest personalized-PageRank score."""
    boundary = set(_require_boundary(state))
    ranking = rank_ppr(state, cfg or EmbedConfig())
    for v in ranking.order:
        if int(v) in boundary:
            return int(v)
    raise ConfigError("boundary not covered by the ranking")  # unreachable


def random_policy(state: ObservedState, rng: np.random.Generator) -> int:
    """Uniform draw over the boundary."""
    return int(rng.choice(_require_boundary(state)))


# ------------------------------------------------------------------- NOL


N_FEATURES = 5


@dataclass
class NolModel:
    """Linear reward predictor updated online after every probe.

    Features per candidate: probed-target-neighbor count, probed-background-
    neighbor count, known degree, fraction of known neighbors probed, and the
    PPR score.  The update is a normalized least-mean-squares step, stable
    for any feature scale; exploration is epsilon-greedy.
    """

    lr: float = 0.5
    epsilon: float = 0.1
    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    intercept: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_FEATURES,):
            raise ConfigError(f"NOL model needs {N_FEATURES} weights")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigError("epsilon must lie in [0, 1]")
        if not (0.0 < self.lr < 2.0):
            raise ConfigError("lr must lie in (0, 2) for a stable update")

    def predict(self, features: np.ndarray) -> float:
        return float(self.weights @ np.asarray(features, dtype=np.float64)
                     + self.intercept)


def nol_features(
    state: ObservedState, node: int, ppr_scores: dict[int, float]
) -> np.ndarray:
    nbrs = state.known_adj.get(node, set())
    deg = len(nbrs)
    probed_nbrs = nbrs & state.probed
    tgt = len(nbrs & state.probed_targets)
    return np.array(
        [
            float(tgt),
            float(len(probed_nbrs) - tgt),
            float(deg),
            len(probed_nbrs) / deg if deg else 0.0,
            ppr_scores.get(node, 0.0),
        ]
    )


def _boundary_features(
    state: ObservedState, cfg: EmbedConfig | None = None
) -> dict[int, np.ndarray]:
    ranking = rank_ppr(state, cfg or EmbedConfig())
    scores = {int(v): float(s) for v, s in zip(ranking.order, ranking.scores)}
    return {v: nol_features(state, v, scores) for v in sorted(state.boundary)}


def nol_policy(
    state: ObservedState,
    model: NolModel,
    rng: np.random.Generator,
    cfg: EmbedConfig | None = None,
) -> tuple[int, np.ndarray]:
    """Epsilon-greedy argmax of the model's predicted reward.

    Returns the chosen node together with its feature vector so the caller
    can feed the observed reward back through nol_update.
    """
    feats = _boundary_features(state, cfg)
    if not feats:
        raise ConfigError("policy asked to act with an empty boundary")
    if rng.random() < model.epsilon:
        node = int(rng.choice(sorted(feats)))
        return node, feats[node]
    best, best_pred = None, -np.inf
    for v in sorted(feats):
        pred = model.predict(feats[v])
        if pred > best_pred:
            best, best_pred = v, pred
    return best, feats[best]


def nol_update(model: NolModel, features: np.ndarray, reward: float) -> None:
    """Normalized LMS step toward the observed 0/1 reward."""
    x = np.asarray(features, dtype=np.float64)
    err = reward - model.predict(x)
    scale = model.lr / (1.0 + x @ x)
    model.weights += scale * err * x
    model.intercept += scale * err
