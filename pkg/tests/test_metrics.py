import math
from collections import deque

import numpy as np
import pytest

from netharvest.embeddings import EmbedConfig, Ranking, rank
from netharvest.env import EpisodeConfig, probe, reset
from netharvest.errors import ConfigError
from netharvest.graph import GroundTruthGraph
from netharvest.metrics import (
    MetricSeries,
    accuracy_index,
    auc,
    boundary_entropy,
    gaussian_entropy,
    optimal_traversal,
)
from netharvest.presets import ten_clique, two_clique_bridge


def play(edges, labels, seed, picks=(), budget=50):
    gt = GroundTruthGraph(len(labels), edges, labels)
    state = reset(gt, EpisodeConfig(seed_node=seed, budget=budget))
    for v in picks:
        probe(state, gt, v)
    return gt, state


# ---------------------------------------------------------------- accuracy


def test_accuracy_all_remaining_targets_on_top():
    # star around the seed; targets 2 and 4 observed but unprobed
    edges = [(0, i) for i in range(1, 7)]
    labels = [1, 0, 1, 0, 1, 0, 0]
    gt, state = play(edges, labels, 0)
    ranking = Ranking(
        order=np.array([2, 4, 0, 1, 3, 5, 6]), scores=np.linspace(7, 1, 7)
    )
    assert accuracy_index(ranking, state, gt) == pytest.approx(2 / 3)


def test_accuracy_zero_when_targets_rank_low():
    edges = [(0, i) for i in range(1, 7)]
    labels = [1, 0, 1, 0, 1, 0, 0]
    gt, state = play(edges, labels, 0)
    ranking = Ranking(
        order=np.array([1, 3, 5, 6, 0, 2, 4]), scores=np.linspace(7, 1, 7)
    )
    assert accuracy_index(ranking, state, gt) == 0.0


def test_accuracy_gives_probed_nodes_no_candidate_slot():
    # probed target 1 ranks first yet the single candidate slot goes to 2
    edges = [(0, i) for i in range(1, 7)] + [(1, 2)]
    labels = [1, 1, 1, 0, 0, 0, 0]
    gt, state = play(edges, labels, 0, picks=[1])
    ranking = Ranking(
        order=np.array([1, 0, 2, 3, 4, 5, 6]), scores=np.linspace(7, 1, 7)
    )
    assert accuracy_index(ranking, state, gt) == pytest.approx(1 / 3)


def test_accuracy_matches_set_oracle_on_random_plays():
    rng = np.random.default_rng(2)
    edges = [
        (0, 1), (0, 2), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4),
        (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (3, 9), (2, 10), (10, 11),
    ]
    labels = [1, 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1]
    gt, state = play(edges, labels, 0)
    cfg = EmbedConfig(algorithm="ppr")
    total = int(gt.target_nodes.size)
    for _ in range(8):
        if not state.boundary:
            break
        ranking = rank(state, cfg)
        undisc = {int(v) for v in gt.target_nodes} - state.probed
        candidates = [int(v) for v in ranking.order if int(v) not in state.probed]
        hits = len(set(candidates[: len(undisc)]) & undisc)
        assert accuracy_index(ranking, state, gt) == pytest.approx(hits / total)
        probe(state, gt, int(rng.choice(sorted(state.boundary))))


def test_accuracy_requires_targets():
    edges = [(0, 1)]
    gt = GroundTruthGraph(2, edges, [1, 0])
    state = reset(gt, EpisodeConfig(seed_node=0, budget=2))
    gt2 = GroundTruthGraph(2, edges, [0, 0])
    ranking = Ranking(order=np.array([0, 1]), scores=np.array([1.0, 0.5]))
    with pytest.raises(ConfigError):
        accuracy_index(ranking, state, gt2)


# ----------------------------------------------------------------- entropy


def test_gaussian_entropy_closed_forms():
    assert gaussian_entropy(1 / (2 * math.pi)) == pytest.approx(0.5, abs=1e-12)
    assert gaussian_entropy(math.e / (2 * math.pi)) == pytest.approx(1.0, abs=1e-12)


def test_boundary_entropy_two_targets_ranks_3_and_5():
    edges = [(0, i) for i in range(1, 7)]
    labels = [1, 0, 1, 0, 1, 0, 0]
    gt, state = play(edges, labels, 0)  # boundary targets: 2 and 4
    order = np.array([0, 1, 3, 2, 5, 4, 6])  # 2 at position 3, 4 at position 5
    ranking = Ranking(order=order, scores=np.linspace(7, 1, 7))
    want = 0.5 * (1 + math.log(2 * math.pi))  # Var = 1
    got = boundary_entropy(ranking, state, gt)
    assert got == pytest.approx(want, abs=1e-12)
    assert got == pytest.approx(1.4189385332046727, abs=1e-9)


def test_boundary_entropy_undefined_below_two_targets():
    edges = [(0, 1), (0, 2)]
    labels = [1, 1, 0]
    gt, state = play(edges, labels, 0)  # single boundary target
    ranking = Ranking(order=np.array([0, 1, 2]), scores=np.array([3.0, 2.0, 1.0]))
    assert boundary_entropy(ranking, state, gt) is None


def test_boundary_entropy_is_rank_shift_invariant():
    # entropy depends only on the spread of the target positions
    edges = [(0, i) for i in range(1, 7)]
    labels = [1, 0, 1, 0, 1, 0, 0]
    gt, state = play(edges, labels, 0)
    a = Ranking(order=np.array([2, 4, 0, 1, 3, 5, 6]), scores=np.linspace(7, 1, 7))
    b = Ranking(order=np.array([1, 3, 2, 4, 0, 5, 6]), scores=np.linspace(7, 1, 7))
    assert boundary_entropy(a, state, gt) == pytest.approx(
        boundary_entropy(b, state, gt), abs=1e-12
    )


# --------------------------------------------------------------------- auc


def test_auc_constant_series():
    assert auc([1.0] * 81) == 81.0
    assert auc([0.0] * 10) == 0.0


def test_auc_matches_series_sum():
    gt, seed = ten_clique()
    ms = optimal_traversal(gt, seed, EmbedConfig(algorithm="mod"))
    assert ms.auc == auc(ms.accuracy)


def test_metric_series_validates_lengths():
    with pytest.raises(ConfigError):
        MetricSeries([1.0], [None, None], [0.0], [0])


# --------------------------------------------------------- traversal route


def test_traversal_ten_clique_is_nine_steps():
    gt, seed = ten_clique()
    ms = optimal_traversal(gt, seed, EmbedConfig(algorithm="mod"))
    assert len(ms) == 9
    assert ms.targets_found[-1] == 9
    assert sum(ms.rewards) == 9.0


def test_traversal_two_clique_preset_is_81_steps():
    gt, seed = two_clique_bridge()
    ms = optimal_traversal(gt, seed, EmbedConfig(algorithm="ppr"))
    assert len(ms) == 81
    assert ms.targets_found[-1] == 79  # seed excluded from the count
    assert sum(ms.rewards) == 79.0


def test_traversal_never_reprobes():
    gt, seed = two_clique_bridge()
    state = reset(gt, EpisodeConfig(seed_node=seed, budget=gt.n))
    ms = optimal_traversal(gt, seed, EmbedConfig(algorithm="mod"))
    assert len(ms) == 81  # the env itself raises on re-probes; length confirms


def test_traversal_unreachable_target_raises():
    edges = [(0, 1), (2, 3)]
    labels = [1, 0, 0, 1]
    gt = GroundTruthGraph(4, edges, labels)
    with pytest.raises(ConfigError, match="unreachable"):
        optimal_traversal(gt, 0, EmbedConfig(algorithm="mod"))


def brute_min_probes(gt, seed):
    """Exhaustive shortest collecting sequence over probed-set states."""
    targets = frozenset(int(v) for v in gt.target_nodes)
    start = frozenset([seed])
    if targets <= start:
        return 0
    q = deque([(start, 0)])
    seen = {start}
    while q:
        probed, d = q.popleft()
        boundary = set()
        for u in probed:
            boundary.update(int(w) for w in gt.neighbors(u))
        boundary -= probed
        for v in sorted(boundary):
            nxt = frozenset(probed | {v})
            if targets <= nxt:
                return d + 1
            if nxt not in seen:
                seen.add(nxt)
                q.append((nxt, d + 1))
    return None


def test_traversal_minimal_on_path_tree_and_bridge():
    cases = []
    # path with targets at both ends
    cases.append(([(i, i + 1) for i in range(4)], [1, 0, 0, 0, 1], 0))
    # tree: branches of different depth, targets at the two leaves
    tree = [(0, 1), (1, 2), (0, 3), (3, 4), (4, 5)]
    cases.append((tree, [1, 0, 1, 0, 0, 1], 0))
    # miniature clique-bridge-clique
    mini = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (4, 6), (5, 6)]
    cases.append((mini, [1, 1, 1, 0, 1, 1, 1], 0))
    for edges, labels, seed in cases:
        gt = GroundTruthGraph(len(labels), edges, labels)
        want = brute_min_probes(gt, seed)
        got = len(optimal_traversal(gt, seed, EmbedConfig(algorithm="mod")))
        assert got == want


def test_traversal_minimal_on_random_small_instances():
    for trial in range(12):
        rng = np.random.default_rng(trial)
        n = 10
        edges = set()
        for v in range(1, n):
            edges.add((int(rng.integers(v)), v))
        for _ in range(4):
            u, v = sorted(rng.choice(n, 2, replace=False).tolist())
            edges.add((u, v))
        labels = [0] * n
        tids = rng.choice(n, 3, replace=False)
        for t in tids:
            labels[int(t)] = 1
        seed = int(tids[0])
        gt = GroundTruthGraph(n, sorted(edges), labels)
        want = brute_min_probes(gt, seed)
        got = len(optimal_traversal(gt, seed, EmbedConfig(algorithm="mod")))
        assert got == want, f"trial {trial}"


def test_traversal_entropy_has_undefined_entries():
    # path: at most one boundary target is ever visible
    edges = [(i, i + 1) for i in range(4)]
    labels = [1, 0, 0, 0, 1]
    gt = GroundTruthGraph(5, edges, labels)
    ms = optimal_traversal(gt, 0, EmbedConfig(algorithm="mod"))
    assert all(e is None for e in ms.entropy)


def test_traversal_series_lengths_agree():
    gt, seed = two_clique_bridge()
    ms = optimal_traversal(gt, seed, EmbedConfig(algorithm="mod"))
    assert len(ms.accuracy) == len(ms.entropy) == len(ms.rewards) == len(
        ms.targets_found
    ) == 81
