"""Named instance families used across experiments and the benchmark grid.

Every factory is deterministic given its seed and returns the instance
together with an episode seed node drawn from the first target group.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .generators import (
    ForegroundParams,
    PlacementRule,
    SbmParams,
    draw_seed,
    gen_sbm,
    implant_foreground,
)
from .graph import GroundTruthGraph

# benchmark grid axes: background mixing r and target-group density p_t
GRID_R = (0.01, 0.025, 0.05, 0.075, 0.1)
GRID_PT = (0.25, 0.5, 0.75, 1.0)
GRID_REPS = 10


def ten_clique() -> tuple[GroundTruthGraph, int]:
    """A single 10-clique of targets; collecting it takes exactly 9 probes."""
    edges = [(i, j) for i in range(10) for j in range(i + 1, 10)]
    gt = GroundTruthGraph(10, edges, [1] * 10, target_groups=[list(range(10))])
    return gt, 0


def two_clique_bridge() -> tuple[GroundTruthGraph, int]:
    """Two 40-cliques of targets joined by a 2-node path: 0..39, bridge 40-41,
    42..81.  From a seed inside the first clique the minimal collecting route
    is the 39 remaining members, the two bridge nodes, then the whole second
    clique — 81 probes."""
    edges = [(i, j) for i in range(40) for j in range(i + 1, 40)]
    edges += [(i, j) for i in range(42, 82) for j in range(i + 1, 82)]
    edges += [(0, 40), (40, 41), (41, 42)]
    labels = [1] * 40 + [0, 0] + [1] * 40
    groups = [list(range(40)), list(range(42, 82))]
    gt = GroundTruthGraph(82, edges, labels, target_groups=groups)
    return gt, 0


def embedbench_cell(r: float, p_t: float, seed: int) -> tuple[GroundTruthGraph, int]:
    """One instance of the benchmark grid: a dense two-community background
    (n=2000, intra 0.25, inter r) with two implanted 40-node target groups of
    density p_t.

    The groups sit 2-3 hops apart where that is the typical cross-community
    geometry: a node escapes the first group's 1-hop shell with probability
    (1-r)^40, so the eligible pool is the majority of the far community only
    at r=0.01 (~67%, vs ~36% at r=0.025 down to ~1.5% at r=0.1).  Where the
    shell is a minority the hop window opens to 1 and separation is carried
    by p_t alone.
    """
    bg = gen_sbm(SbmParams(n=2000, k=2, p=0.25, r=r), rng_seed=seed)
    # separated placement only while most of the far community is >= 2 hops out
    separated = (1.0 - r) ** 40 >= 0.5
    fg = ForegroundParams(
        n_f=40,
        k_f=2,
        p_f=p_t,
        placement=PlacementRule(min_hop=2 if separated else 1, max_hop=3),
    )
    gt = implant_foreground(bg, fg, rng_seed=seed + 1)
    seed_node = draw_seed(gt, np.random.default_rng(seed + 2))
    return gt, seed_node


def embedbench_grid() -> list[tuple[float, float, int]]:
    """The full (r, p_t, instance_seed) grid: 5 x 4 x 10 = 200 instances."""
    cells = []
    for r in GRID_R:
        for p_t in GRID_PT:
            for rep in range(GRID_REPS):
                cells.append((r, p_t, _cell_seed(r, p_t, rep)))
    return cells


def _cell_seed(r: float, p_t: float, rep: int) -> int:
    # readable and collision-free over the grid: r in per-mille, p_t in percent
    return int(round(r * 1000)) * 1_000_000 + int(round(p_t * 100)) * 1_000 + rep


def nac_sbm(seed: int, n: int = 800) -> tuple[GroundTruthGraph, int]:
    """Sparse two-community background with two implanted 20-cliques two hops
    apart (two intermediate nodes on the shortest connecting route).

    The low background degree keeps the discovery boundary close to the
    64-slot window, which is what makes the second clique reachable for a
    policy that learns to explore.
    """
    bg = gen_sbm(SbmParams(n=n, k=2, p=0.012, r=0.002), rng_seed=seed)
    fg = ForegroundParams(
        n_f=20,
        k_f=2,
        p_f=1.0,
        placement=PlacementRule(min_hop=3, max_hop=3),
    )
    gt = implant_foreground(bg, fg, rng_seed=seed + 1)
    seed_node = draw_seed(gt, np.random.default_rng(seed + 2))
    return gt, seed_node


def make_instance(name: str, seed: int = 0, **kw) -> tuple[GroundTruthGraph, int]:
    """Factory lookup by preset name."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](seed, **kw)


PRESETS = {
    "ten-clique": lambda seed, **kw: ten_clique(),
    "two-clique-82": lambda seed, **kw: two_clique_bridge(),
    "nac-sbm-800": lambda seed, **kw: nac_sbm(seed, **kw),
    "embedbench-cell": lambda seed, r=0.01, p_t=1.0, **kw: embedbench_cell(
        r, p_t, seed
    ),
}
