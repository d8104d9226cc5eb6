"""Ground-truth instance generators.

Synthetic backgrounds (stochastic block model, LFR-style benchmark graphs),
implanted Erdos-Renyi foregrounds that overwrite the hosts' induced background
subgraph, and ingestion of real edge-list files.  Every generator is a pure
function of its parameters and an integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GenerationError, ParseError
from .graph import GroundTruthGraph


@dataclass
class SbmParams:
    """Equal-sized communities (remainder goes to the first one)."""

    n: int
    k: int
    p: list[float]  # per-community intra-edge probability; one value broadcasts
    r: float

    def __post_init__(self):
        if isinstance(self.p, (int, float)):
            self.p = [float(self.p)] * self.k
        self.p = [float(x) for x in self.p]
        if len(self.p) == 1 and self.k > 1:
            self.p = self.p * self.k
        if len(self.p) != self.k:
            raise ConfigError(f"need {self.k} intra probabilities, got {len(self.p)}")
        for pi in self.p + [self.r]:
            if not (0.0 <= pi <= 1.0):
                raise ConfigError(f"probability {pi} outside [0, 1]")
        if any(pi <= self.r for pi in self.p):
            raise ConfigError("each intra-community probability must exceed r")
        if self.k < 1 or self.n < self.k:
            raise ConfigError("need n >= k >= 1")

    def sizes(self) -> list[int]:
        base = self.n // self.k
        sizes = [base] * self.k
        sizes[0] += self.n - base * self.k
        return sizes


@dataclass
class LfrParams:
    n: int
    tau1: float  # degree exponent
    tau2: float  # community-size exponent
    mu: float  # fraction of each node's edges that leave its community
    avg_deg: float
    d_max: int
    min_c: int
    max_c: int
    max_retries: int = 20
    rewire_rounds: int = 50

    def __post_init__(self):
        if self.tau1 <= 1 or self.tau2 <= 1:
            raise ConfigError("tau1 and tau2 must exceed 1")
        if not (0.0 <= self.mu <= 1.0):
            raise ConfigError("mu must lie in [0, 1]")
        if not (1 <= self.min_c <= self.max_c <= self.n):
            raise ConfigError("need 1 <= min_c <= max_c <= n")
        if not (1 <= self.avg_deg <= self.d_max):
            raise ConfigError("need 1 <= avg_deg <= d_max")


@dataclass
class PlacementRule:
    """Host selection for implanted groups.

    The first group's hosts are drawn uniformly from one community.  Each
    later group is drawn from nodes whose hop distance to the union of the
    earlier host sets (measured on the background graph) lies in
    [min_hop, max_hop].
    """

    community: int | None = None
    min_hop: int = 2
    max_hop: int = 3


@dataclass
class ForegroundParams:
    n_f: int
    k_f: int = 1
    p_f: float = 1.0
    placement: PlacementRule = field(default_factory=PlacementRule)

    def __post_init__(self):
        if not (0.0 <= self.p_f <= 1.0):
            raise ConfigError(f"p_f {self.p_f} outside [0, 1]")
        if self.n_f < 1 or self.k_f < 1:
            raise ConfigError("n_f and k_f must be positive")


def gen_sbm(params: SbmParams, rng_seed: int) -> GroundTruthGraph:
    """Sample a stochastic block model background; all labels 0."""
    rng = np.random.default_rng(rng_seed)
    sizes = params.sizes()
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    comm = np.repeat(np.arange(params.k), sizes)
    chunks = []
    for i in range(params.k):
        lo = bounds[i]
        iu, ju = np.triu_indices(sizes[i], k=1)
        mask = rng.random(iu.size) < params.p[i]
        chunks.append(np.column_stack([iu[mask] + lo, ju[mask] + lo]))
    for i in range(params.k):
        for j in range(i + 1, params.k):
            block = rng.random((sizes[i], sizes[j])) < params.r
            ui, vj = np.nonzero(block)
            chunks.append(np.column_stack([ui + bounds[i], vj + bounds[j]]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return GroundTruthGraph(
        params.n, edges, np.zeros(params.n, dtype=np.int8), communities=comm
    )


def _truncated_powerlaw_pmf(exponent: float, lo: int, hi: int) -> np.ndarray:
    support = np.arange(lo, hi + 1, dtype=np.float64)
    w = support**-exponent
    return w / w.sum()


def _degree_distribution(params: LfrParams) -> tuple[np.ndarray, np.ndarray]:
    """Integer support and pmf with mean tuned to avg_deg by blending the two
    adjacent integer lower cutoffs."""
    hi = params.d_max

    def mean_for(lo: int) -> float:
        pmf = _truncated_powerlaw_pmf(params.tau1, lo, hi)
        return float(np.arange(lo, hi + 1) @ pmf)

    if mean_for(1) > params.avg_deg:
        lo = 1
        q = 0.0
    else:
        lo = 1
        while lo < hi and mean_for(lo + 1) <= params.avg_deg:
            lo += 1
        if lo == hi:  # only exactly avg_deg == d_max lands here
            q = 0.0
        else:
            m0, m1 = mean_for(lo), mean_for(lo + 1)
            q = (params.avg_deg - m0) / (m1 - m0)
    support = np.arange(1, hi + 1, dtype=np.int64)
    pmf = np.zeros(hi, dtype=np.float64)
    pmf[lo - 1 :] += (1.0 - q) * _truncated_powerlaw_pmf(params.tau1, lo, hi)
    if q > 0.0:
        pmf[lo:] += q * _truncated_powerlaw_pmf(params.tau1, lo + 1, hi)
    return support, pmf


def _community_sizes(params: LfrParams, rng: np.random.Generator) -> list[int]:
    support = np.arange(params.min_c, params.max_c + 1, dtype=np.int64)
    pmf = _truncated_powerlaw_pmf(params.tau2, params.min_c, params.max_c)
    sizes: list[int] = []
    while sum(sizes) < params.n:
        sizes.append(int(rng.choice(support, p=pmf)))
    excess = sum(sizes) - params.n
    # shave the excess off the largest communities, respecting min_c
    order = sorted(range(len(sizes)), key=lambda i: -sizes[i])
    for i in order:
        if excess == 0:
            break
        cut = min(excess, sizes[i] - params.min_c)
        sizes[i] -= cut
        excess -= cut
    if excess > 0:
        # drop the last community and retry absorption into the others
        sizes.sort()
        dropped = sizes.pop(0)
        for i in range(len(sizes)):
            room = params.max_c - sizes[i]
            add = min(room, dropped)
            sizes[i] += add
            dropped -= add
            if dropped == 0:
                break
        if dropped > 0 or sum(sizes) != params.n:
            raise GenerationError("community sizes cannot be made to sum to n")
    return sizes


def _pair_stubs(
    stubs: np.ndarray,
    rng: np.random.Generator,
    existing: set[tuple[int, int]],
    group_of: np.ndarray | None,
    rounds: int,
) -> tuple[list[tuple[int, int]], int]:
    """Random matching of stubs into simple edges.

    Rejected pairs (self-loops, duplicates, and same-group pairs when
    ``group_of`` is given) go back into the pool for another shuffle; stubs
    left after the round cap are dropped.  Returns (edges, dropped stubs).
    """
    edges: list[tuple[int, int]] = []
    seen = set(existing)
    pool = np.array(stubs, dtype=np.int64)
    for _ in range(rounds):
        if pool.size < 2:
            break
        rng.shuffle(pool)
        cut = pool.size - (pool.size % 2)
        pairs, leftover = pool[:cut].reshape(-1, 2), pool[cut:]
        bad = []
        for u, v in pairs:
            u, v = int(u), int(v)
            if u > v:
                u, v = v, u
            if (
                u == v
                or (u, v) in seen
                or (group_of is not None and group_of[u] == group_of[v])
            ):
                bad.extend((u, v))
                continue
            seen.add((u, v))
            edges.append((u, v))
        nxt = np.array(bad + [int(x) for x in leftover], dtype=np.int64)
        if nxt.size == pool.size:  # no progress this round
            break
        pool = nxt
    return edges, int(pool.size)


def gen_lfr(params: LfrParams, rng_seed: int) -> GroundTruthGraph:
    """LFR-style background: power-law degrees and community sizes, mixing mu.

    Configuration-model wiring with bounded rewiring rounds; unmatched stubs
    are dropped, and the achieved mixing fraction is reported in
    ``graph.meta['achieved_mu']``.
    """
    rng = np.random.default_rng(rng_seed)
    support, pmf = _degree_distribution(params)

    last_err = None
    for _ in range(params.max_retries):
        degrees = rng.choice(support, size=params.n, p=pmf)
        d_in = np.rint((1.0 - params.mu) * degrees).astype(np.int64)
        sizes = _community_sizes(params, rng)
        comm = _assign_communities(d_in, sizes, rng)
        if comm is None:
            last_err = "no community large enough for some node's intra degree"
            continue
        return _wire_lfr(params, degrees, d_in, comm, len(sizes), rng)
    raise GenerationError(f"LFR assignment failed after {params.max_retries} retries: {last_err}")


def _assign_communities(
    d_in: np.ndarray, sizes: list[int], rng: np.random.Generator
) -> np.ndarray | None:
    n = d_in.size
    comm = np.full(n, -1, dtype=np.int64)
    room = np.array(sizes, dtype=np.int64)
    caps = np.array(sizes, dtype=np.int64)
    for v in np.argsort(-d_in, kind="stable"):
        feasible = np.flatnonzero((room > 0) & (caps - 1 >= d_in[v]))
        if feasible.size == 0:
            return None
        c = int(rng.choice(feasible))
        comm[v] = c
        room[c] -= 1
    return comm


def _wire_lfr(
    params: LfrParams,
    degrees: np.ndarray,
    d_in: np.ndarray,
    comm: np.ndarray,
    n_comm: int,
    rng: np.random.Generator,
) -> GroundTruthGraph:
    n = params.n
    edges: list[tuple[int, int]] = []
    edge_set: set[tuple[int, int]] = set()
    for c in range(n_comm):
        members = np.flatnonzero(comm == c)
        stubs = np.repeat(members, d_in[members])
        if stubs.size % 2 == 1:
            # drop one stub from the highest-intra-degree member
            victim = members[np.argmax(d_in[members])]
            idx = np.flatnonzero(stubs == victim)[0]
            stubs = np.delete(stubs, idx)
        got, _ = _pair_stubs(stubs, rng, edge_set, None, params.rewire_rounds)
        edges.extend(got)
        edge_set.update(got)
    d_out = degrees - d_in
    inter_stubs = np.repeat(np.arange(n), d_out)
    if inter_stubs.size % 2 == 1:
        inter_stubs = inter_stubs[:-1]
    got, dropped = _pair_stubs(inter_stubs, rng, edge_set, comm, params.rewire_rounds)
    edges.extend(got)

    arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    g = GroundTruthGraph(n, arr, np.zeros(n, dtype=np.int8), communities=comm)
    inter = int(np.sum(comm[arr[:, 0]] != comm[arr[:, 1]])) if arr.size else 0
    g.meta = {
        "achieved_mu": inter / max(1, arr.shape[0]),
        "dropped_stubs": dropped,
        "realized_avg_deg": 2.0 * arr.shape[0] / n,
    }
    return g


def implant_foreground(
    bg: GroundTruthGraph, params: ForegroundParams, rng_seed: int
) -> GroundTruthGraph:
    """Implant k_f disjoint target groups of n_f nodes each.

    Host nodes lose the background edges among themselves and gain an
    ER(n_f, p_f) subgraph; their labels become 1.  Hop separation between
    groups follows ``params.placement`` and is measured on the background
    graph.
    """
    if params.k_f * params.n_f > bg.n:
        raise ConfigError("k_f * n_f exceeds the number of nodes")
    rng = np.random.default_rng(rng_seed)
    rule = params.placement

    if bg.communities is not None:
        n_comm = int(bg.communities.max()) + 1
        c = rule.community if rule.community is not None else int(rng.integers(n_comm))
        if not (0 <= c < n_comm):
            raise ConfigError(f"placement community {c} out of range")
        pool = np.flatnonzero(bg.communities == c)
    else:
        pool = np.arange(bg.n)
    if pool.size < params.n_f:
        raise GenerationError(
            f"community has {pool.size} nodes, cannot host a group of {params.n_f}"
        )
    groups = [np.sort(rng.choice(pool, size=params.n_f, replace=False))]

    for _ in range(1, params.k_f):
        placed = np.concatenate(groups)
        dist = bg.bfs_distances(placed)
        eligible = np.flatnonzero(
            (dist >= rule.min_hop) & (dist <= rule.max_hop)
        )
        if eligible.size < params.n_f:
            raise GenerationError(
                f"only {eligible.size} nodes lie {rule.min_hop}..{rule.max_hop} hops "
                f"from the placed groups; need {params.n_f}"
            )
        groups.append(np.sort(rng.choice(eligible, size=params.n_f, replace=False)))

    group_of = np.full(bg.n, -1, dtype=np.int64)
    for gi, hosts in enumerate(groups):
        group_of[hosts] = gi
    e = bg.edges
    same_group = (group_of[e[:, 0]] >= 0) & (group_of[e[:, 0]] == group_of[e[:, 1]])
    kept = e[~same_group]

    new_chunks = [kept]
    for hosts in groups:
        iu, ju = np.triu_indices(params.n_f, k=1)
        mask = rng.random(iu.size) < params.p_f
        new_chunks.append(np.column_stack([hosts[iu[mask]], hosts[ju[mask]]]))
    labels = bg.labels.copy()
    for hosts in groups:
        labels[hosts] = 1
    g = GroundTruthGraph(
        bg.n,
        np.concatenate(new_chunks),
        labels,
        communities=bg.communities,
        target_groups=groups,
        id_map=bg.id_map,
    )
    return g


def draw_seed(gt: GroundTruthGraph, rng: np.random.Generator, group: int = 0) -> int:
    """Episode seed: uniform over one target group's hosts (first by default)."""
    if gt.target_groups:
        pool = gt.target_groups[group]
    else:
        pool = gt.target_nodes
    if pool.size == 0:
        raise ConfigError("graph has no target nodes to seed from")
    return int(rng.choice(np.sort(pool)))


def load_edgelist(path, target_spec=None, rng_seed: int = 0) -> GroundTruthGraph:
    """Load a plain-text edge list (one edge per line, '#' comments).

    Node ids may be arbitrary tokens; they are re-indexed contiguously in
    first-appearance order and the original->internal map is kept on the
    graph.  Duplicate edges collapse; self-loops are dropped (count recorded
    in ``meta``).  ``target_spec`` is either a label-file path (one original
    node id per line) or :class:`ForegroundParams` for a synthetic implant.
    """
    ids: dict[str, int] = {}
    edges: set[tuple[int, int]] = set()
    n_self = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.replace(",", " ").split()
            if len(toks) != 2:
                raise ParseError(f"{path}:{lineno}: expected a node-id pair, got {raw.strip()!r}")
            u = ids.setdefault(toks[0], len(ids))
            v = ids.setdefault(toks[1], len(ids))
            if u == v:
                n_self += 1
                continue
            edges.add((min(u, v), max(u, v)))
    n = len(ids)
    arr = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    g = GroundTruthGraph(n, arr, np.zeros(n, dtype=np.int8), id_map=dict(ids))
    g.meta = {"dropped_self_loops": n_self}

    if target_spec is None:
        return g
    if isinstance(target_spec, ForegroundParams):
        return implant_foreground(g, target_spec, rng_seed)
    labels = g.labels.copy()
    with open(target_spec, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            tok = raw.split("#", 1)[0].strip()
            if not tok:
                continue
            if tok not in ids:
                raise ConfigError(
                    f"{target_spec}:{lineno}: target id {tok!r} does not appear in the edge list"
                )
            labels[ids[tok]] = 1
    return GroundTruthGraph(n, arr, labels, id_map=dict(ids))
