"""Complete ground-truth graph with binary node labels, hidden from agents.

Agent-facing code only ever sees the partial view in :mod:`netharvest.env`;
evaluation code may read labels and adjacency directly from here.
"""

from __future__ import annotations

import numpy as np


class GroundTruthGraph:
    """Immutable simple undirected graph plus a binary target label per node.

    ``labels[v] == 1`` marks a target node.  Optional metadata records the
    community partition and the host sets of implanted target groups; both
    are produced by the generators and consumed by placement/evaluation code,
    never by agents.

    Backgrounds straight out of a generator may carry no target at all; the
    at-least-one-target requirement is enforced where an episode starts, not
    at construction.
    """

    def __init__(
        self,
        n: int,
        edges: np.ndarray,
        labels: np.ndarray,
        communities: np.ndarray | None = None,
        target_groups: list[np.ndarray] | None = None,
        id_map: dict | None = None,
    ):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        labels = np.asarray(labels, dtype=np.int8)
        if labels.shape != (n,):
            raise ValueError(f"label vector has length {labels.shape}, expected ({n},)")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if edges.size and np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        # normalize to u < v and reject duplicates
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        order = np.lexsort((hi, lo))
        lo, hi = lo[order], hi[order]
        if lo.size > 1 and np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
            raise ValueError("duplicate edges are not allowed")

        self.n = int(n)
        self.edges = np.column_stack([lo, hi])
        self.labels = labels
        self.communities = communities if communities is None else np.asarray(communities, dtype=np.int64)
        self.target_groups = target_groups
        self.id_map = id_map
        self.meta: dict = {}

        # CSR-style neighbor index over both edge directions
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        self._nbr = dst[order]
        self._off = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._off, src + 1, 1)
        np.cumsum(self._off, out=self._off)

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of ``v``."""
        return self._nbr[self._off[v] : self._off[v + 1]]

    def degree(self, v: int) -> int:
        return int(self._off[v + 1] - self._off[v])

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < nbrs.size and nbrs[i] == v)

    @property
    def target_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.labels == 1)

    def bfs_distances(self, sources) -> np.ndarray:
        """Hop distances from a source set; unreachable nodes get -1."""
        dist = np.full(self.n, -1, dtype=np.int64)
        frontier = np.asarray(sorted(set(int(s) for s in sources)), dtype=np.int64)
        dist[frontier] = 0
        d = 0
        while frontier.size:
            nxt = []
            for u in frontier:
                nbrs = self.neighbors(u)
                new = nbrs[dist[nbrs] < 0]
                dist[new] = d + 1
                nxt.append(new)
            frontier = np.unique(np.concatenate(nxt)) if nxt else np.empty(0, dtype=np.int64)
            d += 1
        return dist
