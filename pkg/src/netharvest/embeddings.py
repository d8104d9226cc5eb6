"""Seed-centric node ranking and fixed-size state compression.

Six interchangeable rankers score every observed node by how promising it
looks from the probed targets' vantage point; the best-first order then
permutes the known adjacency matrix, which is truncated to the top ``k``
slots and stacked with a diagonal label channel.  The result is the
constant-size tensor the policy/value network consumes, together with a
boolean action mask over the slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .env import ObservedState
from .errors import ConfigError, ConvergenceError

ALGORITHMS = ("ppr", "mod", "pca", "eigenmap", "glee", "node2vec")

# below this many observed nodes, dense eigensolvers beat ARPACK and are exact
_DENSE_EIG_CUTOFF = 400


@dataclass
class EmbedConfig:
    algorithm: str = "ppr"
    alpha: float = 0.8  # PPR damping
    dim: int = 64  # embedding dimension for the spectral / walk methods
    walks: int = 5  # random walks started per node
    walk_length: int = 40
    window: int = 2  # skip-gram context radius
    negatives: int = 2  # negative samples per positive pair
    ppr_tol: float = 1e-10
    eig_tol: float = 1e-8
    max_iter: int = 10_000

    def __post_init__(self):
        self.algorithm = self.algorithm.lower()
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown ranking algorithm {self.algorithm!r}; pick one of {ALGORITHMS}"
            )
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha {self.alpha} outside (0, 1)")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.walks < 1 or self.walk_length < 2 or self.window < 1:
            raise ConfigError("walk parameters must be positive (length >= 2)")


@dataclass
class Ranking:
    """Best-first permutation of the observed node set.

    ``scores[i]`` belongs to ``order[i]``; scores are non-increasing along
    the order and ties break toward the smaller node id.
    """

    order: np.ndarray  # (n_obs,) int64 node ids, best first
    scores: np.ndarray  # (n_obs,) float64 aligned with order


@dataclass
class RankedState:
    """Top-k slice of the reordered observation, ready for the network.

    Slot 0 holds the best-ranked node.  When fewer than ``k`` nodes are
    observed the trailing slots stay zero with the mask off; ``slots`` uses
    -1 there.
    """

    slots: np.ndarray  # (k,) int64, -1 = padding
    adj_channel: np.ndarray  # (k, k) float32 symmetric 0/1
    label_channel: np.ndarray  # (k, k) float32, diagonal +1/-1/0
    action_mask: np.ndarray  # (k,) bool, true iff slot node is probe-able
    k: int

    def tensor(self) -> np.ndarray:
        return np.stack([self.adj_channel, self.label_channel])


def _observed_nodes(state: ObservedState) -> np.ndarray:
    return np.array(sorted(state.observed), dtype=np.int64)


def _make_ranking(nodes: np.ndarray, scores: np.ndarray) -> Ranking:
    idx = np.lexsort((nodes, -scores))
    return Ranking(order=nodes[idx], scores=np.asarray(scores, dtype=np.float64)[idx])


def _known_csr(state: ObservedState, nodes: np.ndarray):
    """Symmetric CSR (indptr, indices) of the known graph on ``nodes`` order."""
    pos = {int(v): i for i, v in enumerate(nodes)}
    src, dst = [], []
    for u, v in state.known_edges():
        iu, iv = pos[u], pos[v]
        src += [iu, iv]
        dst += [iv, iu]
    n = nodes.size
    src = np.array(src, dtype=np.int64)
    dst = np.array(dst, dtype=np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst, pos


def _target_positions(state: ObservedState, pos: dict) -> np.ndarray:
    return np.array(sorted(pos[t] for t in state.probed_targets), dtype=np.int64)


# --------------------------------------------------------------------- PPR


def rank_ppr(state: ObservedState, cfg: EmbedConfig) -> Ranking:
    """Personalized PageRank from the probed targets on the known graph.

    Fixed-point iteration of pi = (1-alpha)*v + alpha*pi*W with W the
    random-walk matrix; rows of degree-0 nodes teleport back to v so the
    scores stay a probability vector.
    """
    nodes = _observed_nodes(state)
    indptr, indices, pos = _known_csr(state, nodes)
    tpos = _target_positions(state, pos)
    if tpos.size == 0:
        raise ConfigError("PPR ranking needs at least one probed target")
    n = nodes.size
    deg = np.diff(indptr).astype(np.float64)
    v = np.zeros(n)
    v[tpos] = 1.0 / tpos.size
    src = np.repeat(np.arange(n), np.diff(indptr))
    pi = v.copy()
    a = cfg.alpha
    for _ in range(cfg.max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            outflow = np.where(deg > 0, pi / deg, 0.0)
        spread = np.bincount(indices, weights=outflow[src], minlength=n)
        dangling = pi[deg == 0].sum()
        nxt = (1.0 - a) * v + a * (spread + dangling * v)
        if np.max(np.abs(nxt - pi)) < cfg.ppr_tol:
            pi = nxt
            break
        pi = nxt
    else:
        raise ConvergenceError(f"PPR did not converge in {cfg.max_iter} iterations")
    return _make_ranking(nodes, pi)


# --------------------------------------------------------------------- MOD


def rank_mod(state: ObservedState) -> Ranking:
    """Count of known edges into the probed target set, best first."""
    nodes = _observed_nodes(state)
    pos = {int(v): i for i, v in enumerate(nodes)}
    scores = np.zeros(nodes.size, dtype=np.float64)
    for t in sorted(state.probed_targets):
        for nb in state.known_adj.get(t, ()):  # full list: t has been probed
            scores[pos[nb]] += 1.0
    return _make_ranking(nodes, scores)


# ------------------------------------------------------------ spectral trio


def _dense_known_adj(state: ObservedState, nodes: np.ndarray) -> np.ndarray:
    pos = {int(v): i for i, v in enumerate(nodes)}
    A = np.zeros((nodes.size, nodes.size), dtype=np.float64)
    for u, v in state.known_edges():
        A[pos[u], pos[v]] = A[pos[v], pos[u]] = 1.0
    return A


def _check_residuals(mult, vals: np.ndarray, vecs: np.ndarray, tol: float):
    res = mult(vecs) - vecs * vals
    worst = np.max(np.linalg.norm(res, axis=0)) if vals.size else 0.0
    bound = tol * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    if worst > bound:
        raise ConvergenceError(
            f"eigenpair residual {worst:.3e} exceeds tolerance {bound:.3e}"
        )


def _sym_eigs(M, n: int, k: int, which: str, cfg: EmbedConfig):
    """k extreme eigenpairs of a symmetric operator, residual-checked.

    ``which`` is 'SA' (smallest algebraic) or 'LA' (largest).  Dense path for
    small problems, ARPACK above the cutoff; both go through the same
    residual gate so a silent non-convergence cannot slip out.
    """
    k = min(k, n)
    if n <= _DENSE_EIG_CUTOFF or k >= n - 1:
        Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)
        vals, vecs = np.linalg.eigh(Md)
        if which == "LA":
            vals, vecs = vals[::-1][:k], vecs[:, ::-1][:, :k]
        else:
            vals, vecs = vals[:k], vecs[:, :k]
        _check_residuals(lambda V: Md @ V, vals, vecs, cfg.eig_tol)
        return vals, vecs
    Ms = sp.csr_matrix(M)
    v0 = np.linspace(1.0, 2.0, n)
    v0 /= np.linalg.norm(v0)
    try:
        vals, vecs = spla.eigsh(
            Ms, k=k, which=which, v0=v0, maxiter=cfg.max_iter, tol=0
        )
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver failed to converge: {exc}") from exc
    order = np.argsort(vals if which == "SA" else -vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    _check_residuals(lambda V: Ms @ V, vals, vecs, cfg.eig_tol)
    return vals, vecs


def _adjacency_operator(state: ObservedState, nodes: np.ndarray):
    n = nodes.size
    if n <= _DENSE_EIG_CUTOFF:
        return _dense_known_adj(state, nodes)
    indptr, indices, _ = _known_csr(state, nodes)
    data = np.ones(indices.size, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def _mean_distance_scores(emb: np.ndarray, tpos: np.ndarray) -> np.ndarray:
    diffs = emb[:, None, :] - emb[None, tpos, :]
    return -np.linalg.norm(diffs, axis=2).mean(axis=1)


def rank_pca(state: ObservedState, cfg: EmbedConfig) -> Ranking:
    """Leading adjacency eigenvectors; closer to the targets is better."""
    nodes = _observed_nodes(state)
    pos = {int(v): i for i, v in enumerate(nodes)}
    tpos = _target_positions(state, pos)
    if tpos.size == 0:
        raise ConfigError("PCA ranking needs at least one probed target")
    A = _adjacency_operator(state, nodes)
    _, vecs = _sym_eigs(A, nodes.size, cfg.dim, "LA", cfg)
    return _make_ranking(nodes, _mean_distance_scores(vecs, tpos))


def _n_components(indptr: np.ndarray, indices: np.ndarray, n: int) -> int:
    seen = np.zeros(n, dtype=bool)
    comps = 0
    for s in range(n):
        if seen[s]:
            continue
        comps += 1
        stack = [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            for w in indices[indptr[u] : indptr[u + 1]]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
    return comps


def _laplacian_rank(state: ObservedState, cfg: EmbedConfig, end: str) -> Ranking:
    nodes = _observed_nodes(state)
    indptr, indices, pos = _known_csr(state, nodes)
    tpos = _target_positions(state, pos)
    if tpos.size == 0:
        raise ConfigError("Laplacian rankings need at least one probed target")
    n = nodes.size
    deg = np.diff(indptr).astype(np.float64)
    if n <= _DENSE_EIG_CUTOFF:
        L = np.diag(deg) - _dense_known_adj(state, nodes)
    else:
        A = sp.csr_matrix(
            (np.ones(indices.size), indices, indptr), shape=(n, n)
        )
        L = sp.diags(deg) - A
    if end == "low":
        # the null space (one constant-per-component vector) carries no
        # geometry; skip one vector per connected component
        skip = _n_components(indptr, indices, n)
        vals, vecs = _sym_eigs(L, n, skip + cfg.dim, "SA", cfg)
        emb = vecs[:, skip:]
    else:
        _, emb = _sym_eigs(L, n, cfg.dim, "LA", cfg)
    if emb.shape[1] == 0:  # tiny graph: fall back to the raw best vector
        emb = vecs[:, :1] if end == "low" else emb
    center = emb[tpos].mean(axis=0)
    scores = np.abs(emb @ center)
    return _make_ranking(nodes, scores)


def rank_eigenmap(state: ObservedState, cfg: EmbedConfig) -> Ranking:
    """Low end of the Laplacian spectrum, trivial vectors skipped."""
    return _laplacian_rank(state, cfg, "low")


def rank_glee(state: ObservedState, cfg: EmbedConfig) -> Ranking:
    """High end of the Laplacian spectrum, scored like the eigenmap."""
    return _laplacian_rank(state, cfg, "high")


# ---------------------------------------------------------------- node2vec


def _simulate_walks(
    indptr: np.ndarray,
    indices: np.ndarray,
    n: int,
    walks: int,
    length: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Unbiased lockstep random walks; -1 pads walks stuck at a sink."""
    cur = np.repeat(np.arange(n, dtype=np.int64), walks)
    out = np.full((cur.size, length), -1, dtype=np.int64)
    out[:, 0] = cur
    alive = np.ones(cur.size, dtype=bool)
    deg = np.diff(indptr)
    for t in range(1, length):
        live = np.flatnonzero(alive)
        if live.size == 0:
            break
        d = deg[cur[live]]
        stuck = d == 0
        alive[live[stuck]] = False
        live = live[~stuck]
        if live.size == 0:
            break
        d = deg[cur[live]]
        off = (rng.random(live.size) * d).astype(np.int64)
        cur[live] = indices[indptr[cur[live]] + off]
        out[live, t] = cur[live]
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


_STEP_CAP = 8  # max per-node gradient multiplicity inside one mini-batch


def _segment_capped_step(
    weights: np.ndarray, idx: np.ndarray, grads: np.ndarray, lr: float
) -> None:
    """weights[u] -= lr * mean(grads where idx == u) * min(count, cap).

    Low-multiplicity nodes keep plain summed-SGD behaviour; hub nodes — which
    show up dozens of times per mini-batch on dense graphs — get their
    compounded stale-gradient step capped so the weights cannot blow up.
    """
    n = weights.shape[0]
    counts = np.bincount(idx, minlength=n)
    seen = counts > 0
    pick = sp.csr_matrix(
        (np.ones(idx.size, weights.dtype), (idx, np.arange(idx.size))),
        shape=(n, idx.size),
    )
    sums = pick @ grads
    cnt = counts[seen].astype(weights.dtype)
    scale = lr * np.minimum(cnt, _STEP_CAP) / cnt
    weights[seen] -= scale[:, None] * sums[seen]


def _sgns_embed(
    walks: np.ndarray, n: int, cfg: EmbedConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Skip-gram with negative sampling over the walk corpus.

    Returns (embedding, trained-mask); nodes that never appear in a positive
    pair keep their init and are flagged untrained.
    """
    centers, contexts = [], []
    for off in range(1, cfg.window + 1):
        if off >= walks.shape[1]:
            break
        a = walks[:, :-off].ravel()
        b = walks[:, off:].ravel()
        ok = (a >= 0) & (b >= 0)
        centers.append(a[ok])
        contexts.append(b[ok])
        centers.append(b[ok])  # symmetric context
        contexts.append(a[ok])
    if not centers:
        return np.zeros((n, cfg.dim)), np.zeros(n, dtype=bool)
    centers = np.concatenate(centers)
    contexts = np.concatenate(contexts)
    perm = rng.permutation(centers.size)
    centers, contexts = centers[perm], contexts[perm]

    visits = np.bincount(walks[walks >= 0].ravel(), minlength=n).astype(np.float64)
    noise = visits**0.75
    noise_sum = noise.sum()
    if noise_sum == 0:
        noise = np.full(n, 1.0 / n)
    else:
        noise /= noise_sum
    noise_cdf = np.cumsum(noise)
    noise_cdf[-1] = 1.0

    dim = cfg.dim
    w_in = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    # random (not zero) output init: with mini-batch passes this few, a zero
    # init never bootstraps and the inputs stay at their starting noise
    w_out = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    trained = np.zeros(n, dtype=bool)
    trained[centers] = True
    trained[contexts] = True

    negatives = np.searchsorted(
        noise_cdf, rng.random((centers.size, cfg.negatives)), side="right"
    )
    # small corpora get proportionally smaller batches: quality needs enough
    # sequential stages, large graphs need the vectorization
    batch = int(np.clip(centers.size // 64, 2048, 16384))
    n_batches = int(np.ceil(centers.size / batch))
    lr0, lr1 = 0.025, 0.0005
    for bi in range(n_batches):
        lr = lr0 + (lr1 - lr0) * bi / max(1, n_batches - 1)
        c = centers[bi * batch : (bi + 1) * batch]
        o = contexts[bi * batch : (bi + 1) * batch]
        neg = negatives[bi * batch : (bi + 1) * batch]
        vc = w_in[c]  # (B, d)
        vo = w_out[o]
        vn = w_out[neg]  # (B, neg, d)
        s_pos = _sigmoid(np.einsum("bd,bd->b", vc, vo))
        s_neg = _sigmoid(np.einsum("bd,bnd->bn", vc, vn))
        g_pos = s_pos - 1.0  # (B,)
        g_neg = s_neg  # (B, neg)
        grad_c = g_pos[:, None] * vo + np.einsum("bn,bnd->bd", g_neg, vn)
        _segment_capped_step(w_in, c, grad_c, lr)
        _segment_capped_step(w_out, o, g_pos[:, None] * vc, lr)
        _segment_capped_step(
            w_out,
            neg.ravel(),
            (g_neg[..., None] * vc[:, None, :]).reshape(-1, dim),
            lr,
        )
    return w_in.astype(np.float64), trained


def rank_node2vec(state: ObservedState, cfg: EmbedConfig, rng_seed: int) -> Ranking:
    """Walk-based embedding of the known graph, scored by target proximity."""
    nodes = _observed_nodes(state)
    indptr, indices, pos = _known_csr(state, nodes)
    tpos = _target_positions(state, pos)
    if tpos.size == 0:
        raise ConfigError("node2vec ranking needs at least one probed target")
    rng = np.random.default_rng(rng_seed)
    walks = _simulate_walks(indptr, indices, nodes.size, cfg.walks, cfg.walk_length, rng)
    emb, trained = _sgns_embed(walks, nodes.size, cfg, rng)
    scores = _mean_distance_scores(emb, tpos)
    scores[~trained] = -np.inf  # never visited alongside anything: rank last
    return _make_ranking(nodes, scores)


# -------------------------------------------------------------- compression


def rank(state: ObservedState, cfg: EmbedConfig, rng_seed: int = 0) -> Ranking:
    """Dispatch to the configured ranking algorithm."""
    if cfg.algorithm == "ppr":
        return rank_ppr(state, cfg)
    if cfg.algorithm == "mod":
        return rank_mod(state)
    if cfg.algorithm == "pca":
        return rank_pca(state, cfg)
    if cfg.algorithm == "eigenmap":
        return rank_eigenmap(state, cfg)
    if cfg.algorithm == "glee":
        return rank_glee(state, cfg)
    return rank_node2vec(state, cfg, rng_seed)


def compress(state: ObservedState, ranking: Ranking, k: int) -> RankedState:
    """Reorder by rank, truncate to k slots, stack adjacency+label channels."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    top = ranking.order[:k]
    pos = {int(v): i for i, v in enumerate(top)}
    adj = np.zeros((k, k), dtype=np.float32)
    for i, u in enumerate(top):
        known = state.known_adj.get(int(u))
        if not known:
            continue
        for w in known:
            j = pos.get(w)
            if j is not None:
                adj[i, j] = adj[j, i] = 1.0
    lab = np.zeros((k, k), dtype=np.float32)
    mask = np.zeros(k, dtype=bool)
    slots = np.full(k, -1, dtype=np.int64)
    for i, u in enumerate(top):
        u = int(u)
        slots[i] = u
        y = state.known_labels.get(u)
        if y is not None:
            lab[i, i] = 1.0 if y == 1 else -1.0
        mask[i] = u in state.boundary
    return RankedState(slots=slots, adj_channel=adj, label_channel=lab, action_mask=mask, k=k)
