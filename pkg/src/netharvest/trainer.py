"""Actor-critic training for network discovery.

Offline phase: several agents roll out the stochastic policy on their own
generated instances, transitions land in an on-policy buffer, and each window
runs a value update, recomputes advantages with the fresh value net, takes a
clipped policy-gradient step, then refreshes the behavior snapshot.  Online
phase: a single agent keeps updating per probe while harvesting one instance.

Returns are truncated discounted sums over horizon H (no bootstrap by
default); the advantage baseline is the mean value over currently available
actions, with the unnormalized-sum variant behind a config flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .approximator import (
    LOGITS,
    VALUES,
    AdamState,
    NetSpec,
    ParamSet,
    adam_step,
    backward,
    forward,
    init_params,
    load_checkpoint,
    policy_entropy,
    save_checkpoint,
    softmax_policy,
)
from .embeddings import EmbedConfig, RankedState, compress, rank
from .env import EpisodeConfig, discounted_return, is_done, probe, reset, targets_found
from .errors import ConfigError, ContractError
from .graph import GroundTruthGraph


@dataclass
class Transition:
    s: RankedState
    a: int  # slot index, unmasked in s
    r: float
    s_next: RankedState
    agent: int
    episode: int
    t: int
    probs_old: np.ndarray  # behavior distribution at s (frozen snapshot)

    def __post_init__(self):
        if not self.s.action_mask[self.a]:
            raise ContractError(f"action slot {self.a} was masked in its state")


class ReplayBuffer:
    """Per-agent, time-ordered transition store; cleared after every update."""

    def __init__(self, n_agents: int, window: int):
        self.capacity = n_agents * window
        self._by_agent: dict[int, list[Transition]] = {i: [] for i in range(n_agents)}

    def add(self, tr: Transition) -> None:
        if len(self) >= self.capacity:
            raise ContractError("replay buffer over capacity; missing clear()?")
        self._by_agent.setdefault(tr.agent, []).append(tr)

    def per_agent(self) -> dict[int, list[Transition]]:
        return self._by_agent

    def clear(self) -> None:
        for lst in self._by_agent.values():
            lst.clear()

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_agent.values())

    def all(self) -> list[Transition]:
        out = []
        for i in sorted(self._by_agent):
            out.extend(self._by_agent[i])
        return out


@dataclass
class TrainConfig:
    T: int = 32  # rollout window
    H: int = 4  # return horizon
    c: float = 0.2  # entropy coefficient
    epsilon: float = 0.1  # PPO clip
    gamma: float = 0.1
    lambda_lr: float = 1e-4
    agents: int = 8
    epochs: int = 50
    k: int = 64
    budget: int = 120
    channels: int = 64
    n_conv: int = 3
    advantage_mode: str = "mean"  # or "sum" (unnormalized baseline)
    bootstrap: bool = False
    micro_batch: int = 16
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must lie in (0, 1)")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError("gamma must lie in [0, 1]")
        if min(self.T, self.H, self.agents, self.k, self.budget, self.epochs) < 1:
            raise ConfigError("T, H, agents, k, budget, epochs must be positive")
        if self.advantage_mode not in ("mean", "sum"):
            raise ConfigError("advantage_mode must be 'mean' or 'sum'")
        if self.c < 0 or self.lambda_lr <= 0:
            raise ConfigError("c must be >= 0 and lambda_lr > 0")


def online_config(**overrides) -> TrainConfig:
    """Single-agent per-step update regime."""
    base = dict(
        T=1, H=1, gamma=1.0, epsilon=0.2, c=0.0, lambda_lr=1e-3, agents=1
    )
    base.update(overrides)
    return TrainConfig(**base)


def net_specs(cfg: TrainConfig) -> tuple[NetSpec, NetSpec]:
    policy = NetSpec(k=cfg.k, mode=LOGITS, channels=cfg.channels, n_conv=cfg.n_conv)
    value = NetSpec(k=cfg.k, mode=VALUES, channels=cfg.channels, n_conv=cfg.n_conv)
    return policy, value


# ------------------------------------------------------------------ targets


def compute_targets(
    buffer: ReplayBuffer,
    H: int,
    gamma: float,
    value_spec: NetSpec | None = None,
    params_phi: ParamSet | None = None,
    bootstrap: bool = False,
) -> list[tuple[Transition, float]]:
    """Truncated discounted returns per transition.

    Q_t sums gamma**i * r_{t+i} over the next H rewards, stopping at the
    episode or window boundary.  Optional bootstrap adds gamma**H times the
    best available value at the cut-off state.
    """
    out = []
    for agent in sorted(buffer.per_agent()):
        trs = buffer.per_agent()[agent]
        for i, tr in enumerate(trs):
            q = 0.0
            g = 1.0
            j = i
            while j < len(trs) and j - i < H and trs[j].episode == tr.episode:
                q += g * trs[j].r
                g *= gamma
                j += 1
            if (
                bootstrap
                and j - i == H
                and j < len(trs)
                and trs[j].episode == tr.episode
            ):
                if params_phi is None or value_spec is None:
                    raise ConfigError("bootstrap needs the value net")
                s = trs[j].s
                vals = forward(value_spec, params_phi, s.tensor())
                if s.action_mask.any():
                    q += g * float(np.max(vals[s.action_mask]))
            out.append((tr, q))
    return out


# -------------------------------------------------------------- value / adv


def _stack(batch: list[RankedState]) -> np.ndarray:
    return np.stack([s.tensor() for s in batch])


def value_loss(
    value_spec: NetSpec,
    params_phi: ParamSet,
    batch: list[tuple[RankedState, int, float]],
    micro_batch: int = 16,
) -> tuple[float, np.ndarray]:
    """Mean squared error of Q_phi(s)[a] against the truncated return."""
    n = len(batch)
    if n == 0:
        return 0.0, np.zeros_like(params_phi.flat)
    grad = np.zeros_like(params_phi.flat)
    loss = 0.0
    for lo in range(0, n, micro_batch):
        part = batch[lo : lo + micro_batch]
        x = _stack([s for s, _, _ in part])
        preds = forward(value_spec, params_phi, x)
        up = np.zeros_like(preds)
        for row, (_, a, y) in enumerate(part):
            err = preds[row, a] - y
            loss += err * err
            up[row, a] = 2.0 * err / n
        grad += backward(value_spec, params_phi, x, up)
    return loss / n, grad


def advantages(
    value_spec: NetSpec,
    params_phi: ParamSet,
    states: list[RankedState],
    actions: list[int],
    mode: str = "mean",
) -> np.ndarray:
    """Q(s,a) minus the baseline over currently available (unmasked) actions."""
    if not states:
        return np.zeros(0)
    x = _stack(states)
    q = forward(value_spec, params_phi, x)
    out = np.zeros(len(states))
    for i, (s, a) in enumerate(zip(states, actions)):
        m = s.action_mask
        if not m[a]:
            raise ContractError("advantage of a masked action")
        base = q[i, m].mean() if mode == "mean" else q[i, m].sum()
        out[i] = q[i, a] - base
    return out


def advantage(
    value_spec: NetSpec,
    params_phi: ParamSet,
    s: RankedState,
    a: int,
    mode: str = "mean",
) -> float:
    return float(advantages(value_spec, params_phi, [s], [a], mode)[0])


# ---------------------------------------------------------------------- PPO


def clipped_objective(rho: float, adv: float, epsilon: float) -> float:
    """min(rho*adv, clip(rho, 1-eps, 1+eps)*adv) — the per-sample surrogate."""
    return min(rho * adv, float(np.clip(rho, 1.0 - epsilon, 1.0 + epsilon)) * adv)


def ppo_loss(
    policy_spec: NetSpec,
    params_theta: ParamSet,
    theta_old: ParamSet | None,
    batch: list[tuple[RankedState, int]],
    advs: np.ndarray,
    epsilon: float,
    c: float,
    probs_old: list[np.ndarray] | None = None,
    micro_batch: int = 16,
) -> tuple[float, np.ndarray]:
    """Negated clipped surrogate plus entropy bonus, with its exact gradient.

    The caller descends this loss, which ascends the clipped objective.  The
    old-policy probabilities may come from the frozen snapshot directly or be
    recomputed from ``theta_old``; on-policy data guarantees pi_old(a) > 0,
    and a zero probability is treated as a contract violation.
    """
    n = len(batch)
    if n == 0:
        return 0.0, np.zeros_like(params_theta.flat)
    grad = np.zeros_like(params_theta.flat)
    total = 0.0
    for lo in range(0, n, micro_batch):
        part = batch[lo : lo + micro_batch]
        part_adv = advs[lo : lo + micro_batch]
        x = _stack([s for s, _ in part])
        masks = np.stack([s.action_mask for s, _ in part])
        logits = forward(policy_spec, params_theta, x)
        p = softmax_policy(logits, masks)
        if probs_old is not None:
            p_old = np.stack(probs_old[lo : lo + micro_batch])
        else:
            if theta_old is None:
                raise ConfigError("need theta_old or cached old probabilities")
            p_old = softmax_policy(forward(policy_spec, theta_old, x), masks)
        up = np.zeros_like(p)
        for i, ((s, a), adv) in enumerate(zip(part, part_adv)):
            if p_old[i, a] <= 0.0:
                raise ContractError(
                    "old policy assigns zero probability to an on-policy action"
                )
            rho = p[i, a] / p_old[i, a]
            total += clipped_objective(rho, adv, epsilon)
            # gradient flows only when the unclipped branch is active
            if rho * adv <= np.clip(rho, 1.0 - epsilon, 1.0 + epsilon) * adv:
                coeff = adv * rho / n
                one_hot = np.zeros(p.shape[1])
                one_hot[a] = 1.0
                up[i] += coeff * (one_hot - p[i])
            if c > 0:
                ent = policy_entropy(p[i])
                total_c = np.zeros(p.shape[1])
                live = p[i] > 0
                total_c[live] = -p[i, live] * (np.log(p[i, live]) + ent)
                up[i] += c * total_c / n
        grad += backward(policy_spec, params_theta, x, up, mask=masks)
        if c > 0:
            total += c * float(policy_entropy(p).sum())
    loss = -(total / n)
    return loss, -grad


# ------------------------------------------------------------------ rollout


@dataclass
class AgentContext:
    """One agent's instance, episode state, and private rng."""

    agent_id: int
    gt: GroundTruthGraph
    state: object  # ObservedState
    rng: np.random.Generator
    episode: int = 0
    rewards: list[float] = field(default_factory=list)
    done: bool = False
    ranked: RankedState | None = None
    ranking: object = None
    fallback_probes: int = 0

    def refresh_ranked(self, embed: EmbedConfig, k: int, embed_seed: int) -> None:
        self.ranking = rank(self.state, embed, rng_seed=embed_seed)
        self.ranked = compress(self.state, self.ranking, k)


def _embed_seed(base: int, agent: int, episode: int, step: int) -> int:
    return (base * 1_000_003 + agent * 10_007 + episode * 101 + step) % (2**31)


def rollout(
    contexts: list[AgentContext],
    policy_spec: NetSpec,
    theta_old: ParamSet,
    cfg: TrainConfig,
    buffer: ReplayBuffer,
) -> None:
    """Advance every live agent up to T probes under the frozen policy.

    Actions are sampled from the masked softmax.  If every slot is masked
    (all boundary nodes rank below the truncation) the agent probes its
    best-ranked boundary node as a fallback and the step is not recorded,
    since no slot represents it.
    """
    for _ in range(cfg.T):
        live = [ctx for ctx in contexts if not ctx.done]
        if not live:
            return
        x = np.stack([ctx.ranked.tensor() for ctx in live])
        masks = np.stack([ctx.ranked.action_mask for ctx in live])
        samplable = masks.any(axis=1)
        probs = np.zeros((len(live), cfg.k))
        if samplable.any():
            logits = forward(policy_spec, theta_old, x[samplable])
            probs[samplable] = softmax_policy(
                np.atleast_2d(logits), np.atleast_2d(masks[samplable])
            )
        for row, ctx in enumerate(live):
            if samplable[row]:
                p = probs[row] / probs[row].sum()
                slot = int(ctx.rng.choice(cfg.k, p=p))
                node = int(ctx.ranked.slots[slot])
            else:
                # fallback: best-ranked boundary node, unrepresented by slots
                node = _best_boundary_fallback(ctx)
                slot = None
                ctx.fallback_probes += 1
            s_before = ctx.ranked
            _, r = probe(ctx.state, ctx.gt, node)
            ctx.rewards.append(float(r))
            step = ctx.state.step
            ctx.refresh_ranked(
                cfg.embed, cfg.k, _embed_seed(cfg.seed, ctx.agent_id, ctx.episode, step)
            )
            if slot is not None:
                buffer.add(
                    Transition(
                        s=s_before,
                        a=slot,
                        r=float(r),
                        s_next=ctx.ranked,
                        agent=ctx.agent_id,
                        episode=ctx.episode,
                        t=step - 1,
                        probs_old=probs[row].copy(),
                    )
                )
            if is_done(ctx.state):
                ctx.done = True


def _best_boundary_fallback(ctx: AgentContext) -> int:
    if not ctx.state.boundary:
        raise ContractError("fallback requested with an empty boundary")
    for node in ctx.ranking.order:
        if node in ctx.state.boundary:
            return int(node)
    raise ContractError("boundary node missing from ranking")


# ------------------------------------------------------------ offline phase


def _window_update(
    cfg: TrainConfig,
    buffer: ReplayBuffer,
    policy_spec: NetSpec,
    value_spec: NetSpec,
    theta: ParamSet,
    theta_old: ParamSet,
    phi: ParamSet,
    adam_theta: AdamState,
    adam_phi: AdamState,
) -> tuple[float, float]:
    """Value step, fresh advantages, policy step, snapshot refresh."""
    targeted = compute_targets(
        buffer, cfg.H, cfg.gamma, value_spec, phi, bootstrap=cfg.bootstrap
    )
    if not targeted:
        return float("nan"), float("nan")
    vbatch = [(tr.s, tr.a, q) for tr, q in targeted]
    vloss, vgrad = value_loss(value_spec, phi, vbatch, cfg.micro_batch)
    _assert_finite(vloss, vgrad, "value")
    adam_step(adam_phi, phi, vgrad)

    states = [tr.s for tr, _ in targeted]
    actions = [tr.a for tr, _ in targeted]
    advs = advantages(value_spec, phi, states, actions, cfg.advantage_mode)
    pbatch = list(zip(states, actions))
    probs_old = [tr.probs_old for tr, _ in targeted]
    ploss, pgrad = ppo_loss(
        policy_spec,
        theta,
        theta_old,
        pbatch,
        advs,
        cfg.epsilon,
        cfg.c,
        probs_old=probs_old,
        micro_batch=cfg.micro_batch,
    )
    _assert_finite(ploss, pgrad, "policy")
    adam_step(adam_theta, theta, pgrad)
    theta_old.flat[:] = theta.flat
    buffer.clear()
    return vloss, ploss


def _assert_finite(loss: float, grad: np.ndarray, which: str) -> None:
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise ContractError(
            f"non-finite {which} loss/gradient "
            f"(loss={loss!r}, |grad|_max={np.max(np.abs(grad))!r})"
        )


def train_offline(
    cfg: TrainConfig,
    instance_fn,
    out_dir,
    log_name: str = "training_log.csv",
) -> Path:
    """Full offline run: per epoch, every agent harvests a fresh instance.

    ``instance_fn(seed) -> (GroundTruthGraph, seed_node)`` supplies one
    realization per agent per epoch.  Writes the epoch log CSV and a
    checkpoint; returns the checkpoint path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy_spec, value_spec = net_specs(cfg)
    theta = init_params(policy_spec, cfg.seed)
    phi = init_params(value_spec, cfg.seed + 1)
    theta_old = theta.copy()
    adam_theta = AdamState.for_params(theta, cfg.lambda_lr)
    adam_phi = AdamState.for_params(phi, cfg.lambda_lr)
    buffer = ReplayBuffer(cfg.agents, cfg.T)
    rows = []
    for epoch in range(cfg.epochs):
        contexts = []
        for i in range(cfg.agents):
            inst_seed = cfg.seed + epoch * cfg.agents + i + 1
            gt, seed_node = instance_fn(inst_seed)
            state = reset(gt, EpisodeConfig(seed_node=seed_node, budget=cfg.budget))
            ctx = AgentContext(
                agent_id=i,
                gt=gt,
                state=state,
                rng=np.random.default_rng(
                    np.random.SeedSequence([cfg.seed, epoch, i])
                ),
                episode=epoch,
            )
            ctx.refresh_ranked(cfg.embed, cfg.k, _embed_seed(cfg.seed, i, epoch, 0))
            contexts.append(ctx)
        vlosses, eps_entropy = [], []
        while any(not c.done for c in contexts):
            before = len(buffer)
            rollout(contexts, policy_spec, theta_old, cfg, buffer)
            if len(buffer) == before:  # only fallback probes this window
                continue
            for tr in buffer.all():
                eps_entropy.append(float(policy_entropy(tr.probs_old)))
            vloss, _ = _window_update(
                cfg, buffer, policy_spec, value_spec,
                theta, theta_old, phi, adam_theta, adam_phi,
            )
            vlosses.append(vloss)
        mean_return = float(
            np.mean([discounted_return(c.rewards, cfg.gamma) for c in contexts])
        )
        mean_found = float(np.mean([targets_found(c.state) for c in contexts]))
        rows.append(
            {
                "epoch": epoch,
                "mean_return": mean_return,
                "mean_targets_found": mean_found,
                "policy_entropy": float(np.mean(eps_entropy)) if eps_entropy else 0.0,
                "value_loss": float(np.mean(vlosses)) if vlosses else 0.0,
            }
        )
    _write_log(out_dir / log_name, rows)
    ck = out_dir / "checkpoint"
    save_checkpoint(ck, {"policy": theta, "value": phi})
    return ck


def _write_log(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


# ------------------------------------------------------------- online phase


def evaluate_online(
    params: dict[str, ParamSet],
    gt: GroundTruthGraph,
    seed_node: int,
    cfg: TrainConfig,
    rng_seed: int = 0,
    updates: bool = True,
    sample: bool = True,
    on_step=None,
) -> dict:
    """Harvest one instance with a single agent, updating per probe.

    Returns a dict with per-step cumulative targets-found, rewards, and the
    final observation.  ``updates=False`` freezes the networks; ``sample=False``
    takes argmax actions (deterministic given the checkpoint).  ``on_step``
    is called as on_step(state, ranking) right before each probe, while the
    observation still reflects the pre-probe view.
    """
    policy_spec, value_spec = net_specs(cfg)
    theta = params["policy"].copy()
    phi = params["value"].copy()
    theta_old = theta.copy()
    adam_theta = AdamState.for_params(theta, cfg.lambda_lr)
    adam_phi = AdamState.for_params(phi, cfg.lambda_lr)
    rng = np.random.default_rng(rng_seed)
    state = reset(gt, EpisodeConfig(seed_node=seed_node, budget=cfg.budget))
    ranking, ranked = _ranked(state, cfg, rng_seed, 0)
    curve, rewards = [], []
    step = 0
    while not is_done(state):
        mask = ranked.action_mask
        probs_before = None
        if mask.any():
            logits = forward(policy_spec, theta_old, ranked.tensor())
            probs_before = softmax_policy(logits, mask)
            if sample:
                p = probs_before / probs_before.sum()
                slot = int(rng.choice(cfg.k, p=p))
            else:
                slot = int(np.argmax(np.where(mask, probs_before, -1.0)))
            node = int(ranked.slots[slot])
        else:
            slot = None
            node = next(
                int(v) for v in ranking.order if v in state.boundary
            )
        if on_step is not None:
            on_step(state, ranking)
        s_before = ranked
        _, r = probe(state, gt, node)
        rewards.append(float(r))
        step += 1
        ranking, ranked = _ranked(state, cfg, rng_seed, step)
        curve.append(targets_found(state))
        if updates and slot is not None:
            vloss, vgrad = value_loss(
                value_spec, phi, [(s_before, slot, float(r))], cfg.micro_batch
            )
            _assert_finite(vloss, vgrad, "value")
            adam_step(adam_phi, phi, vgrad)
            adv = advantages(value_spec, phi, [s_before], [slot], cfg.advantage_mode)
            ploss, pgrad = ppo_loss(
                policy_spec,
                theta,
                theta_old,
                [(s_before, slot)],
                adv,
                cfg.epsilon,
                cfg.c,
                probs_old=[probs_before],
                micro_batch=cfg.micro_batch,
            )
            _assert_finite(ploss, pgrad, "policy")
            adam_step(adam_theta, theta, pgrad)
            theta_old.flat[:] = theta.flat
    return {
        "targets_found": curve,
        "rewards": rewards,
        "state": state,
        "params": {"policy": theta, "value": phi},
    }


def _ranked(state, cfg: TrainConfig, rng_seed: int, step: int):
    r = rank(state, cfg.embed, rng_seed=_embed_seed(rng_seed, 0, 0, step))
    return r, compress(state, r, cfg.k)


def load_policy(checkpoint_path, cfg: TrainConfig) -> dict[str, ParamSet]:
    policy_spec, value_spec = net_specs(cfg)
    return load_checkpoint(checkpoint_path, {"policy": policy_spec, "value": value_spec})
