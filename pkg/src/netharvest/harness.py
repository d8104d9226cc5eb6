"""Experiment orchestration: run any agent over repeated instances, write
per-repetition and aggregate CSVs plus a manifest, and drive the
embedding-quality benchmark grid.

CSV schema (per run): instance_id, step, accuracy, entropy, reward,
targets_found — entropy holds the string sentinel when undefined.  Floats
are written with repr so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import NolModel, mod_policy, nol_policy, nol_update, random_policy
from .config import config_hash
from .embeddings import EmbedConfig, rank
from .env import EpisodeConfig, is_done, probe, reset, targets_found
from .errors import ConfigError, NetHarvestError
from .generators import draw_seed, load_edgelist
from .graph import GroundTruthGraph
from .metrics import (
    UNDEFINED,
    MetricSeries,
    accuracy_index,
    boundary_entropy,
    traversal_metrics,
)
from .presets import GRID_PT, GRID_R, GRID_REPS, _cell_seed, embedbench_cell, make_instance
from .trainer import evaluate_online, load_policy, online_config

AGENTS = ("nac", "mod", "ppr", "nol", "random", "optimal")

CSV_FIELDS = ("instance_id", "step", "accuracy", "entropy", "reward", "targets_found")


@dataclass
class ExperimentConfig:
    preset: str | None = None
    preset_args: dict = field(default_factory=dict)
    dataset: str | None = None
    target_file: str | None = None
    agent: str = "ppr"
    checkpoint: str | None = None
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    budget: int = 100
    repetitions: int = 1
    seed: int = 0
    out_dir: str = "runs/experiment"
    nac: dict = field(default_factory=dict)  # online-regime/net-shape overrides

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.agent not in AGENTS:
            raise ConfigError(f"agent must be one of {AGENTS}")
        if (self.preset is None) == (self.dataset is None):
            raise ConfigError("give exactly one of preset or dataset")
        if self.agent == "nac" and not self.checkpoint:
            raise ConfigError("the nac agent needs a checkpoint path")
        for label, path in (
            ("dataset", self.dataset),
            ("target_file", self.target_file),
            ("checkpoint", self.checkpoint),
        ):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{label} does not exist: {path}")


def build_experiment(raw: dict) -> ExperimentConfig:
    """ExperimentConfig from a plain config dict (nested embed mapping)."""
    data = dict(raw)
    embed = data.pop("embed", {})
    if isinstance(embed, dict):
        embed = EmbedConfig(**embed)
    unknown = set(data) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
    return ExperimentConfig(embed=embed, **data)


# ------------------------------------------------------------ episode runs


def _fmt(value) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, rows, fields=CSV_FIELDS) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])


def _series_rows(instance_id, ms: MetricSeries) -> list[dict]:
    return [
        {
            "instance_id": instance_id,
            "step": t,
            "accuracy": ms.accuracy[t],
            "entropy": ms.entropy[t],
            "reward": ms.rewards[t],
            "targets_found": ms.targets_found[t],
        }
        for t in range(len(ms))
    ]


def _baseline_episode(cfg: ExperimentConfig, gt, seed_node, rep) -> MetricSeries:
    state = reset(gt, EpisodeConfig(seed_node=seed_node, budget=cfg.budget))
    rng = np.random.default_rng(cfg.seed + 7919 * rep)
    model = NolModel()
    accuracy, entropy, rewards, found = [], [], [], []
    step = 0
    while not is_done(state):
        ranking = rank(state, cfg.embed, rng_seed=cfg.seed + 1009 * rep + step)
        accuracy.append(accuracy_index(ranking, state, gt))
        entropy.append(boundary_entropy(ranking, state, gt))
        if cfg.agent == "mod":
            node = mod_policy(state)
        elif cfg.agent == "ppr":
            if cfg.embed.algorithm == "ppr":
                node = next(int(v) for v in ranking.order if v in state.boundary)
            else:
                node = next(
                    int(v)
                    for v in rank(state, EmbedConfig(algorithm="ppr")).order
                    if v in state.boundary
                )
        elif cfg.agent == "random":
            node = random_policy(state, rng)
        else:  # nol
            node, feats = nol_policy(state, model, rng)
        _, r = probe(state, gt, node)
        if cfg.agent == "nol":
            nol_update(model, feats, r)
        rewards.append(float(r))
        found.append(targets_found(state))
        step += 1
    return MetricSeries(accuracy, entropy, rewards, found)


def _nac_episode(cfg: ExperimentConfig, gt, seed_node, rep) -> MetricSeries:
    nac = dict(cfg.nac)
    sample = nac.pop("sample", True)
    updates = nac.pop("updates", True)
    online = online_config(budget=cfg.budget, embed=cfg.embed, **nac)
    params = load_policy(cfg.checkpoint, online)
    accuracy, entropy = [], []

    def on_step(state, ranking):
        accuracy.append(accuracy_index(ranking, state, gt))
        entropy.append(boundary_entropy(ranking, state, gt))

    out = evaluate_online(
        params,
        gt,
        seed_node,
        online,
        rng_seed=cfg.seed + 7919 * rep,
        updates=updates,
        sample=sample,
        on_step=on_step,
    )
    return MetricSeries(accuracy, entropy, out["rewards"], out["targets_found"])


def _instance_for_rep(cfg: ExperimentConfig, rep: int, dataset_gt):
    inst_seed = cfg.seed + rep
    if cfg.preset is not None:
        gt, seed_node = make_instance(cfg.preset, inst_seed, **cfg.preset_args)
    else:
        gt = dataset_gt
        seed_node = draw_seed(gt, np.random.default_rng(inst_seed))
    return gt, seed_node, inst_seed


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute all repetitions; write per-rep CSVs, the aggregate, and a
    manifest.  Failed repetitions are recorded and excluded from aggregates.
    """
    out = Path(cfg.out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    dataset_gt = None
    if cfg.dataset is not None:
        dataset_gt = load_edgelist(cfg.dataset, target_spec=cfg.target_file)
    rep_records = []
    all_rows = []
    for rep in range(cfg.repetitions):
        record = {"rep": rep, "status": "ok", "error": None}
        try:
            gt, seed_node, inst_seed = _instance_for_rep(cfg, rep, dataset_gt)
            record["instance_seed"] = inst_seed
            if cfg.agent == "optimal":
                ms = traversal_metrics(
                    gt,
                    seed_node,
                    {"e": cfg.embed},
                    max_steps=cfg.budget,
                    rng_seed=cfg.seed + rep,
                )["e"]
            elif cfg.agent == "nac":
                ms = _nac_episode(cfg, gt, seed_node, rep)
            else:
                ms = _baseline_episode(cfg, gt, seed_node, rep)
            rows = _series_rows(rep, ms)
            write_csv(out / "runs" / f"rep_{rep:03d}.csv", rows)
            all_rows.append(rows)
        except NetHarvestError as exc:
            record["status"] = "failed"
            record["error"] = f"{type(exc).__name__}: {exc}"
        rep_records.append(record)
    agg = aggregate_rows(all_rows)
    write_csv(out / "aggregate.csv", agg, fields=AGG_FIELDS)
    manifest = {
        "config": _config_dict(cfg),
        "config_hash": config_hash(cfg),
        "version": __version__,
        "reps": rep_records,
        "n_success": len(all_rows),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return {
        "out_dir": str(out),
        "aggregate": str(out / "aggregate.csv"),
        "manifest": str(out / "manifest.json"),
        "n_success": len(all_rows),
        "failures": [r for r in rep_records if r["status"] == "failed"],
    }


def _config_dict(cfg: ExperimentConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)


AGG_FIELDS = (
    "step",
    "n",
    "accuracy_mean",
    "accuracy_std",
    "entropy_n",
    "entropy_mean",
    "entropy_std",
    "reward_mean",
    "targets_found_mean",
    "targets_found_std",
)


def aggregate_rows(per_rep_rows: list[list[dict]]) -> list[dict]:
    """Per-step mean and population std over the successful repetitions.

    Undefined entropy entries are excluded; entropy_n reports how many
    repetitions contributed a defined value at that step.
    """
    if not per_rep_rows:
        return []
    max_len = max(len(rows) for rows in per_rep_rows)
    agg = []
    for t in range(max_len):
        present = [rows[t] for rows in per_rep_rows if t < len(rows)]
        acc = np.array([row["accuracy"] for row in present], dtype=np.float64)
        rew = np.array([row["reward"] for row in present], dtype=np.float64)
        tf = np.array([row["targets_found"] for row in present], dtype=np.float64)
        ent = np.array(
            [row["entropy"] for row in present if row["entropy"] is not None],
            dtype=np.float64,
        )
        agg.append(
            {
                "step": t,
                "n": len(present),
                "accuracy_mean": float(acc.mean()),
                "accuracy_std": float(acc.std()),
                "entropy_n": int(ent.size),
                "entropy_mean": float(ent.mean()) if ent.size else None,
                "entropy_std": float(ent.std()) if ent.size else None,
                "reward_mean": float(rew.mean()),
                "targets_found_mean": float(tf.mean()),
                "targets_found_std": float(tf.std()),
            }
        )
    return agg


def read_run_csv(path) -> list[dict]:
    """Parse a per-rep CSV back into typed rows (inverse of write_csv)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "instance_id": int(row["instance_id"]),
                    "step": int(row["step"]),
                    "accuracy": float(row["accuracy"]),
                    "entropy": None
                    if row["entropy"] == UNDEFINED
                    else float(row["entropy"]),
                    "reward": float(row["reward"]),
                    "targets_found": int(row["targets_found"]),
                }
            )
    return rows


def report(runs_dir, out_path) -> int:
    """Re-aggregate every per-rep CSV under runs_dir into one table."""
    paths = sorted(Path(runs_dir).glob("*.csv"))
    if not paths:
        raise ConfigError(f"no run CSVs found under {runs_dir}")
    per_rep = [read_run_csv(p) for p in paths]
    write_csv(out_path, aggregate_rows(per_rep), fields=AGG_FIELDS)
    return len(per_rep)


# -------------------------------------------------------------- embedbench


BENCH_FIELDS = (
    "algorithm",
    "r",
    "p_t",
    "rep",
    "step",
    "accuracy",
    "entropy",
    "reward",
    "targets_found",
)

SUMMARY_FIELDS = (
    "algorithm",
    "r",
    "p_t",
    "n",
    "auc_mean",
    "auc_std",
    "acc40_mean",
    "entropy_min_step_mean",
)


def run_embedbench(
    out_dir,
    algorithms=("ppr", "mod"),
    r_values=GRID_R,
    pt_values=GRID_PT,
    reps: int = GRID_REPS,
    max_steps: int | None = None,
    embed_overrides: dict | None = None,
) -> dict:
    """Ground-truth-optimal traversals over the benchmark grid, scoring every
    requested ranking algorithm on shared routes.

    Returns {(algorithm, r, p_t): [MetricSeries per rep]} and writes the raw
    per-step CSV, a per-cell summary, and a manifest under out_dir.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfgs = {
        alg: EmbedConfig(algorithm=alg, **(embed_overrides or {}))
        for alg in algorithms
    }
    results: dict = {(alg, r, pt): [] for alg in algorithms for r in r_values for pt in pt_values}
    rows = []
    for r in r_values:
        for pt in pt_values:
            for rep in range(reps):
                cell_seed = _cell_seed(r, pt, rep)
                gt, seed_node = embedbench_cell(r, pt, cell_seed)
                series = traversal_metrics(
                    gt, seed_node, cfgs, max_steps=max_steps, rng_seed=cell_seed
                )
                for alg, ms in series.items():
                    results[(alg, r, pt)].append(ms)
                    for t in range(len(ms)):
                        rows.append(
                            {
                                "algorithm": alg,
                                "r": r,
                                "p_t": pt,
                                "rep": rep,
                                "step": t,
                                "accuracy": ms.accuracy[t],
                                "entropy": ms.entropy[t],
                                "reward": ms.rewards[t],
                                "targets_found": ms.targets_found[t],
                            }
                        )
    write_csv(out / "embedbench.csv", rows, fields=BENCH_FIELDS)
    summary = []
    for alg in algorithms:
        for r in r_values:
            for pt in pt_values:
                cell = results[(alg, r, pt)]
                aucs = np.array([ms.auc for ms in cell])
                acc40 = np.array([float(np.mean(ms.accuracy[:40])) for ms in cell])
                min_steps = [
                    _entropy_min_step(ms.entropy)
                    for ms in cell
                    if _entropy_min_step(ms.entropy) is not None
                ]
                summary.append(
                    {
                        "algorithm": alg,
                        "r": r,
                        "p_t": pt,
                        "n": len(cell),
                        "auc_mean": float(aucs.mean()),
                        "auc_std": float(aucs.std()),
                        "acc40_mean": float(acc40.mean()),
                        "entropy_min_step_mean": float(np.mean(min_steps))
                        if min_steps
                        else None,
                    }
                )
    write_csv(out / "embedbench_summary.csv", summary, fields=SUMMARY_FIELDS)
    manifest = {
        "algorithms": list(algorithms),
        "r_values": list(r_values),
        "pt_values": list(pt_values),
        "reps": reps,
        "max_steps": max_steps,
        "version": __version__,
        "config_hash": config_hash(
            {
                "algorithms": list(algorithms),
                "r_values": list(r_values),
                "pt_values": list(pt_values),
                "reps": reps,
                "max_steps": max_steps,
            }
        ),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return results


def _entropy_min_step(entropy: list) -> int | None:
    """Step index of the smallest defined entropy value, None if all undefined."""
    best, best_step = None, None
    for t, e in enumerate(entropy):
        if e is not None and (best is None or e < best):
            best, best_step = e, t
    return best_step
