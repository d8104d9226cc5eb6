"""Command-line entry point.

Verbs: generate (emit instances to disk), train (offline agent training),
evaluate (any agent over repeated instances), embedbench (ranking-quality
grid), report (re-aggregate run CSVs).  A single YAML config file drives
train/evaluate; --set key.path=value overrides individual fields.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import apply_overrides, config_hash, load_config
from .embeddings import ALGORITHMS, EmbedConfig
from .errors import ConfigError, NetHarvestError
from .harness import build_experiment, report, run_embedbench, run_experiment
from .presets import GRID_PT, GRID_R, GRID_REPS, make_instance
from .trainer import TrainConfig, train_offline


def _parse_args(argv):
    p = argparse.ArgumentParser(prog="netharvest", description=__doc__)
    p.add_argument("--version", action="version", version=f"netharvest {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write synthetic instances to disk")
    g.add_argument("--preset", required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument(
        "--arg",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="preset argument, e.g. --arg r=0.05 (repeatable)",
    )

    t = sub.add_parser("train", help="offline training from a YAML config")
    t.add_argument("--config", required=True)
    t.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE")

    e = sub.add_parser("evaluate", help="run an agent over repeated instances")
    e.add_argument("--config", required=True)
    e.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE")

    b = sub.add_parser("embedbench", help="ranking-quality benchmark grid")
    b.add_argument("--out", required=True)
    b.add_argument("--algorithms", default="ppr,mod")
    b.add_argument("--r", default=",".join(str(v) for v in GRID_R))
    b.add_argument("--p-t", dest="p_t", default=",".join(str(v) for v in GRID_PT))
    b.add_argument("--reps", type=int, default=GRID_REPS)
    b.add_argument("--max-steps", type=int, default=None)

    r = sub.add_parser("report", help="aggregate per-rep CSVs into one table")
    r.add_argument("--runs", required=True)
    r.add_argument("--out", required=True)

    return p.parse_args(argv)


def _kv_args(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--arg {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


def _cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    preset_args = _kv_args(args.arg)
    records = []
    for i in range(args.count):
        inst_seed = args.seed + i
        gt, seed_node = make_instance(args.preset, inst_seed, **preset_args)
        stem = out / f"instance_{i:04d}"
        with open(f"{stem}.edges", "w") as fh:
            for u in range(gt.n):
                for v in gt.neighbors(u):
                    if u < v:
                        fh.write(f"{u} {v}\n")
        with open(f"{stem}.targets", "w") as fh:
            for v in gt.target_nodes:
                fh.write(f"{v}\n")
        records.append(
            {
                "instance": i,
                "seed": inst_seed,
                "seed_node": int(seed_node),
                "n": gt.n,
                "m": gt.m,
                "targets": int(gt.target_nodes.size),
            }
        )
    manifest = {
        "preset": args.preset,
        "preset_args": preset_args,
        "count": args.count,
        "base_seed": args.seed,
        "instances": records,
        "version": __version__,
        "config_hash": config_hash(
            {"preset": args.preset, "preset_args": preset_args, "seed": args.seed}
        ),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {args.count} instance(s) to {out}")
    return 0


def _cmd_train(args) -> int:
    raw = apply_overrides(load_config(args.config), args.set)
    preset = raw.get("preset")
    if not preset:
        raise ConfigError("training config needs a 'preset'")
    preset_args = raw.get("preset_args", {})
    out_dir = raw.get("out_dir", "runs/train")
    embed = EmbedConfig(**raw.get("embed", {}))
    cfg = TrainConfig(embed=embed, **raw.get("train", {}))
    ck = train_offline(
        cfg, lambda s: make_instance(preset, s, **preset_args), out_dir
    )
    print(f"checkpoint: {ck}")
    print(f"log: {Path(out_dir) / 'training_log.csv'}")
    return 0


def _cmd_evaluate(args) -> int:
    raw = apply_overrides(load_config(args.config), args.set)
    cfg = build_experiment(raw)
    result = run_experiment(cfg)
    print(f"aggregate: {result['aggregate']}")
    print(f"manifest: {result['manifest']}")
    print(f"succeeded: {result['n_success']}/{cfg.repetitions}")
    for failure in result["failures"]:
        print(f"  rep {failure['rep']} failed: {failure['error']}", file=sys.stderr)
    return 0


def _cmd_embedbench(args) -> int:
    algorithms = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    bad = set(algorithms) - set(ALGORITHMS)
    if bad:
        raise ConfigError(f"unknown algorithms: {sorted(bad)}")
    r_values = tuple(float(v) for v in args.r.split(","))
    pt_values = tuple(float(v) for v in args.p_t.split(","))
    run_embedbench(
        args.out,
        algorithms=algorithms,
        r_values=r_values,
        pt_values=pt_values,
        reps=args.reps,
        max_steps=args.max_steps,
    )
    print(f"benchmark CSVs under {args.out}")
    return 0


def _cmd_report(args) -> int:
    n = report(args.runs, args.out)
    print(f"aggregated {n} run(s) into {args.out}")
    return 0


def main(argv=None) -> int:
    args = _parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "embedbench": _cmd_embedbench,
        "report": _cmd_report,
    }
    try:
        return handlers[args.verb](args)
    except NetHarvestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
