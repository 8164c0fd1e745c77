"""Command-line entry points for training, evaluation, and self-checks.

Exit codes: 0 success, 1 runtime or check failure, 2 malformed configuration
or arguments (the message names the offending key).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import checkpoint as ckpt
from .checks import run_gradient_checks, run_oracle_checks
from .config import ConfigError, RunConfig, build_factory, config_hash, load_config, save_config
from .evaluation import (
    action_frequency_vector,
    diversity_score,
    format_relative_change,
    mi_report,
    radial_export,
    win_rate_matrix,
    write_diversity_json,
    write_matrix_csv,
    write_mi_json,
    write_radial_csv,
)
from .population import PolicyHandle, train_mia, train_specialists
from .runtime import rng_stream


def _write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


def _load_population(spec: str, expect_dir_kind: str | None = None) -> list[PolicyHandle]:
    """Expand a population argument into policy handles.

    Accepts a checkpoint file, a run directory, or a comma-separated list of
    files. Stage-1 checkpoints hold the conditional policy and expand to one
    handle per member id; stage-2 checkpoints carry their specialist id.
    """
    handles: list[PolicyHandle] = []
    for part in spec.split(","):
        path = Path(part)
        if path.is_dir():
            specialist_files = sorted(path.glob("specialist_*.ckpt"))
            gen_files = sorted(path.glob("gen_*.ckpt"))
            if specialist_files:
                files = specialist_files
            elif gen_files:
                files = [gen_files[-1]]
            else:
                raise ConfigError(f"directory {path} holds no checkpoints")
        elif path.is_file():
            files = [path]
        else:
            raise ConfigError(f"population spec '{part}' is not a file or directory")
        for file in files:
            params, meta = ckpt.load_checkpoint(file)
            if meta["stage"] == "cam" and meta.get("agent_id") is not None:
                handles.append(PolicyHandle(params, int(meta["agent_id"]),
                                            label=f"cam@{meta['agent_id']}"))
            else:
                handles.extend(
                    PolicyHandle(params, k, label=f"mia@{k}")
                    for k in range(params.n_ids)
                )
    if not handles:
        raise ConfigError(f"population spec '{spec}' produced no entities")
    return handles


def _final_mia_checkpoint(spec: str) -> Path:
    path = Path(spec)
    if path.is_dir():
        gen_files = sorted(path.glob("gen_*.ckpt"))
        if not gen_files:
            raise ConfigError(f"directory {path} holds no stage-1 checkpoints")
        return gen_files[-1]
    if path.is_file():
        return path
    raise ConfigError(f"'{spec}' is not a checkpoint file or run directory")


# ---------------------------------------------------------------------------
# Training commands.


def cmd_train_mia(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    digest = config_hash(cfg)

    def report(record: dict) -> None:
        print(f"gen {record['generation']:3d}  "
              f"win_vs_prev {record['win_rate_vs_prev']:.3f}  "
              f"gap {record['gap_from_draw']:.3f}  "
              f"transitions {record['transitions']}")

    result = train_mia(cfg, workers=args.workers, on_generation=report)
    for entry in result.store.entries():
        ckpt.save_checkpoint(out / f"gen_{entry.index:04d}.ckpt", entry.params,
                             stage="mia", generation=entry.meta["generation"],
                             master_seed=cfg.master_seed, config_hash=digest)
    _write_jsonl(out / "metrics.jsonl", result.metrics)
    print(f"converged: {result.converged} after {result.generations_run} generations")
    print(f"checkpoints: {len(result.store)} -> {out}")
    return 0


def cmd_train_cam(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    baseline_path = _final_mia_checkpoint(args.mia)
    baseline, meta = ckpt.load_checkpoint(baseline_path)
    if baseline.n_ids != cfg.population_size:
        raise ConfigError(
            f"checkpoint {baseline_path} holds {baseline.n_ids} member ids but "
            f"'population_size' is {cfg.population_size}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    digest = config_hash(cfg)

    def report(record: dict) -> None:
        print(f"sweep {record['sweep']:3d}  "
              f"mean_win_vs_mia {record['mean_win_rate_vs_mia']:.3f}  "
              f"cam_loss {record['cam_loss']:.4f}")

    result = train_specialists(cfg, baseline, workers=args.workers, on_sweep=report)
    if not result.baseline_untouched:
        print("error: frozen stage-1 baseline changed during stage 2", file=sys.stderr)
        return 1
    for k, params in sorted(result.specialists.items()):
        ckpt.save_checkpoint(out / f"specialist_{k:02d}.ckpt", params,
                             stage="cam", generation=cfg.stage2.sweeps,
                             master_seed=cfg.master_seed, config_hash=digest,
                             agent_id=k)
    _write_jsonl(out / "metrics.jsonl", result.metrics)
    print(f"baseline digest unchanged: {result.baseline_digest_before[:16]}...")
    print(f"mean win rate vs frozen baseline: {result.mean_win_rate_vs_baseline:.3f}")
    return 0


# ---------------------------------------------------------------------------
# Evaluation commands.


def cmd_eval_matrix(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    factory = build_factory(cfg)
    pop_a = _load_population(args.pop_a)
    pop_b = _load_population(args.pop_b) if args.pop_b else None
    games = args.games or cfg.eval_games_for(factory)
    matrix = win_rate_matrix(factory, pop_a, pop_b, games=games,
                             master_seed=cfg.master_seed, workers=args.workers)
    width = max(len(label) for label in matrix.row_labels + matrix.col_labels) + 2
    print(" " * width + "".join(f"{c:>{width}}" for c in matrix.col_labels))
    for x, label in enumerate(matrix.row_labels):
        cells = "".join(f"{v:>{width}.3f}" for v in matrix.u[x])
        print(f"{label:>{width}}" + cells)
    if pop_b is None:
        print(f"antisymmetric: {matrix.check_antisymmetric()}")
    if args.out:
        write_matrix_csv(Path(args.out) / "matrix.csv", matrix)
        print(f"wrote {Path(args.out) / 'matrix.csv'}")
    return 0


def _population_vectors(factory, handles, games, master_seed, tag):
    vectors = []
    for i, handle in enumerate(handles):
        opponents = [h for j, h in enumerate(handles)
                     if j != i and factory.compatible(handle.agent_id, h.agent_id)]
        if not opponents:
            raise ConfigError(f"entity {handle.label or i} has no playable opponent")
        rng = rng_stream(master_seed, "freq", tag, i)
        vectors.append(action_frequency_vector(factory, handle, opponents,
                                               games, rng))
    return vectors


def cmd_eval_diversity(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    factory = build_factory(cfg)
    games = args.games or 32
    pop_a = _load_population(args.pop_a)
    vectors_a = _population_vectors(factory, pop_a, games, cfg.master_seed, "a")
    report_a = diversity_score(vectors_a)
    print(f"diversity pop-a: {report_a.score:.4f} over {report_a.n_pairs} pairs")
    rows = radial_export(vectors_a)
    extra = {"pop_a_score": report_a.score}
    if args.pop_b:
        pop_b = _load_population(args.pop_b)
        vectors_b = _population_vectors(factory, pop_b, games, cfg.master_seed, "b")
        report_b = diversity_score(vectors_b)
        change = format_relative_change(report_a.score, report_b.score)
        print(f"diversity pop-b: {report_b.score:.4f} over {report_b.n_pairs} pairs")
        print(f"relative change: {change}")
        rows += radial_export(vectors_b)
        extra.update({"pop_b_score": report_b.score, "relative_change": change})
        report = report_b
    else:
        report = report_a
    if args.out:
        out = Path(args.out)
        write_diversity_json(out / "diversity.json", report, extra)
        write_radial_csv(out / "radial.csv", rows)
        print(f"wrote {out / 'diversity.json'} and {out / 'radial.csv'}")
    return 0


def cmd_eval_mi(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    factory = build_factory(cfg)
    handles = _load_population(args.pop)
    games = args.games or 32
    report = mi_report(factory, handles, episodes=games, master_seed=cfg.master_seed)
    print(f"mean pairwise MI: {report['mean_mi_nats']:.4f} nats "
          f"over {len(report['pairs'])} pairs")
    for row in report["pairs"]:
        print(f"  {row['a']} vs {row['b']}: {row['mi_nats']:.4f} nats "
              f"({row['samples']} samples)")
    if args.out:
        write_mi_json(Path(args.out) / "mi.json", report)
        print(f"wrote {Path(args.out) / 'mi.json'}")
    return 0


# ---------------------------------------------------------------------------
# Self-check commands.


def cmd_check(args) -> int:
    if args.what == "gradients":
        results = run_gradient_checks()
    else:
        results = run_oracle_checks()
    failed = 0
    for r in results:
        mark = "ok " if r.passed else "FAIL"
        detail = f"  ({r.detail})" if r.detail else ""
        print(f"{mark} {r.name}: err={r.error:.3e} thr={r.threshold:.1e}{detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# Argument wiring.


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specpop",
        description="Two-stage population self-play training and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured master seed")
        p.add_argument("--workers", type=int, default=1,
                       help="process count for match playing")

    p = sub.add_parser("train-mia", help="stage 1: conditional-policy population")
    common(p)
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(fn=cmd_train_mia)

    p = sub.add_parser("train-cam", help="stage 2: per-member specialists")
    common(p)
    p.add_argument("--mia", required=True,
                   help="stage-1 run directory or checkpoint file")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(fn=cmd_train_cam)

    pe = sub.add_parser("eval", help="measure trained populations")
    esub = pe.add_subparsers(dest="eval_what", required=True)

    p = esub.add_parser("matrix", help="pairwise win-rate matrix")
    common(p)
    p.add_argument("--pop-a", required=True, help="checkpoint file, dir, or list")
    p.add_argument("--pop-b", default=None, help="optional second population")
    p.add_argument("--games", type=int, default=None, help="games per pair")
    p.add_argument("--out", default=None, help="directory for matrix.csv")
    p.set_defaults(fn=cmd_eval_matrix)

    p = esub.add_parser("diversity", help="behavioral spread of a population")
    common(p)
    p.add_argument("--pop-a", required=True)
    p.add_argument("--pop-b", default=None,
                   help="second population for a before/after comparison")
    p.add_argument("--games", type=int, default=None, help="episodes per entity")
    p.add_argument("--out", default=None,
                   help="directory for diversity.json and radial.csv")
    p.set_defaults(fn=cmd_eval_diversity)

    p = esub.add_parser("mi", help="pairwise action mutual information")
    common(p)
    p.add_argument("--pop", required=True)
    p.add_argument("--games", type=int, default=None, help="episodes per pair")
    p.add_argument("--out", default=None, help="directory for mi.json")
    p.set_defaults(fn=cmd_eval_mi)

    p = sub.add_parser("check", help="run the built-in verification battery")
    p.add_argument("what", choices=["gradients", "oracle"])
    p.set_defaults(fn=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
