"""Command line front end: ``train``, ``eval`` and ``compare``.

    cooperator train --env cartpole --layer cooperator --iters 100 --pop 64 --seed 1 --out runs/coop
    cooperator eval --ckpt runs/coop/final.ckpt --episodes 100 --shuffle --seed 0
    cooperator compare runs/coop runs/tf --out runs/cmp

The worker pool size comes from ``COOP_THREADS`` (default 1).  It never
changes results.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from ..es_trainer import EsConfig, EsState, es_step, evaluate_generation
from ..evaluation import CartPoleFitness, episode_returns, initial_genome
from ..modulation import ModulationKind
from ..pi_layer import ContextMixing, LayerConfig, LayerKind
from ..policy import AgentConfig
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .runlog import LogRow, RunLogWriter, best_so_far, read_log
from .svg import line_chart


class UsageError(Exception):
    pass


class ParityError(RuntimeError):
    pass


def workers_from_env() -> int:
    raw = os.environ.get("COOP_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"COOP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"COOP_THREADS must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# train


def add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--env", default="cartpole", choices=["cartpole"])
    p.add_argument("--layer", default="cooperator", choices=[k.value for k in LayerKind])
    p.add_argument(
        "--modulation",
        default=None,
        choices=[k.value for k in ModulationKind],
        help="cooperator only (default cooperation)",
    )
    p.add_argument("--mixing", default="neighbor_mean", choices=[k.value for k in ContextMixing])
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--pop", type=int, default=64)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--episodes", type=int, default=2, help="episodes per fitness evaluation")
    p.add_argument("--d-msg", type=int, default=32)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--quiet", action="store_true")


def configs_from_args(args) -> tuple[AgentConfig, EsConfig]:
    layer_kind = LayerKind(args.layer)
    if layer_kind is LayerKind.TRANSFORMER and args.modulation is not None:
        raise UsageError("--modulation only applies to --layer cooperator")
    if args.iters < 0:
        raise UsageError("--iters must be >= 0")
    if args.pop < 2 or args.pop % 2:
        raise UsageError("--pop must be an even number >= 2")
    try:
        layer = LayerConfig(
            d_msg=args.d_msg,
            layer_kind=layer_kind,
            modulation=ModulationKind(args.modulation or "cooperation"),
            context_mixing=ContextMixing(args.mixing),
        )
        agent = AgentConfig(layer=layer, hidden=args.hidden)
        es = EsConfig(
            population=args.pop,
            sigma=args.sigma,
            learning_rate=args.lr,
            iterations=args.iters,
            episodes_per_eval=args.episodes,
            base_seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return agent, es


def train(agent: AgentConfig, es: EsConfig, out_dir, workers: int = 1, quiet: bool = True) -> list[LogRow]:
    """Run ES and write ``log.csv``, ``final.ckpt`` and ``curve.svg`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fitness = CartPoleFitness(agent, episodes=es.episodes_per_eval)
    state = EsState.initial(initial_genome(agent, es.base_seed), es)
    rows = []
    with RunLogWriter(out / "log.csv") as log:
        for i in range(es.iterations + 1):
            t0 = time.perf_counter()
            if i < es.iterations:
                state = es_step(state, es, fitness, workers)
                rec = state.history[-1]
            else:
                rec, _, _ = evaluate_generation(state, es, fitness, workers)
            ms = int(round(1000 * (time.perf_counter() - t0)))
            row = LogRow(i, rec.best, rec.mean, rec.std, i * es.population * es.episodes_per_eval, ms)
            log.write(row)
            rows.append(row)
            if not quiet and (i % 10 == 0 or i == es.iterations):
                print(f"iter {i:4d}  best {rec.best:9.2f}  mean {rec.mean:9.2f}  std {rec.std:7.2f}  ({ms} ms)")
    save_checkpoint(out / "final.ckpt", Checkpoint(agent, es, es.iterations, state.center))
    iters = [r.iter for r in rows]
    svg = line_chart(
        {"best": (iters, [r.best for r in rows]), "mean": (iters, [r.mean for r in rows])},
        title=f"{agent.layer.label} seed {es.base_seed}",
        xlabel="ES generation",
        ylabel="episode return",
    )
    (out / "curve.svg").write_text(svg)
    return rows


def cmd_train(args) -> int:
    agent, es = configs_from_args(args)
    workers = workers_from_env()
    rows = train(agent, es, args.out, workers, quiet=args.quiet)
    print(f"{agent.layer.label}: {agent.genome_size} parameters, best-so-far {max(best_so_far(rows)):.3f}")
    print(f"wrote {Path(args.out) / 'log.csv'}, final.ckpt, curve.svg")
    return 0


# ---------------------------------------------------------------------------
# eval


def evaluate_checkpoint(ckpt: Checkpoint, episodes: int, seed: int, shuffle: bool) -> dict:
    returns = episode_returns(ckpt.genome, ckpt.agent, seed, episodes, shuffle)
    return {
        "layer": ckpt.agent.layer.label,
        "parameters": int(ckpt.genome.size),
        "episodes": episodes,
        "seed": seed,
        "shuffle": shuffle,
        "mean": float(np.mean(returns)),
        "std": float(np.std(returns)),
        "returns": [float(r) for r in returns],
    }


def cmd_eval(args) -> int:
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    ckpt_path = Path(args.ckpt)
    report = evaluate_checkpoint(load_checkpoint(ckpt_path), args.episodes, args.seed, args.shuffle)
    report["checkpoint"] = str(ckpt_path)
    out = Path(args.out) if args.out else ckpt_path.with_name("eval_shuffled.json" if args.shuffle else "eval.json")
    out.write_text(json.dumps(report, indent=2) + "\n")
    tag = " (shuffled)" if args.shuffle else ""
    print(f"{report['layer']}{tag}: {report['mean']:.3f} ± {report['std']:.3f} over {args.episodes} episodes")
    return 0


# ---------------------------------------------------------------------------
# compare


def check_parity(label_a: str, n_a: int, label_b: str, n_b: int):
    if n_a != n_b:
        raise ParityError(
            f"parameter counts differ: {label_a} has {n_a}, {label_b} has {n_b}; "
            "the comparison needs agents of equal size"
        )


def _configs_from_spec(spec: str):
    p = argparse.ArgumentParser(prog="train-spec", add_help=False)
    add_train_flags(p)
    p.add_argument("--out", default=None)
    try:
        args = p.parse_args(shlex.split(spec))
    except SystemExit:
        raise UsageError(f"could not parse train flags {spec!r}") from None
    return configs_from_args(args)


def cmd_compare(args) -> int:
    workers = workers_from_env()
    out = Path(args.out)
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    if args.runs and (args.a or args.b):
        raise UsageError("give either two run directories or --a/--b, not both")
    if args.runs:
        if len(args.runs) != 2:
            raise UsageError("compare needs exactly two run directories")
        dirs = [Path(d) for d in args.runs]
        ckpts = [load_checkpoint(d / "final.ckpt") for d in dirs]
        labels = [f"{d.name}: {c.agent.layer.label}" for d, c in zip(dirs, ckpts)]
        check_parity(labels[0], ckpts[0].genome.size, labels[1], ckpts[1].genome.size)
    elif args.a and args.b:
        specs = [_configs_from_spec(s) for s in (args.a, args.b)]
        labels = [f"a: {specs[0][0].layer.label}", f"b: {specs[1][0].layer.label}"]
        check_parity(labels[0], specs[0][0].genome_size, labels[1], specs[1][0].genome_size)
        dirs = [out / "a", out / "b"]
        for (agent, es), d in zip(specs, dirs):
            train(agent, es, d, workers, quiet=True)
        ckpts = [load_checkpoint(d / "final.ckpt") for d in dirs]
    else:
        raise UsageError("compare needs two run directories or both --a and --b")

    out.mkdir(parents=True, exist_ok=True)
    logs = [read_log(d / "log.csv") for d in dirs]
    series = {}
    for label, rows in zip(labels, logs):
        iters = [r.iter for r in rows]
        series[f"{label} best-so-far"] = (iters, best_so_far(rows))
        series[f"{label} mean"] = (iters, [r.mean for r in rows])
    svg = line_chart(
        series,
        title="best-so-far and population mean",
        xlabel="ES generation",
        ylabel="episode return",
        dashed={k for k in series if k.endswith(" mean")},
    )
    (out / "compare.svg").write_text(svg)

    table = []
    for label, ckpt, rows in zip(labels, ckpts, logs):
        plain = evaluate_checkpoint(ckpt, args.episodes, args.seed, shuffle=False)
        shuf = evaluate_checkpoint(ckpt, args.episodes, args.seed, shuffle=True)
        table.append(
            {
                "agent": label,
                "parameters": int(ckpt.genome.size),
                "generations": rows[-1].iter,
                "best_so_far": max(best_so_far(rows)),
                "eval_mean": plain["mean"],
                "eval_std": plain["std"],
                "shuffled_mean": shuf["mean"],
                "shuffled_std": shuf["std"],
            }
        )
    lines = [
        f"| agent | params | generations | best so far | test ({args.episodes} ep) | shuffled ({args.episodes} ep) |",
        "|---|---|---|---|---|---|",
    ]
    for t in table:
        lines.append(
            f"| {t['agent']} | {t['parameters']} | {t['generations']} | {t['best_so_far']:.2f} "
            f"| {t['eval_mean']:.2f} ± {t['eval_std']:.2f} | {t['shuffled_mean']:.2f} ± {t['shuffled_std']:.2f} |"
        )
    text = "\n".join(lines) + "\n"
    (out / "compare.md").write_text(text)
    (out / "compare.json").write_text(json.dumps(table, indent=2) + "\n")
    print(f"parameter counts match: {table[0]['parameters']}")
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cooperator", description="Permutation-invariant layers trained by ES.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent with ES")
    add_train_flags(p)
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--shuffle", action="store_true", help="fresh seeded observation permutation per episode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report path (default: eval.json next to the checkpoint)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="compare two agents of equal size")
    p.add_argument("runs", nargs="*", help="two run directories")
    p.add_argument("--a", default=None, help="train flags for the first agent, quoted")
    p.add_argument("--b", default=None, help="train flags for the second agent, quoted")
    p.add_argument("--episodes", type=int, default=20, help="test episodes per table cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CheckpointError, ParityError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
