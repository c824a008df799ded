import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from dotenv import find_dotenv, load_dotenv

from semcomm_common.exceptions import SemCommError
from semcomm_common.settings import get_settings
from semcomm_model.gradcheck import run_suite
from semcomm_model.system import SemanticCommSystem, build_system

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, default_experiment, load_config
from .evaluation import evaluate, sweep
from .overhead import SYMBOL_BITS, overhead, overhead_frame, preset_reports
from .results import (
    MetricRow,
    async_read_bytes,
    async_write_bytes,
    async_write_csv,
    emit_results,
    loss_frame,
    summary_lines,
)
from .synth_data import Sample, export_dataset, gen_dataset, split
from .training import train, train_independent

logger = logging.getLogger(__name__)

COMMANDS = ("gen-data", "train", "eval", "sweep", "overhead", "gradcheck")
CHECKPOINT_FILE = "checkpoint.bin"
METRICS_FILE = "metrics.csv"
LOSS_LOG_FILE = "loss_log.csv"
OVERHEAD_FILE = "overhead.csv"

Pools = Dict[str, List[Sample]]


def banner(title: str) -> None:
    print(f"\n{'='*60}")
    print(title)
    print(f"{'='*60}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semcomm", description="Multi-modal multi-task semantic communication runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="Experiment JSON; the default desk task set when omitted.")
        p.add_argument("--out", type=Path, help="Output directory (overrides config and SEMCOMM_OUTPUT_DIR).")
        p.add_argument("--seed", type=int, help="Run seed (overrides config and SEMCOMM_SEED).")

    add_common(sub.add_parser("gen-data", help="Write one dataset container per task."))

    p = sub.add_parser("train", help="Joint multi-task training; writes a checkpoint and the loss log.")
    add_common(p)
    p.add_argument("--steps", type=int, help="Override train.steps.")

    p = sub.add_parser("eval", help="Evaluate a checkpoint over every task, channel and SNR.")
    add_common(p)
    p.add_argument("--checkpoint", type=Path, help=f"Defaults to <out>/{CHECKPOINT_FILE}.")

    p = sub.add_parser("sweep", help="Train (unless a checkpoint is given) and evaluate cells concurrently.")
    add_common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--steps", type=int, help="Override train.steps.")
    p.add_argument("--independent", action="store_true", help="Train and evaluate every task on its own model.")

    p = sub.add_parser("overhead", help="Bytes per task instance, fused versus unfused.")
    add_common(p)
    p.add_argument("--symbol-bits", type=int, choices=SYMBOL_BITS)
    p.add_argument("--presets", action="store_true", help="Append the two fixed-length multi-modal workloads.")

    p = sub.add_parser("gradcheck", help="Finite-difference check of every differentiable op and the pipeline.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--entries", type=int, default=3, help="Entries sampled per pipeline parameter tensor.")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_experiment()
    config = config.apply_settings(get_settings())
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.out is not None:
        config = config.model_copy(update={"output_dir": args.out})
    if getattr(args, "steps", None) is not None:
        config = config.model_copy(update={"train": config.train.model_copy(update={"steps": args.steps})})
    config.validate_consistency()
    return config


def prepare_pools(config: ExperimentConfig) -> Tuple[Pools, Pools]:
    train_pools: Pools = {}
    eval_pools: Pools = {}
    for spec in config.tasks:
        dataset = gen_dataset(config.datasets[spec.name])
        train_pools[spec.name], eval_pools[spec.name] = split(dataset, config.train_fraction, config.seed)
    return train_pools, eval_pools


def new_system(config: ExperimentConfig) -> SemanticCommSystem:
    return build_system(config.model, config.tasks, config.seed, config.mode)


async def train_system(config: ExperimentConfig, train_pools: Pools) -> SemanticCommSystem:
    system = new_system(config)
    print(f"🏋️  Training {len(config.tasks)} tasks for {config.train.steps} steps...")
    result = await asyncio.to_thread(train, system, train_pools, config.train)
    out = config.output_dir
    await async_write_bytes(out / CHECKPOINT_FILE, save_checkpoint(system, result.steps))
    await async_write_csv(loss_frame(result.events.list_events()), out / LOSS_LOG_FILE)
    losses = result.losses()
    print(f"✅ {result.steps} steps over {result.epochs} full epochs, final loss {losses[-1]:.4f}")
    print(f"💾 Checkpoint: {out / CHECKPOINT_FILE}")
    print(f"💾 Loss log:   {out / LOSS_LOG_FILE}")
    return system


async def restore_system(config: ExperimentConfig, path: Path) -> SemanticCommSystem:
    system = new_system(config)
    step = load_checkpoint(await async_read_bytes(path), system)
    print(f"📦 Loaded {path} (trained {step} steps)")
    return system


async def report_metrics(config: ExperimentConfig, rows: Sequence[MetricRow]) -> None:
    path = await emit_results(rows, config.output_dir / METRICS_FILE)
    for line in summary_lines(rows):
        print(f"   {line}")
    print(f"\n💾 {len(rows)} metric rows written to {path}")


async def cmd_gen_data(config: ExperimentConfig) -> int:
    banner("DATASET GENERATION")
    for spec in config.tasks:
        dataset_spec = config.datasets[spec.name]
        samples = gen_dataset(dataset_spec)
        path = await async_write_bytes(
            config.output_dir / "data" / f"{spec.name}.bin", export_dataset(samples, dataset_spec.kind)
        )
        print(f"💾 {spec.name}: {len(samples)} samples -> {path}")
    return 0


async def cmd_train(config: ExperimentConfig) -> int:
    banner(f"TRAINING - MODE: {config.mode.value.upper()}")
    train_pools, _ = prepare_pools(config)
    await train_system(config, train_pools)
    return 0


async def cmd_eval(config: ExperimentConfig, checkpoint: Optional[Path]) -> int:
    banner("EVALUATION")
    _, eval_pools = prepare_pools(config)
    system = await restore_system(config, checkpoint or config.output_dir / CHECKPOINT_FILE)
    rows = evaluate(system, eval_pools, config.eval)
    await report_metrics(config, rows)
    return 0


async def cmd_sweep(config: ExperimentConfig, checkpoint: Optional[Path], independent: bool) -> int:
    banner("SNR SWEEP" + (" - INDEPENDENT MODELS" if independent else ""))
    train_pools, eval_pools = prepare_pools(config)
    rows: List[MetricRow] = []
    if independent:
        trained = await asyncio.to_thread(
            train_independent, config.model, config.tasks, train_pools, config.train, config.mode
        )
        for name, (system, _) in trained.items():
            print(f"✅ {name} trained alone")
            rows.extend(await sweep(system, eval_pools, config.eval))
    else:
        if checkpoint is not None:
            system = await restore_system(config, checkpoint)
        else:
            system = await train_system(config, train_pools)
        rows = await sweep(system, eval_pools, config.eval)
    await report_metrics(config, rows)
    return 0


async def cmd_overhead(config: ExperimentConfig, symbol_bits: Optional[int], presets: bool) -> int:
    banner("COMMUNICATION OVERHEAD")
    bits = symbol_bits or config.symbol_bits
    reports = [overhead(config.model, spec, bits, config.mode) for spec in config.tasks]
    if presets:
        reports.extend(preset_reports(config.model.d, bits))
    for r in reports:
        print(f"📊 {r.task:<24} {r.fused_bytes:>8} B vs {r.unfused_bytes:>8} B unfused  (ratio {r.ratio})")
    path = await async_write_csv(overhead_frame(reports), config.output_dir / OVERHEAD_FILE)
    print(f"\n💾 {len(reports)} reports written to {path}")
    return 0


async def cmd_gradcheck(seed: int, entries: int) -> int:
    banner("GRADIENT CHECK")
    records = await asyncio.to_thread(run_suite, seed, entries)
    failed = [r for r in records if not r.passed]
    for r in records:
        mark = "✅" if r.passed else "❌"
        print(f"{mark} {r.name:<28} max rel err {r.max_rel_err:.2e}")
    print(f"\n📊 {len(records) - len(failed)}/{len(records)} checks passed")
    return 1 if failed else 0


async def dispatch(args: argparse.Namespace) -> int:
    if args.command == "gradcheck":
        return await cmd_gradcheck(args.seed, args.entries)
    config = resolve_config(args)
    if args.command == "gen-data":
        return await cmd_gen_data(config)
    if args.command == "train":
        return await cmd_train(config)
    if args.command == "eval":
        return await cmd_eval(config, args.checkpoint)
    if args.command == "sweep":
        return await cmd_sweep(config, args.checkpoint, args.independent)
    return await cmd_overhead(config, args.symbol_bits, args.presets)


async def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    CLI entry point.

    Usage:
        semcomm {gen-data|train|eval|sweep|overhead|gradcheck} [--config PATH] [--out DIR] [--seed N]

    Exit codes: 0 success, 1 validation or IO failure, 2 usage error.
    """
    load_dotenv(find_dotenv(usecwd=True))
    settings = get_settings()
    logging.basicConfig(level=settings.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return await dispatch(args)
    except SemCommError as e:
        print(f"\n❌ {args.command} failed: {e}")
        return 1
    except OSError as e:
        print(f"\n❌ {args.command} failed on IO: {e}")
        return 1
    except KeyboardInterrupt:
        print("\n⚠️  Interrupted by user")
        return 130


def run() -> None:
    sys.exit(asyncio.run(main()))


if __name__ == "__main__":
    run()
