"""
cade command line.

    cade generate      --config linear-toy --out data/
    cade train         --config synmeasurement-fig6 --seed 0 --out models/
    cade attack        --config pendulum-sim --out runs/pendulum
    cade sweep         --config pendulum-sim --epsilons 0.1 0.3 0.5
    cade verify-props  --seed 0 --instances 100
    cade report        --out runs/pendulum

Errors from the library end the process with exit code 2 and one JSON
line on stderr: {"error": <type>, "message": ..., "context": {...}}.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .config import ExperimentConfig, bundled_configs, load_config
from .errors import CadeError
from .harness import TRAIN_STREAM, budget_sweep, child_seed, prepare_data, run, train_victim
from .propositions import run_suite
from .report import write_report

logger = logging.getLogger("cade")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seeds([args.seed])
    return config


def _out(args, config: Optional[ExperimentConfig] = None) -> Path:
    if args.out:
        return Path(args.out)
    if config is not None:
        return Path(config.output)
    return Path("runs")


def cmd_generate(args) -> int:
    config = _load(args)
    out = _out(args, config)
    for seed in config.seeds:
        train_data, test_data = prepare_data(config, seed)
        train_data.save(out / f"seed-{seed}" / "train.csv")
        test_data.save(out / f"seed-{seed}" / "test.csv")
        print(f"seed {seed}: {train_data} / {test_data} -> {out / f'seed-{seed}'}")
    return 0


def cmd_train(args) -> int:
    config = _load(args)
    out = _out(args, config)
    for seed in config.seeds:
        train_data, _ = prepare_data(config, seed)
        for k, victim in enumerate(config.victims):
            model, metrics = train_victim(victim, train_data, child_seed(seed, TRAIN_STREAM, k))
            target = out / f"seed-{seed}" / "models" / f"{victim.name}.json"
            model.save(target)
            print(f"seed {seed} {victim.name}: train_loss={metrics['train_loss']:.4f} -> {target}")
    return 0


def cmd_attack(args) -> int:
    config = _load(args)
    if args.workers:
        config = replace(config, workers=args.workers)
    bundle = run(config, _out(args, config))
    print((bundle.out_dir / "summary.md").read_text())
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    sweep = budget_sweep(config, args.epsilons, _out(args, config))
    print(sweep.to_string(index=False))
    return 0


def cmd_verify_props(args) -> int:
    result = run_suite(seed=args.seed or 0, instances=args.instances)
    table = result.to_frame()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "propositions.csv", index=False)
    print(f"seed={result.seed} instances={result.instances}")
    print(table.to_string(index=False))
    return 0 if result.passed else 1


def cmd_report(args) -> int:
    _, md_path = write_report(_out(args))
    print(md_path.read_text())
    return 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors surface as UsageError so main() can print them as JSON."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fail(error: str, message: str, context: Optional[dict] = None):
    print(json.dumps({"error": error, "message": message, "context": context or {}}, default=str), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cade", description="Counterfactual adversarial examples over SCMs")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help=f"Config path or bundled name ({', '.join(bundled_configs())})")
        p.add_argument("--seed", type=int, default=None, help="Run a single seed instead of the config's list")
        p.add_argument("--out", type=str, default=None, help="Output directory")
        return p

    p = with_common(sub.add_parser("generate", help="Write train/test datasets"))
    p.set_defaults(func=cmd_generate)
    p = with_common(sub.add_parser("train", help="Train victims and save checkpoints"))
    p.set_defaults(func=cmd_train)
    p = with_common(sub.add_parser("attack", help="Run the full attack grid"))
    p.add_argument("--workers", type=int, default=None, help="Concurrent attack cells")
    p.set_defaults(func=cmd_attack)
    p = with_common(sub.add_parser("sweep", help="Budget sweep to sweep.csv"))
    p.add_argument("--epsilons", type=float, nargs="+", default=None, help="Budgets (default: the config's)")
    p.set_defaults(func=cmd_sweep)
    p = with_common(sub.add_parser("verify-props", help="Exact checks on random discrete SCMs"), config_required=False)
    p.add_argument("--instances", type=int, default=100, help="Random instances per check")
    p.set_defaults(func=cmd_verify_props)
    p = with_common(sub.add_parser("report", help="Rebuild summary tables of a run directory"), config_required=False)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _fail("UsageError", str(e), {"usage": parser.format_usage().strip()})
        return 2
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CadeError as e:
        _fail(type(e).__name__, str(e), e.context())
        return 2
    except FileNotFoundError as e:
        _fail("FileNotFoundError", str(e))
        return 2
    except Exception as e:
        logger.exception("unexpected failure")
        _fail(type(e).__name__, str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
