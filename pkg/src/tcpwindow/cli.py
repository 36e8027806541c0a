"""Command-line entry point: ``tcpwindow run|list-experiments|validate``.

Exit codes: 0 when every report is satisfied, 1 when some report fails,
2 for an invalid config or an unwritable output directory.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import REGISTRY, ConfigError, ExperimentConfig, resolve, run_experiment


def _load(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    return ExperimentConfig.from_json(text)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tcpwindow", description="Run TCP window-size process experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="override root_seed")
    run.add_argument("--replicas", type=int, help="override n_replicas")
    run.add_argument("--out", help="override output_dir")
    run.add_argument("--workers", type=int, help="override the worker pool size")
    sub.add_parser("list-experiments", help="print the experiment names")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        for name, exp in REGISTRY.items():
            print(f"{name}\t{exp.description}")
        return 0
    try:
        cfg = _load(args.config)
        if args.command == "validate":
            resolved = resolve(cfg)
            print(f"ok: {resolved.experiment} (sha256 {resolved.digest()[:12]})")
            return 0
        overrides = {}
        if args.seed is not None:
            overrides["root_seed"] = args.seed
        if args.replicas is not None:
            overrides["n_replicas"] = args.replicas
        if args.out is not None:
            overrides["output_dir"] = args.out
        if args.workers is not None:
            overrides["workers"] = args.workers
        cfg = replace(cfg, **overrides)
        result, out = run_experiment(cfg)
    except (ConfigError, TypeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for report in result.reports:
        print(report.line())
    print(f"wrote {out}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
