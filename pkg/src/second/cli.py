"""Command line entry point: `second run`.

Configuration comes from an optional JSON file mirroring RunConfig;
command-line flags override individual fields. Exit codes: 0 success,
2 configuration error, 3 backend or data error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .backends import Backend, DumpBackend, SyntheticBackend, SyntheticConfig
from .decoding import CDConfig
from .errors import ConfigError, DataError, SecondError
from .grids import StagePlan
from .harness import CDMode, RunConfig, emit_csv, emit_heatmap_pgm, run_dataset
from .selection import SelectionConfig, SelectionMode

DEFAULT_CONFIG = {
    "stages": [84, 168, 336, 672],
    "patch_px": 14,
    "lambda": 1.0,
    "selection": "dynamic",
    "cumulative_union": False,
    "cd": "multi",
    "alpha": 0.7,
    "beta": 0.7,
    "gamma": 1.0,
    "backend": "synthetic",
    "synthetic": {},
    "seed": 42,
    "out": "out",
    "heatmaps": 0,
}


def _parse_stages(value) -> list[int]:
    if isinstance(value, str):
        value = value.split(",")
    stages = [int(v) for v in value]
    if not stages:
        raise ConfigError("stage list is empty")
    return stages


def _parse_selection(value: str, lam: float, cumulative_union: bool) -> SelectionConfig:
    value = value.strip().lower()
    if value.startswith("fixed:"):
        return SelectionConfig(lam=lam, mode=SelectionMode.FIXED,
                               fixed_fraction=float(value.split(":", 1)[1]),
                               cumulative_union=cumulative_union)
    try:
        mode = SelectionMode(value)
    except ValueError:
        raise ConfigError(f"unknown selection mode {value!r}") from None
    if mode is SelectionMode.FIXED:
        raise ConfigError("fixed selection needs a fraction, e.g. fixed:0.5")
    return SelectionConfig(lam=lam, mode=mode, cumulative_union=cumulative_union)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="second",
                                     description="Selective multi-scale decoding runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a dataset under one configuration")
    run.add_argument("--config", type=Path, help="JSON config file")
    run.add_argument("--backend", help="synthetic | dump:<dir>")
    run.add_argument("--stages", help="comma-separated resolutions, e.g. 84,168,336,672")
    run.add_argument("--lambda", dest="lam", type=float, help="selection sharpness")
    run.add_argument("--alpha", type=float, help="contrast coefficient alpha")
    run.add_argument("--beta", type=float, help="contrast coefficient beta")
    run.add_argument("--gamma", type=float, help="contrast coefficient gamma")
    run.add_argument("--cd", choices=["none", "single", "multi"], help="contrast mode")
    run.add_argument("--selection", help="dynamic | fixed:F | reversed | all")
    run.add_argument("--seed", type=int, help="fixture seed")
    run.add_argument("--out", type=Path, help="output directory")
    return parser


def _load_config(args) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        unknown = set(loaded) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    overrides = {
        "backend": args.backend,
        "stages": args.stages,
        "lambda": args.lam,
        "alpha": args.alpha,
        "beta": args.beta,
        "gamma": args.gamma,
        "cd": args.cd,
        "selection": args.selection,
        "seed": args.seed,
        "out": args.out,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _build_run(cfg: dict) -> tuple[RunConfig, Backend, dict]:
    try:
        cd = CDConfig(alpha=float(cfg["alpha"]), beta=float(cfg["beta"]),
                      gamma=float(cfg["gamma"]))
        plan = StagePlan.from_resolutions(_parse_stages(cfg["stages"]),
                                          patch_px=int(cfg["patch_px"]),
                                          lam=float(cfg["lambda"]), cd=cd)
        selection = _parse_selection(str(cfg["selection"]), lam=float(cfg["lambda"]),
                                     cumulative_union=bool(cfg["cumulative_union"]))
        run_cfg = RunConfig(plan=plan, selection=selection, cd=cd,
                            cd_mode=CDMode(str(cfg["cd"])),
                            seed=int(cfg["seed"]), out_dir=Path(cfg["out"]))
    except (ValueError, SecondError) as e:
        raise ConfigError(str(e)) from e

    spec = str(cfg["backend"])
    if spec == "synthetic":
        try:
            synth = SyntheticConfig(seed=int(cfg["seed"]), **{
                k: tuple(v) if isinstance(v, list) else v
                for k, v in dict(cfg["synthetic"]).items() if k != "seed"
            })
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad synthetic config: {e}") from e
        backend: Backend = SyntheticBackend(plan, synth)
    elif spec.startswith("dump:"):
        backend = DumpBackend(spec.split(":", 1)[1], plan)
    else:
        raise ConfigError(f"unknown backend {spec!r} (use synthetic or dump:<dir>)")
    return run_cfg, backend, cfg


def _run(args) -> int:
    run_cfg, backend, cfg = _build_run(_load_config(args))
    heatmap_cases = int(cfg["heatmaps"])
    out_dir = run_cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    report, results = run_dataset(backend, run_cfg, collect_attention=heatmap_cases > 0)
    elapsed = time.perf_counter() - started

    emit_csv(results, out_dir / "results.csv", stage_count=run_cfg.plan.stage_count)
    if heatmap_cases > 0:
        heat_dir = out_dir / "heatmaps"
        heat_dir.mkdir(exist_ok=True)
        for result in results[:heatmap_cases]:
            for stage, attn in enumerate(result.attention_snapshots or (), start=1):
                emit_heatmap_pgm(attn, heat_dir / f"{result.case_id}_s{stage}.pgm")

    print(f"cases: {report.total}")
    print(f"recall: {report.recall:.4f}")
    print(f"accuracy: {report.accuracy:.4f}")
    print(f"f1: {report.f1:.4f}")
    print(f"wall_time_s: {elapsed:.3f}")
    print(f"results: {out_dir / 'results.csv'}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, SecondError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
