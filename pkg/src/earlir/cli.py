"""Command-line front end: synth, run, eval."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, ExperimentConfig, load_config
from .dataset import synth_dataset
from .evaluation import EvalReport, report
from .matching import read_score_matrix
from .pipeline import run_experiment

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_SUMMARY_HEADER = (
    f"{'#':>2}  {'METHOD':<22}{'RANK-1':>8}{'RANK-2':>8}{'RANK-3':>8}"
    f"{'RANK-4':>8}{'RANK-5':>8}{'PERFECT RANK':>14}{'EER (%)':>9}"
)


def _summary_row(index: int, rep: EvalReport) -> str:
    rr = "".join(f"{r:8.2f}" for r in rep.rank_rates)
    return f"{index:>2}  {rep.method:<22}{rr}{rep.perfect_rank:>14}{rep.eer:>9.2f}"


def _print_reports(reports: List[EvalReport]) -> None:
    print(_SUMMARY_HEADER)
    for i, rep in enumerate(reports, start=1):
        print(_summary_row(i, rep))


def _resolve_threads(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("EARLIR_THREADS", "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"EARLIR_THREADS must be an integer, got {env!r}") from None
    return 1


def _describe_plan(config: ExperimentConfig, threads: int) -> str:
    lines = ["experiment plan:"]
    if config.manifest_path is not None:
        lines.append(f"  dataset: manifest {config.manifest_path}")
    else:
        sy = config.synth
        lines.append(
            f"  dataset: synth {sy.subjects} subjects x {sy.samples} samples "
            f"({sy.width}x{sy.height}, noise_sigma={sy.noise_sigma}, "
            f"shift_max={sy.shift_max}, seed={config.synth_seed()}) -> {sy.out_dir}"
        )
    p = config.protocol
    lines.append(
        f"  protocol: {p.ear_side} ear, {p.train_subjects} train subjects x "
        f"{p.train_samples} samples, 1 gallery + {p.probe_samples} probes per "
        f"subject, seed {p.seed}"
    )
    lines.append(f"  methods ({len(config.methods)}): {', '.join(config.methods)}")
    for fusion in config.fusions:
        parts = " + ".join(f"{w:g}*{m}" for m, w in fusion.components)
        lines.append(f"  fusion {fusion.name}: {parts}")
    lines.append(f"  normalization: {config.normalization}")
    lines.append(f"  output: {config.output_dir}")
    lines.append(f"  threads: {threads if threads > 0 else 'auto'}")
    return "\n".join(lines)


def cmd_synth(args: argparse.Namespace) -> int:
    manifest = synth_dataset(
        args.out,
        n_subjects=args.subjects,
        n_samples=args.samples,
        width=args.width,
        height=args.height,
        noise_sigma=args.noise_sigma,
        shift_max=args.shift_max,
        seed=args.seed,
    )
    print(Path(args.out) / "manifest.csv")
    print(f"wrote {len(manifest.samples)} images", file=sys.stderr)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    threads = _resolve_threads(args.threads)
    if args.dry_run:
        print(_describe_plan(config, threads))
        return EXIT_OK
    reports = run_experiment(config, threads=threads)
    _print_reports(reports)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    matrix = read_score_matrix(args.scores)
    rep = report(matrix, config={"scores": str(args.scores)})
    _print_reports([rep])
    print(json.dumps(rep.to_json_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earlir",
        description="Ear identification pipelines: synthesize data, run experiments, evaluate scores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--subjects", type=int, default=20)
    synth.add_argument("--samples", type=int, default=15)
    synth.add_argument("--width", type=int, default=60)
    synth.add_argument("--height", type=int, default=80)
    synth.add_argument("--noise-sigma", type=float, default=0.02)
    synth.add_argument("--shift-max", type=int, default=1)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(fn=cmd_synth)

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("--config", required=True, help="experiment TOML file")
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads (0 = auto; default EARLIR_THREADS or 1)")
    run.add_argument("--dry-run", action="store_true",
                     help="print the resolved plan without executing")
    run.set_defaults(fn=cmd_run)

    ev = sub.add_parser("eval", help="evaluate an externally supplied score matrix")
    ev.add_argument("--scores", required=True,
                    help="score CSV (expects <name>.labels.csv sidecar alongside)")
    ev.set_defaults(fn=cmd_eval)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
