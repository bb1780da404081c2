"""Command-line interface.

Subcommands: split, eval, fit, report, plot, pipeline. Exit codes: 0 on
success, 1 on validation or usage errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .datasets import METHOD_ORDER, Method, ScaleVariable
from .embfile import read_embeddings, write_embeddings
from .errors import ArgumentError, FewscaleError
from .fewshot import FineTuneConfig, run_evaluation
from .fitting import FitInfeasible, fit_power_law
from .pipeline import RunConfig, _law_json, run_pipeline
from .report import emit_plot, emit_table, ingest_curve_csv
from .sampling import EpisodeConfig, split_classes
from . import __version__


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_json(payload: dict, out: str | None, default_name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.suffix != ".json":
        path.mkdir(parents=True, exist_ok=True)
        path = path / default_name
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _load_eval_settings(
    config_path: str | None,
) -> tuple[EpisodeConfig, FineTuneConfig, tuple[Method, ...]]:
    raw: dict = {}
    if config_path is not None:
        with open(config_path, "r") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ArgumentError(f"{config_path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ArgumentError(f"{config_path}: config root must be a JSON object")
    episode = EpisodeConfig(**dict(raw.get("episode", {})))
    finetune = FineTuneConfig(**dict(raw.get("finetune", {})))
    names = raw.get("methods")
    if names is None:
        methods = METHOD_ORDER
    else:
        try:
            methods = tuple(Method(m) for m in names)
        except ValueError as exc:
            raise ArgumentError(str(exc)) from exc
    return episode, finetune, methods


def _cmd_split(args: argparse.Namespace) -> None:
    dataset = read_embeddings(args.input)
    split = split_classes(dataset, args.fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_embeddings(
        dataset.restrict_to_classes(split.train_classes), out / "train.embd"
    )
    write_embeddings(
        dataset.restrict_to_classes(split.holdout_classes), out / "holdout.embd"
    )
    payload = {
        "fraction": split.fraction,
        "seed": split.seed,
        "train_classes": sorted(split.train_classes),
        "holdout_classes": sorted(split.holdout_classes),
    }
    with open(out / "split.json", "w", newline="\n") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(
        f"split {args.input}: {len(split.train_classes)} train / "
        f"{len(split.holdout_classes)} holdout classes -> {out}"
    )


def _cmd_eval(args: argparse.Namespace) -> None:
    episode, finetune, methods = _load_eval_settings(args.config)
    if args.seed is not None:
        episode = EpisodeConfig(
            way=episode.way,
            shot=episode.shot,
            queries_per_class=episode.queries_per_class,
            trials=episode.trials,
            master_seed=args.seed,
        )
    view = read_embeddings(args.input)
    estimates = run_evaluation(
        view, episode, methods=methods, ft=finetune, workers=args.workers
    )
    payload = {
        "input": args.input,
        "episode": {
            "way": episode.way,
            "shot": episode.shot,
            "queries_per_class": episode.queries_per_class,
            "trials": episode.trials,
            "master_seed": episode.master_seed,
        },
        "estimates": [
            {
                "method": e.method.value,
                "mean_accuracy": e.mean_accuracy,
                "ci_low": e.ci_low,
                "ci_high": e.ci_high,
                "trials": e.trials,
            }
            for e in estimates
        ],
    }
    _write_json(payload, args.out, "eval.json")


def _fit_payload(path: str) -> dict:
    curve = ingest_curve_csv(path)
    fit = fit_power_law(curve)
    if isinstance(fit, FitInfeasible):
        return {"input": path, "infeasible": fit.reason, "label": fit.label}
    return {"input": path, "fit": _law_json(fit)}


def _cmd_fit(args: argparse.Namespace) -> None:
    _write_json(_fit_payload(args.curve), args.out, "fit.json")


def _cmd_report(args: argparse.Namespace) -> None:
    fits = []
    labels = []
    for path in args.curves:
        curve = ingest_curve_csv(path)
        fits.append(fit_power_law(curve))
        labels.append(curve.label)
    table = emit_table(fits, labels, columns=["Fitted law"])
    if args.out is None:
        sys.stdout.write(table)
    else:
        path = Path(args.out)
        if path.suffix != ".txt":
            path.mkdir(parents=True, exist_ok=True)
            path = path / "table.txt"
        with open(path, "w", newline="\n") as fh:
            fh.write(table)


def _cmd_plot(args: argparse.Namespace) -> None:
    curve = ingest_curve_csv(args.curve)
    fit = None if args.no_fit else fit_power_law(curve)
    out = args.out or str(Path(args.curve).with_suffix(".svg"))
    emit_plot(curve, fit, out)
    print(f"wrote {out} and {Path(out).with_suffix('.csv')}")


def _cmd_pipeline(args: argparse.Namespace) -> None:
    config = RunConfig.from_json(args.config)
    if args.seed is not None:
        episode = config.episode
        config = RunConfig(
            sources=config.sources,
            targets=config.targets,
            schedule=config.schedule,
            episode=EpisodeConfig(
                way=episode.way,
                shot=episode.shot,
                queries_per_class=episode.queries_per_class,
                trials=episode.trials,
                master_seed=args.seed,
            ),
            finetune=config.finetune,
            methods=config.methods,
            split_fraction=config.split_fraction,
            output_dir=config.output_dir,
            label=config.label,
        )
    if args.out is not None:
        config = RunConfig(
            sources=config.sources,
            targets=config.targets,
            schedule=config.schedule,
            episode=config.episode,
            finetune=config.finetune,
            methods=config.methods,
            split_fraction=config.split_fraction,
            output_dir=args.out,
            label=config.label,
        )
    run_pipeline(config, workers=args.workers)
    print(f"pipeline complete -> {config.output_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fewscale", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[], help="class-split an embedding file")
    p.add_argument("input", help="embedding file (.embd)")
    p.add_argument("--fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("eval", help="episodic evaluation of an embedding file")
    p.add_argument("input", help="embedding file (.embd)")
    p.add_argument("--config", help="JSON with episode/finetune/methods sections")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output directory or .json path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fit", help="fit a power law to a curve CSV")
    p.add_argument("curve", help="CSV with header value,error_percent")
    p.add_argument("--out", default=None, help="output directory or .json path")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("report", help="render a law table from curve CSVs")
    p.add_argument("curves", nargs="+", help="curve CSV files, one row each")
    p.add_argument("--out", default=None, help="output directory or .txt path")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("plot", help="log-log SVG plot of a curve CSV")
    p.add_argument("curve", help="CSV with header value,error_percent")
    p.add_argument("--no-fit", action="store_true", help="plot points only")
    p.add_argument("--out", default=None, help="output .svg path")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("pipeline", help="full split/subsample/evaluate/fit run")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except FewscaleError as exc:
        print(f"fewscale: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fewscale: i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
