"""End-to-end run orchestration: split, subsample, evaluate, fit, emit.

A run enumerates (checkpoint, ratio, method) cells, takes the best
accuracy across checkpoints per (ratio, method), converts it to an error
percentage, fits power laws per method, and writes a report bundle
(JSON, text table, per-method curve CSVs, and SVG plots) under the output
directory. Everything is a pure function of the config and input files:
re-running writes byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .datasets import (
    METHOD_ORDER,
    EmbeddingDataset,
    Method,
    ScaleVariable,
    ScalingCurve,
)
from .embfile import read_embeddings
from .errors import (
    ArgumentError,
    DegenerateLawError,
    FewscaleError,
    PipelineCellError,
    ValidationError,
)
from .fewshot import FineTuneConfig, run_evaluation
from .fitting import FitInfeasible, FitResult, fit_power_law
from .laws import normalize_law
from .report import METHOD_TITLES, emit_plot, emit_table
from .sampling import (
    EpisodeConfig,
    ScalingSchedule,
    split_classes,
    subsample_classes,
    subsample_data,
)


@dataclass(frozen=True)
class RunConfig:
    """One evaluation run over a source/target pair of embedding files.

    sources and targets list (checkpoint name, file path) pairs; a single
    target is broadcast across all source checkpoints. A target path equal
    to its source path selects self mode: classes are split and episodes
    are drawn from the holdout side. Any other path is evaluated whole.
    """

    sources: tuple[tuple[str, str], ...]
    targets: tuple[tuple[str, str], ...]
    schedule: ScalingSchedule
    episode: EpisodeConfig
    finetune: FineTuneConfig = field(default_factory=FineTuneConfig)
    methods: tuple[Method, ...] = METHOD_ORDER
    split_fraction: float = 0.8
    output_dir: str = "out"
    label: str = "run"

    def __post_init__(self) -> None:
        if not self.sources:
            raise ArgumentError("config needs at least one source checkpoint")
        if not self.targets:
            raise ArgumentError("config needs at least one target")
        if len(self.targets) not in (1, len(self.sources)):
            raise ArgumentError(
                f"targets must number 1 or match the {len(self.sources)} sources, "
                f"got {len(self.targets)}"
            )
        if not self.methods:
            raise ArgumentError("config needs at least one method")
        seen = set()
        for m in self.methods:
            if m in seen:
                raise ArgumentError(f"duplicate method '{m.value}'")
            seen.add(m)
        if not (0.0 < self.split_fraction < 1.0):
            raise ArgumentError(
                f"split_fraction must lie in (0, 1), got {self.split_fraction}"
            )

    def pairs(self) -> list[tuple[str, str, str]]:
        """(checkpoint, source path, target path) per checkpoint."""
        out = []
        for i, (checkpoint, source) in enumerate(self.sources):
            target = self.targets[0] if len(self.targets) == 1 else self.targets[i]
            out.append((checkpoint, source, target[1]))
        return out

    @classmethod
    def from_mapping(cls, raw: Mapping) -> "RunConfig":
        """Build from parsed JSON, rejecting unknown keys."""
        known = {
            "sources",
            "targets",
            "schedule",
            "episode",
            "finetune",
            "methods",
            "split_fraction",
            "output_dir",
            "label",
        }
        unknown = set(raw) - known
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")

        def endpoint_list(key: str) -> tuple[tuple[str, str], ...]:
            entries = raw.get(key)
            if not isinstance(entries, list) or not entries:
                raise ArgumentError(f"config '{key}' must be a non-empty list")
            out = []
            for i, e in enumerate(entries):
                if not isinstance(e, Mapping) or set(e) - {"checkpoint", "path"}:
                    raise ArgumentError(
                        f"{key}[{i}] must be an object with 'checkpoint' and 'path'"
                    )
                if "path" not in e:
                    raise ArgumentError(f"{key}[{i}] is missing 'path'")
                out.append((str(e.get("checkpoint", f"ckpt{i}")), str(e["path"])))
            return tuple(out)

        sched_raw = raw.get("schedule", {})
        if not isinstance(sched_raw, Mapping) or set(sched_raw) - {
            "variable",
            "ratios",
        }:
            raise ArgumentError("config 'schedule' must hold 'variable' and 'ratios'")
        try:
            variable = ScaleVariable(sched_raw.get("variable", "dataset_size"))
        except ValueError as exc:
            raise ArgumentError(str(exc)) from exc
        schedule = ScalingSchedule(
            variable=variable, ratios=tuple(sched_raw.get("ratios", ()))
        )

        episode_raw = dict(raw.get("episode", {}))
        episode = EpisodeConfig(**episode_raw)
        finetune = FineTuneConfig(**dict(raw.get("finetune", {})))
        method_names = raw.get("methods")
        if method_names is None:
            methods = METHOD_ORDER
        else:
            try:
                methods = tuple(Method(m) for m in method_names)
            except ValueError as exc:
                raise ArgumentError(str(exc)) from exc
        return cls(
            sources=endpoint_list("sources"),
            targets=endpoint_list("targets"),
            schedule=schedule,
            episode=episode,
            finetune=finetune,
            methods=methods,
            split_fraction=float(raw.get("split_fraction", 0.8)),
            output_dir=str(raw.get("output_dir", "out")),
            label=str(raw.get("label", "run")),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        with open(path, "r") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ArgumentError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ArgumentError(f"{path}: config root must be a JSON object")
        return cls.from_mapping(raw)


def _evaluation_view(
    source: EmbeddingDataset,
    target: EmbeddingDataset,
    self_mode: bool,
    schedule: ScalingSchedule,
    ratio: float,
    split_fraction: float,
    seed: int,
) -> tuple[EmbeddingDataset, int]:
    """The dataset view episodes are drawn from at one ratio, plus the
    retained training count used as the curve's x value.

    Data mode subsamples per class with one shared seed, so smaller ratios
    retain prefixes of larger ones. In self mode the subsample covers the
    whole source and evaluation happens on its holdout classes, with x
    counting only train-class samples; in cross mode the target itself is
    subsampled and counted. Class mode scales the source's train-class
    count, which cannot move a frozen-embedding evaluation, so the view is
    the unchanged holdout (or target) and only x varies.
    """
    if schedule.variable is ScaleVariable.DATASET_SIZE:
        if self_mode:
            split = split_classes(source, split_fraction, seed)
            sub = subsample_data(source, ratio, seed)
            view = sub.restrict_to_classes(split.holdout_classes)
            x = len(sub.restrict_to_classes(split.train_classes))
        else:
            view = subsample_data(target, ratio, seed)
            x = len(view)
        return view, x
    if self_mode:
        split = split_classes(source, split_fraction, seed)
        train = source.restrict_to_classes(split.train_classes)
        sub = subsample_classes(train, ratio, seed)
        view = source.restrict_to_classes(split.holdout_classes)
    else:
        sub = subsample_classes(source, ratio, seed)
        view = target
    return view, len(sub.classes())


def _law_json(fit: FitResult) -> dict:
    law = fit.law
    out = {
        "err_inf": float(law.err_inf),
        "k": float(law.k),
        "alpha": float(law.alpha),
        "variable": law.variable.value,
        "sse": float(fit.sse),
        "converged": bool(fit.converged),
        "per_point_residuals": [float(r) for r in fit.per_point_residuals],
    }
    try:
        norm = normalize_law(law)
    except DegenerateLawError:
        out["normalized"] = None
    else:
        out["normalized"] = {
            "err_inf": norm.err_inf,
            "scale": norm.scale,
            "alpha": norm.alpha,
        }
    return out


def run_pipeline(config: RunConfig, workers: int = 1) -> dict:
    """Execute a full run and write the report bundle.

    Returns the bundle that was written to report.json. Raises
    PipelineCellError for any evaluation failure, naming the (checkpoint,
    ratio, method) cell; OSError passes through for unwritable paths.
    """
    datasets: dict[str, EmbeddingDataset] = {}
    for _, source, target in config.pairs():
        for p in (source, target):
            if p not in datasets:
                datasets[p] = read_embeddings(p)

    seed = config.episode.master_seed
    methods = [m for m in METHOD_ORDER if m in set(config.methods)]

    cells = []
    best: dict[tuple[float, Method], dict] = {}
    x_by_ratio: dict[float, int] = {}
    for checkpoint, source_path, target_path in config.pairs():
        source = datasets[source_path]
        target = datasets[target_path]
        self_mode = source_path == target_path
        for ratio in config.schedule.ratios:
            try:
                view, x = _evaluation_view(
                    source,
                    target,
                    self_mode,
                    config.schedule,
                    ratio,
                    config.split_fraction,
                    seed,
                )
            except FewscaleError as exc:
                raise PipelineCellError(
                    f"checkpoint '{checkpoint}' ratio {ratio:g} "
                    f"(building evaluation view): {exc}"
                ) from exc
            if ratio in x_by_ratio and x_by_ratio[ratio] != x:
                raise ValidationError(
                    f"checkpoints disagree on retained count at ratio {ratio:g}: "
                    f"{x_by_ratio[ratio]} vs {x}; sources must embed one dataset"
                )
            x_by_ratio[ratio] = x
            for method in methods:
                try:
                    estimate = run_evaluation(
                        view,
                        config.episode,
                        methods=[method],
                        ft=config.finetune,
                        workers=workers,
                    )[0]
                except FewscaleError as exc:
                    raise PipelineCellError(
                        f"checkpoint '{checkpoint}' ratio {ratio:g} "
                        f"method {method.value}: {exc}"
                    ) from exc
                cells.append(
                    {
                        "checkpoint": checkpoint,
                        "ratio": ratio,
                        "method": method.value,
                        "accuracy": {
                            "mean": estimate.mean_accuracy,
                            "ci_low": estimate.ci_low,
                            "ci_high": estimate.ci_high,
                        },
                        "trials": estimate.trials,
                    }
                )
                key = (ratio, method)
                if (
                    key not in best
                    or estimate.mean_accuracy > best[key]["accuracy"]
                ):
                    best[key] = {
                        "checkpoint": checkpoint,
                        "accuracy": estimate.mean_accuracy,
                    }

    curves: dict[Method, ScalingCurve] = {}
    notes: dict[str, str] = {}
    fits: dict[Method, FitResult | FitInfeasible | None] = {}
    for method in methods:
        points = []
        for ratio in config.schedule.ratios:
            entry = best[(ratio, method)]
            error = 100.0 * (1.0 - entry["accuracy"])
            points.append((float(x_by_ratio[ratio]), error))
        try:
            curve = ScalingCurve.from_points(
                config.schedule.variable,
                points,
                label=f"{config.label}:{method.value}",
            )
        except ValidationError as exc:
            raise ValidationError(
                f"method {method.value}: curve assembly failed: {exc}"
            ) from exc
        curves[method] = curve
        zero = [v for v, e in curve.points if e <= 0.0]
        if len(points) < 3:
            fits[method] = None
            notes[method.value] = (
                f"insufficient points for a fit ({len(points)} < 3)"
            )
        elif zero:
            # A perfect accuracy cell is a legitimate result but leaves the
            # log-space fit nothing to work with.
            fits[method] = FitInfeasible(
                reason=f"zero error rate at value {zero[0]:g}",
                label=curve.label,
            )
        else:
            fits[method] = fit_power_law(curve)

    out_dir = Path(config.output_dir)
    (out_dir / "curves").mkdir(parents=True, exist_ok=True)
    (out_dir / "plots").mkdir(parents=True, exist_ok=True)

    fits_json: dict[str, object] = {}
    for method in methods:
        fit = fits[method]
        if fit is None:
            fits_json[method.value] = {"note": notes[method.value]}
        elif isinstance(fit, FitInfeasible):
            fits_json[method.value] = {"infeasible": fit.reason}
        else:
            fits_json[method.value] = _law_json(fit)

    # A zero error rate cannot be placed on a log axis, so such curves get
    # no SVG; the bundle records the skip and curves/*.csv keeps the data.
    plots_json: dict[str, object] = {
        m.value: (
            None
            if any(e <= 0.0 for _, e in curves[m].points)
            else f"plots/{m.value}.svg"
        )
        for m in methods
    }

    bundle = {
        "label": config.label,
        "sources": [
            {"checkpoint": c, "path": p} for c, p in config.sources
        ],
        "targets": [
            {"checkpoint": c, "path": p} for c, p in config.targets
        ],
        "schedule": {
            "variable": config.schedule.variable.value,
            "ratios": list(config.schedule.ratios),
        },
        "episode": {
            "way": config.episode.way,
            "shot": config.episode.shot,
            "queries_per_class": config.episode.queries_per_class,
            "trials": config.episode.trials,
            "master_seed": config.episode.master_seed,
        },
        "finetune": {
            "steps": config.finetune.steps,
            "learning_rate": config.finetune.learning_rate,
            "init_scale": config.finetune.init_scale,
        },
        "methods": [m.value for m in methods],
        "split_fraction": config.split_fraction,
        "cells": cells,
        "best": [
            {
                "ratio": ratio,
                "method": method.value,
                "checkpoint": best[(ratio, method)]["checkpoint"],
                "accuracy": best[(ratio, method)]["accuracy"],
                "error_percent": 100.0 * (1.0 - best[(ratio, method)]["accuracy"]),
                "value": x_by_ratio[ratio],
            }
            for ratio in config.schedule.ratios
            for method in methods
        ],
        "curves": {
            m.value: [
                {"value": v, "error_percent": e} for v, e in curves[m].points
            ]
            for m in methods
        },
        "fits": fits_json,
        "plots": plots_json,
    }

    with open(out_dir / "report.json", "w", newline="\n") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
        fh.write("\n")

    table = emit_table(
        [fits[m] for m in methods],
        [config.label],
        columns=[
            f"{METHOD_TITLES[m]} Err({config.schedule.variable.symbol})"
            for m in methods
        ],
    )
    with open(out_dir / "table.txt", "w", newline="\n") as fh:
        fh.write(table)

    for method in methods:
        curve = curves[method]
        with open(out_dir / "curves" / f"{method.value}.csv", "w", newline="\n") as fh:
            fh.write("value,error_percent\n")
            for v, e in curve.points:
                fh.write(f"{v!r},{e!r}\n")
        if plots_json[method.value] is not None:
            emit_plot(curve, fits[method], out_dir / "plots" / f"{method.value}.svg")

    return bundle
