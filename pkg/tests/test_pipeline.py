import json
from pathlib import Path

import numpy as np
import pytest

from fewscale.datasets import DatasetMeta, EmbeddingDataset, Method, ScaleVariable
from fewscale.embfile import write_embeddings
from fewscale.errors import ArgumentError, PipelineCellError, ValidationError
from fewscale.pipeline import RunConfig, run_pipeline
from fewscale.report import ingest_curve_csv
from fewscale.sampling import EpisodeConfig, ScalingSchedule

from conftest import blob_dataset, gaussian_dataset


def small_episode(trials=15, seed=0, way=3, queries=3):
    return EpisodeConfig(
        way=way, shot=1, queries_per_class=queries, trials=trials, master_seed=seed
    )


def write_blob(tmp_path, name="blob.embd", **kwargs):
    # 15 classes split 0.8 -> 12 train / 3 holdout, enough for 3-way episodes
    ds = blob_dataset(**{"classes": 15, "per_class": 32, "dim": 6, "seed": 1, **kwargs})
    path = tmp_path / name
    write_embeddings(ds, path)
    return str(path)


def self_config(path, out, ratios=(1.0, 0.5, 0.25, 0.125, 0.0625), **kwargs):
    defaults = dict(
        sources=(("ck", path),),
        targets=(("ck", path),),
        schedule=ScalingSchedule(ScaleVariable.DATASET_SIZE, ratios),
        episode=small_episode(),
        methods=(Method.PROTOTYPICAL,),
        output_dir=str(out),
        label="t",
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


def bundle_tree(out: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()
    }


# ------------------------------------------------------------ config


def test_from_mapping_round_trip(tmp_path):
    raw = {
        "sources": [{"checkpoint": "a", "path": "a.embd"}],
        "targets": [{"path": "b.embd"}],
        "schedule": {"variable": "dataset_size", "ratios": [1.0, 0.5]},
        "episode": {"way": 4, "trials": 7},
        "finetune": {"steps": 2, "learning_rate": 0.5},
        "methods": ["matching"],
        "split_fraction": 0.7,
        "output_dir": "somewhere",
        "label": "demo",
    }
    config = RunConfig.from_mapping(raw)
    assert config.sources == (("a", "a.embd"),)
    assert config.targets[0][1] == "b.embd"
    assert config.schedule.ratios == (1.0, 0.5)
    assert config.episode.way == 4 and config.episode.trials == 7
    assert config.finetune.steps == 2
    assert config.methods == (Method.MATCHING,)
    assert config.split_fraction == 0.7
    assert config.label == "demo"


def test_from_mapping_rejects_unknown_keys():
    with pytest.raises(ArgumentError, match="unknown config keys"):
        RunConfig.from_mapping({"sources": [], "frobs": 1})


def test_from_mapping_rejects_malformed_endpoints():
    base = {"schedule": {}, "targets": [{"path": "t"}]}
    with pytest.raises(ArgumentError, match="sources"):
        RunConfig.from_mapping({**base, "sources": []})
    with pytest.raises(ArgumentError, match=r"sources\[0\]"):
        RunConfig.from_mapping({**base, "sources": [{"path": "x", "extra": 1}]})
    with pytest.raises(ArgumentError, match="missing 'path'"):
        RunConfig.from_mapping({**base, "sources": [{"checkpoint": "c"}]})


def test_from_mapping_rejects_unknown_method():
    raw = {
        "sources": [{"path": "a"}],
        "targets": [{"path": "a"}],
        "methods": ["nearest_neighbor"],
    }
    with pytest.raises(ArgumentError):
        RunConfig.from_mapping(raw)


def test_config_validation():
    sched = ScalingSchedule(ScaleVariable.DATASET_SIZE)
    ep = small_episode()
    with pytest.raises(ArgumentError, match="at least one source"):
        RunConfig(sources=(), targets=(("t", "p"),), schedule=sched, episode=ep)
    with pytest.raises(ArgumentError, match="targets must number"):
        RunConfig(
            sources=(("a", "p"), ("b", "q")),
            targets=(("x", "r"), ("y", "s"), ("z", "t")),
            schedule=sched,
            episode=ep,
        )
    with pytest.raises(ArgumentError, match="duplicate method"):
        RunConfig(
            sources=(("a", "p"),),
            targets=(("a", "p"),),
            schedule=sched,
            episode=ep,
            methods=(Method.MATCHING, Method.MATCHING),
        )
    with pytest.raises(ArgumentError, match="split_fraction"):
        RunConfig(
            sources=(("a", "p"),),
            targets=(("a", "p"),),
            schedule=sched,
            episode=ep,
            split_fraction=1.0,
        )


def test_single_target_broadcasts():
    config = RunConfig(
        sources=(("a", "p"), ("b", "q")),
        targets=(("shared", "t"),),
        schedule=ScalingSchedule(ScaleVariable.DATASET_SIZE),
        episode=small_episode(),
    )
    assert config.pairs() == [("a", "p", "t"), ("b", "q", "t")]


# ------------------------------------------------------------ runs


def test_self_mode_run_layout_and_arithmetic(tmp_path):
    path = write_blob(tmp_path)
    out = tmp_path / "out"
    bundle = run_pipeline(self_config(path, out))

    assert (out / "report.json").exists()
    assert (out / "table.txt").exists()
    assert (out / "curves" / "prototypical.csv").exists()
    disk = json.loads((out / "report.json").read_text())
    assert disk == json.loads(json.dumps(bundle))

    # error percentages are exactly 100 * (1 - accuracy)
    for row in bundle["best"]:
        assert row["error_percent"] == 100.0 * (1.0 - row["accuracy"])

    # 15 classes split 12/3; ratio 1.0 keeps all 12 * 32 train samples
    xs = {row["ratio"]: row["value"] for row in bundle["best"]}
    assert xs[1.0] == 384
    assert xs[0.5] == 192
    assert xs[0.0625] == 24  # floor(0.0625 * 32) = 2 per train class

    # curve points are (x, best error) sorted by x
    pts = bundle["curves"]["prototypical"]
    assert [p["value"] for p in pts] == sorted(p["value"] for p in pts)
    assert set(xs.values()) == {p["value"] for p in pts}


def test_rerun_is_byte_identical_across_workers(tmp_path):
    path = write_blob(tmp_path, name="w.embd", seed=3)
    out1, out2, out8 = tmp_path / "o1", tmp_path / "o2", tmp_path / "o8"
    run_pipeline(self_config(path, out1), workers=1)
    run_pipeline(self_config(path, out2), workers=1)
    run_pipeline(self_config(path, out8), workers=8)
    tree = bundle_tree(out1)
    assert tree == bundle_tree(out2)
    assert tree == bundle_tree(out8)
    assert "report.json" in tree and "table.txt" in tree


def test_best_accuracy_wins_across_checkpoints(tmp_path):
    # same sample ids and classes, very different embedding quality
    clean = gaussian_dataset(classes=10, per_class=16, dim=10, spacing=10.0, sigma=0.8, seed=2)
    noisy = EmbeddingDataset(
        dim=clean.dim,
        sample_ids=clean.sample_ids,
        class_ids=clean.class_ids,
        vectors=np.random.default_rng(5)
        .normal(size=(len(clean), clean.dim))
        .astype(np.float32),
        meta=DatasetMeta(checkpoint="noise"),
    )
    p_clean, p_noisy = tmp_path / "clean.embd", tmp_path / "noisy.embd"
    write_embeddings(clean, p_clean)
    write_embeddings(noisy, p_noisy)

    config = RunConfig(
        sources=(("clean", str(p_clean)), ("noisy", str(p_noisy))),
        targets=(("clean", str(p_clean)), ("noisy", str(p_noisy))),
        schedule=ScalingSchedule(ScaleVariable.DATASET_SIZE, (1.0, 0.5, 0.25)),
        episode=small_episode(trials=25, way=2, queries=4),
        methods=(Method.PROTOTYPICAL,),
        output_dir=str(tmp_path / "cmp"),
        label="cmp",
    )
    bundle = run_pipeline(config)
    assert len(bundle["cells"]) == 2 * 3  # checkpoints x ratios
    for row in bundle["best"]:
        assert row["checkpoint"] == "clean"
        by_cell = {
            (c["checkpoint"], c["ratio"]): c["accuracy"]["mean"]
            for c in bundle["cells"]
        }
        assert row["accuracy"] == max(
            by_cell[("clean", row["ratio"])], by_cell[("noisy", row["ratio"])]
        )


def test_cross_mode_counts_the_target(tmp_path):
    source = write_blob(tmp_path, name="src.embd", seed=7)
    target_ds = blob_dataset(classes=6, per_class=9, dim=6, seed=8)
    target = tmp_path / "tgt.embd"
    write_embeddings(target_ds, target)
    config = RunConfig(
        sources=(("ck", source),),
        targets=(("other", str(target)),),
        schedule=ScalingSchedule(ScaleVariable.DATASET_SIZE, (1.0, 0.5)),
        episode=small_episode(way=3, queries=2, trials=10),
        methods=(Method.MATCHING,),
        output_dir=str(tmp_path / "cross"),
        label="cross",
    )
    bundle = run_pipeline(config)
    xs = {row["ratio"]: row["value"] for row in bundle["best"]}
    assert xs[1.0] == 54  # whole target, no class split
    assert xs[0.5] == 6 * 4


def test_too_few_ratios_yield_a_note_not_a_fit(tmp_path):
    path = write_blob(tmp_path, name="short.embd")
    out = tmp_path / "short"
    bundle = run_pipeline(self_config(path, out, ratios=(1.0, 0.5)))
    note = bundle["fits"]["prototypical"]["note"]
    assert note == "insufficient points for a fit (2 < 3)"
    assert "n/a (insufficient points)" in (out / "table.txt").read_text()


def test_class_schedule_cannot_move_frozen_embeddings(tmp_path):
    path = write_blob(tmp_path, name="cls.embd")
    config = self_config(
        path,
        tmp_path / "cls",
        schedule=ScalingSchedule(ScaleVariable.CLASS_COUNT, (1.0, 0.5, 0.25)),
    )
    bundle = run_pipeline(config)
    # 12 train classes scaled to 12, 6, 3
    xs = sorted(row["value"] for row in bundle["best"])
    assert xs == [3, 6, 12]
    # the evaluation view never changes, so the curve is flat and honestly
    # reported as unfittable
    errs = {p["error_percent"] for p in bundle["curves"]["prototypical"]}
    assert len(errs) == 1
    assert "infeasible" in bundle["fits"]["prototypical"]


def test_perfect_accuracy_cell_skips_plot_and_reports_reason(tmp_path):
    path = tmp_path / "sep.embd"
    write_embeddings(
        gaussian_dataset(classes=15, per_class=32, dim=16, spacing=10.0, sigma=0.01),
        path,
    )
    out = tmp_path / "sep"
    bundle = run_pipeline(self_config(str(path), out, ratios=(1.0, 0.5, 0.25)))
    assert bundle["fits"]["prototypical"]["infeasible"].startswith("zero error rate")
    assert bundle["plots"]["prototypical"] is None
    assert not (out / "plots" / "prototypical.svg").exists()
    assert (out / "curves" / "prototypical.csv").exists()


def test_cell_errors_name_the_cell(tmp_path):
    # ratio 0.0625 leaves one sample per class: no queries possible
    path = write_blob(tmp_path, name="thin.embd", per_class=8)
    config = self_config(path, tmp_path / "thin", ratios=(1.0, 0.0625))
    with pytest.raises(PipelineCellError) as err:
        run_pipeline(config)
    msg = str(err.value)
    assert "checkpoint 'ck'" in msg
    assert "ratio 0.0625" in msg
    assert "method prototypical" in msg


def test_sources_must_embed_the_same_corpus(tmp_path):
    a = write_blob(tmp_path, name="a.embd", per_class=16)
    b = write_blob(tmp_path, name="b.embd", per_class=12)
    config = RunConfig(
        sources=(("a", a), ("b", b)),
        targets=(("a", a), ("b", b)),
        schedule=ScalingSchedule(ScaleVariable.DATASET_SIZE, (1.0, 0.5)),
        episode=small_episode(),
        methods=(Method.PROTOTYPICAL,),
        output_dir=str(tmp_path / "mix"),
    )
    with pytest.raises(ValidationError, match="disagree on retained count"):
        run_pipeline(config)


def test_pipeline_curves_reingest_losslessly(tmp_path):
    path = write_blob(tmp_path, name="loop.embd", seed=11)
    out = tmp_path / "loop"
    bundle = run_pipeline(self_config(path, out))
    curve = ingest_curve_csv(out / "curves" / "prototypical.csv")
    expect = [(p["value"], p["error_percent"]) for p in bundle["curves"]["prototypical"]]
    assert list(zip(curve.values, curve.errors)) == expect
