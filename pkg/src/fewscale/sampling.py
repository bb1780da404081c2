"""Deterministic class splitting, subsampling schedules, and episode sampling.

Every random choice is a pure function of (inputs, seed) through a
splittable counter construction: each logical stream gets its own
SeedSequence spawn key, so results never depend on call order or on how
many workers execute trials.

Data subsampling draws a per-class retention permutation keyed only by
(seed, class_id). Because the permutation never depends on the ratio, the
retained sets are nested: shrinking the ratio removes samples without
reshuffling the survivors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import MAX_SEED, ClassSplit, EmbeddingDataset, Episode, ScaleVariable
from .errors import (
    ArgumentError,
    EpisodeInfeasibleError,
    InsufficientClassesError,
)

# Stream tags for the splittable seed construction.
_TAG_SPLIT = 1
_TAG_DATA = 2
_TAG_CLASSES = 3
_TAG_EPISODE = 4
_TAG_HEAD = 5

DATASET_SIZE_RATIOS = (1.0, 0.5, 0.25, 0.125, 0.0625)
CLASS_COUNT_RATIOS = (1.0, 0.5, 0.25, 0.125)


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or not (0 <= int(seed) <= MAX_SEED):
        raise ArgumentError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """64-bit seed for the per-trial classifier-head initialization stream."""
    words = np.random.SeedSequence(
        entropy=_check_seed(master_seed), spawn_key=(_TAG_HEAD, trial_index)
    ).generate_state(2, dtype=np.uint64)
    return int(words[0] ^ words[1])


@dataclass(frozen=True)
class ScalingSchedule:
    """Ordered subsampling ratios for one scaled variable."""

    variable: ScaleVariable
    ratios: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios:
            ratios = (
                DATASET_SIZE_RATIOS
                if self.variable is ScaleVariable.DATASET_SIZE
                else CLASS_COUNT_RATIOS
            )
        object.__setattr__(self, "ratios", ratios)
        if ratios[0] != 1.0:
            raise ArgumentError("schedule ratios must start at 1.0")
        if any(not (0.0 < r <= 1.0) for r in ratios):
            raise ArgumentError("schedule ratios must lie in (0, 1]")
        if any(b >= a for a, b in zip(ratios, ratios[1:])):
            raise ArgumentError("schedule ratios must be strictly decreasing")


@dataclass(frozen=True)
class EpisodeConfig:
    """Shape and length of an episodic evaluation run."""

    way: int = 5
    shot: int = 1
    queries_per_class: int = 15
    trials: int = 2000
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.way < 2:
            raise ArgumentError(f"way must be >= 2, got {self.way}")
        if self.shot < 1:
            raise ArgumentError(f"shot must be >= 1, got {self.shot}")
        if self.queries_per_class < 1:
            raise ArgumentError("queries_per_class must be >= 1")
        if self.trials < 1:
            raise ArgumentError("trials must be >= 1")
        _check_seed(self.master_seed)


def _floor_ratio(ratio: float, n: int) -> int:
    # the tiny nudge guards exact products (e.g. 0.1 * 30) against binary droop
    return int(math.floor(ratio * n + 1e-9))


def split_classes(dataset: EmbeddingDataset, fraction: float, seed: int) -> ClassSplit:
    """Partition the dataset's classes into train/holdout sets.

    |train| = floor(fraction * total + 0.5), clamped so both sides keep at
    least one class. Depends only on the class set, the fraction and the
    seed, never on record order.
    """
    seed = _check_seed(seed)
    if not (0.0 < fraction < 1.0):
        raise ArgumentError(f"fraction must lie in (0, 1), got {fraction}")
    classes = dataset.classes()
    total = len(classes)
    if total < 2:
        raise InsufficientClassesError(
            f"class split needs at least 2 classes, dataset has {total}"
        )
    n_train = int(math.floor(fraction * total + 0.5))
    n_train = min(max(n_train, 1), total - 1)
    perm = _rng(seed, _TAG_SPLIT).permutation(classes)
    return ClassSplit(
        train_classes=frozenset(int(c) for c in perm[:n_train]),
        holdout_classes=frozenset(int(c) for c in perm[n_train:]),
        seed=seed,
        fraction=fraction,
    )


def subsample_data(
    dataset: EmbeddingDataset, ratio: float, seed: int
) -> EmbeddingDataset:
    """Stratified per-class subsample: keep max(1, floor(ratio * n_c)) samples.

    The class set is preserved exactly. Retention is keyed per
    (seed, class_id), so the kept sets are identical across runs and nested
    across ratios.
    """
    seed = _check_seed(seed)
    if not (0.0 < ratio <= 1.0):
        raise ArgumentError(f"ratio must lie in (0, 1], got {ratio}")
    if ratio == 1.0:
        return dataset
    keep: list[np.ndarray] = []
    for class_id in dataset.classes():
        positions = np.flatnonzero(dataset.class_ids == class_id)
        # permutation base is sorted by sample_id: independent of record order
        positions = positions[np.argsort(dataset.sample_ids[positions], kind="stable")]
        m = max(1, _floor_ratio(ratio, len(positions)))
        perm = _rng(seed, _TAG_DATA, int(class_id)).permutation(len(positions))
        keep.append(positions[perm[:m]])
    kept = np.sort(np.concatenate(keep))
    return dataset.select(kept)


def subsample_classes(
    dataset: EmbeddingDataset, ratio: float, seed: int
) -> EmbeddingDataset:
    """Keep max(2, floor(ratio * class_count)) classes, all their samples."""
    seed = _check_seed(seed)
    if not (0.0 < ratio <= 1.0):
        raise ArgumentError(f"ratio must lie in (0, 1], got {ratio}")
    classes = dataset.classes()
    total = len(classes)
    if total < 2:
        raise InsufficientClassesError(
            f"class subsampling needs at least 2 classes, dataset has {total}"
        )
    m = max(2, _floor_ratio(ratio, total))
    if m >= total:
        return dataset
    perm = _rng(seed, _TAG_CLASSES).permutation(classes)
    return dataset.restrict_to_classes(perm[:m])


class ClassIndex:
    """Per-class record positions of a dataset, ordered by sample_id.

    Building this once and reusing it across trials is what keeps episodic
    evaluation cheap; the index is read-only and thread-safe.
    """

    def __init__(self, dataset: EmbeddingDataset):
        self.dataset = dataset
        self.classes = dataset.classes()
        order = np.argsort(dataset.sample_ids, kind="stable")
        sorted_class_ids = dataset.class_ids[order]
        self.positions: dict[int, np.ndarray] = {
            int(c): order[sorted_class_ids == c] for c in self.classes
        }
        self.counts = np.array(
            [len(self.positions[int(c)]) for c in self.classes], dtype=np.int64
        )


def sample_episode(
    view: EmbeddingDataset, config: EpisodeConfig, trial_index: int
) -> Episode:
    """Draw the episode for one trial.

    Pure function of (view contents, config.master_seed, trial_index):
    re-running any trial reproduces its episode bit for bit, regardless of
    execution order or worker count.
    """
    return _sample_episode(ClassIndex(view), config, trial_index)


def _sample_episode(index: ClassIndex, config: EpisodeConfig, trial_index: int) -> Episode:
    if not isinstance(trial_index, (int, np.integer)) or trial_index < 0:
        raise ArgumentError(f"trial_index must be a non-negative integer, got {trial_index!r}")
    need = config.shot + 1
    eligible = index.classes[index.counts >= need]
    if len(eligible) < config.way:
        short = index.classes[index.counts < need]
        if len(short):
            worst = int(short[0])
            detail = (
                f"class {worst} has {len(index.positions[worst])} samples, "
                f"needs at least {need}"
            )
        else:
            detail = f"dataset has only {len(index.classes)} classes"
        raise EpisodeInfeasibleError(
            f"cannot build a {config.way}-way {config.shot}-shot episode: {detail}"
        )
    rng = _rng(config.master_seed, _TAG_EPISODE, int(trial_index))
    chosen = rng.choice(eligible, size=config.way, replace=False)

    dataset = index.dataset
    support_pos: list[np.ndarray] = []
    support_slots: list[np.ndarray] = []
    query_pos: list[np.ndarray] = []
    query_slots: list[np.ndarray] = []
    for slot, class_id in enumerate(chosen):
        positions = index.positions[int(class_id)]
        perm = rng.permutation(len(positions))
        n_query = min(config.queries_per_class, len(positions) - config.shot)
        support_pos.append(positions[perm[: config.shot]])
        query_pos.append(positions[perm[config.shot : config.shot + n_query]])
        support_slots.append(np.full(config.shot, slot, dtype=np.int64))
        query_slots.append(np.full(n_query, slot, dtype=np.int64))

    sup = np.concatenate(support_pos)
    qry = np.concatenate(query_pos)
    return Episode(
        way=config.way,
        shot=config.shot,
        support_slots=np.concatenate(support_slots),
        support_vectors=dataset.vectors[sup].astype(np.float64),
        support_ids=dataset.sample_ids[sup],
        query_slots=np.concatenate(query_slots),
        query_vectors=dataset.vectors[qry].astype(np.float64),
        query_ids=dataset.sample_ids[qry],
        slot_class_ids=np.asarray(chosen, dtype=np.uint32),
        trial_index=int(trial_index),
    )
