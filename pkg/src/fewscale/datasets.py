"""Core domain types: embedding datasets, class splits, episodes, estimates.

All types are immutable after construction (arrays are marked read-only),
so they can be shared freely across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

MAX_SEED = 2**64 - 1


class Method(str, Enum):
    """Few-shot evaluation method."""

    FINETUNE = "finetune"
    PROTOTYPICAL = "prototypical"
    MATCHING = "matching"


#: Canonical column order used by reports.
METHOD_ORDER = (Method.FINETUNE, Method.MATCHING, Method.PROTOTYPICAL)


class ScaleVariable(str, Enum):
    """Which quantity a scaling curve varies."""

    DATASET_SIZE = "dataset_size"
    CLASS_COUNT = "class_count"

    @property
    def symbol(self) -> str:
        return "N" if self is ScaleVariable.DATASET_SIZE else "C"


@dataclass(frozen=True)
class DatasetMeta:
    """Free-form provenance strings stored in the embedding file header."""

    dataset: str = ""
    model: str = ""
    checkpoint: str = ""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmbeddingDataset:
    """Fixed-width feature vectors with class labels and unique sample ids.

    Vectors are stored as float32 (the on-disk precision); all downstream
    arithmetic upcasts to float64.
    """

    dim: int
    sample_ids: np.ndarray  # (n,) uint64
    class_ids: np.ndarray  # (n,) uint32
    vectors: np.ndarray  # (n, dim) float32
    meta: DatasetMeta = field(default_factory=DatasetMeta)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        sample_ids = _freeze(np.ascontiguousarray(self.sample_ids, dtype=np.uint64))
        class_ids = _freeze(np.ascontiguousarray(self.class_ids, dtype=np.uint32))
        vectors = _freeze(np.ascontiguousarray(self.vectors, dtype=np.float32))
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "class_ids", class_ids)
        object.__setattr__(self, "vectors", vectors)
        n = len(sample_ids)
        if class_ids.shape != (n,):
            raise ValidationError("sample_ids and class_ids lengths differ")
        if vectors.shape != (n, self.dim):
            raise ValidationError(
                f"vectors shape {vectors.shape} does not match ({n}, {self.dim})"
            )
        finite = np.isfinite(vectors).all(axis=1) if n else np.ones(0, bool)
        if not finite.all():
            bad = int(np.flatnonzero(~finite)[0])
            raise ValidationError(f"non-finite component in record {bad}")
        if len(np.unique(sample_ids)) != n:
            raise ValidationError("sample_ids are not unique")

    def __len__(self) -> int:
        return len(self.sample_ids)

    def classes(self) -> np.ndarray:
        """Sorted array of distinct class ids."""
        return np.unique(self.class_ids)

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.class_ids, return_counts=True)
        return {int(c): int(n) for c, n in zip(ids, counts)}

    def records(self) -> Iterator[tuple[int, int, np.ndarray]]:
        """Iterate (sample_id, class_id, vector) in record order."""
        for i in range(len(self)):
            yield int(self.sample_ids[i]), int(self.class_ids[i]), self.vectors[i]

    def select(self, positions: np.ndarray) -> "EmbeddingDataset":
        """New dataset holding the given record positions (order preserved)."""
        return EmbeddingDataset(
            dim=self.dim,
            sample_ids=self.sample_ids[positions],
            class_ids=self.class_ids[positions],
            vectors=self.vectors[positions],
            meta=self.meta,
        )

    def restrict_to_classes(self, classes) -> "EmbeddingDataset":
        """New dataset keeping only records whose class is in `classes`."""
        wanted = np.asarray(sorted(int(c) for c in classes), dtype=np.uint32)
        mask = np.isin(self.class_ids, wanted)
        return self.select(np.flatnonzero(mask))

    @classmethod
    def from_records(
        cls,
        dim: int,
        records: Sequence[tuple[int, int, Sequence[float]]],
        meta: DatasetMeta | None = None,
    ) -> "EmbeddingDataset":
        """Build from (sample_id, class_id, vector) triples."""
        n = len(records)
        sample_ids = np.array([r[0] for r in records], dtype=np.uint64)
        class_ids = np.array([r[1] for r in records], dtype=np.uint32)
        vectors = np.zeros((n, dim), dtype=np.float32)
        for i, r in enumerate(records):
            vectors[i] = np.asarray(r[2], dtype=np.float32)
        return cls(dim, sample_ids, class_ids, vectors, meta or DatasetMeta())


@dataclass(frozen=True)
class ClassSplit:
    """Disjoint train/holdout partition of a dataset's classes."""

    train_classes: frozenset[int]
    holdout_classes: frozenset[int]
    seed: int
    fraction: float

    def __post_init__(self) -> None:
        if self.train_classes & self.holdout_classes:
            raise ValidationError("train and holdout classes overlap")
        if not self.train_classes or not self.holdout_classes:
            raise ValidationError("both sides of a class split must be non-empty")


@dataclass(frozen=True)
class Episode:
    """One N-way K-shot trial: a support set plus disjoint query set.

    Class slots are episode-local labels 0..way-1; `slot_class_ids` maps a
    slot back to the originating class id. Vectors are float64.
    """

    way: int
    shot: int
    support_slots: np.ndarray  # (way*shot,) int64
    support_vectors: np.ndarray  # (way*shot, dim) float64
    support_ids: np.ndarray  # (way*shot,) uint64
    query_slots: np.ndarray  # (q,) int64
    query_vectors: np.ndarray  # (q, dim) float64
    query_ids: np.ndarray  # (q,) uint64
    slot_class_ids: np.ndarray  # (way,) uint32
    trial_index: int = 0

    def __post_init__(self) -> None:
        for name in (
            "support_slots",
            "support_vectors",
            "support_ids",
            "query_slots",
            "query_vectors",
            "query_ids",
            "slot_class_ids",
        ):
            arr = np.ascontiguousarray(getattr(self, name))
            object.__setattr__(self, name, _freeze(arr))
        if len(self.slot_class_ids) != self.way:
            raise ValidationError("slot_class_ids length must equal way")
        if len(np.unique(self.slot_class_ids)) != self.way:
            raise ValidationError("episode classes are not distinct")
        if len(self.support_slots) != self.way * self.shot:
            raise ValidationError(
                f"support size {len(self.support_slots)} != way*shot = {self.way * self.shot}"
            )
        if len(self.query_slots) == 0:
            raise ValidationError("episode has no queries")
        if not set(np.unique(self.query_slots)) <= set(range(self.way)):
            raise ValidationError("query slot outside 0..way-1")
        overlap = np.intersect1d(self.support_ids, self.query_ids)
        if len(overlap):
            raise ValidationError(f"support and query share sample_id {int(overlap[0])}")

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]


@dataclass(frozen=True)
class AccuracyEstimate:
    """Mean episodic accuracy with a 95% Wilson interval."""

    method: Method
    mean_accuracy: float
    ci_low: float
    ci_high: float
    trials: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.ci_low <= self.mean_accuracy <= self.ci_high <= 1.0):
            raise ValidationError(
                "interval must satisfy 0 <= ci_low <= mean <= ci_high <= 1, got "
                f"({self.ci_low}, {self.mean_accuracy}, {self.ci_high})"
            )
        if self.trials < 1:
            raise ValidationError("trials must be positive")


@dataclass(frozen=True)
class ScalingCurve:
    """Ordered (scale value, error rate) points for one scaled variable.

    Values are sample counts N or class counts C; errors are percentages.
    """

    variable: ScaleVariable
    values: tuple[float, ...]
    errors: tuple[float, ...]
    label: str = ""

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        errors = tuple(float(e) for e in self.errors)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "errors", errors)
        if len(values) != len(errors):
            raise ValidationError("values and errors lengths differ")
        if any(v <= 0 for v in values):
            raise ValidationError("scale values must be positive")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValidationError("scale values must be strictly increasing")
        if any(not (0.0 <= e <= 100.0) for e in errors):
            raise ValidationError("error rates must lie in [0, 100] percent")

    @property
    def points(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.values, self.errors))

    @classmethod
    def from_points(
        cls,
        variable: ScaleVariable,
        points: Sequence[tuple[float, float]],
        label: str = "",
    ) -> "ScalingCurve":
        pts = sorted((float(v), float(e)) for v, e in points)
        return cls(
            variable=variable,
            values=tuple(v for v, _ in pts),
            errors=tuple(e for _, e in pts),
            label=label,
        )
