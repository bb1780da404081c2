import numpy as np
import pytest

from fewscale.datasets import DatasetMeta, EmbeddingDataset

# Verdict lines appended by the acceptance tests; replayed after the run so
# they stay visible under pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def gaussian_dataset(
    classes: int,
    per_class: int,
    dim: int,
    spacing: float = 10.0,
    sigma: float = 0.01,
    seed: int = 0,
    meta: DatasetMeta | None = None,
) -> EmbeddingDataset:
    """Well-separated Gaussian clusters, one cluster per class.

    Centers sit at spacing * e_c (dim must be >= classes), so every pair of
    centers is exactly spacing * sqrt(2) apart.
    """
    assert dim >= classes
    rng = np.random.default_rng(seed)
    centers = np.zeros((classes, dim))
    centers[np.arange(classes), np.arange(classes)] = spacing
    vectors = centers[:, None, :] + rng.normal(scale=sigma, size=(classes, per_class, dim))
    return EmbeddingDataset(
        dim=dim,
        sample_ids=np.arange(classes * per_class, dtype=np.uint64),
        class_ids=np.repeat(np.arange(classes, dtype=np.uint32), per_class),
        vectors=vectors.reshape(-1, dim).astype(np.float32),
        meta=meta or DatasetMeta(dataset="synthetic", model="none", checkpoint="test"),
    )


def blob_dataset(
    classes: int,
    per_class: int,
    dim: int,
    scale: float = 3.0,
    sigma: float = 1.0,
    seed: int = 0,
) -> EmbeddingDataset:
    """Random-center clusters with overlap; accuracies land strictly inside (chance, 1)."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=scale, size=(classes, dim))
    vectors = centers[:, None, :] + rng.normal(scale=sigma, size=(classes, per_class, dim))
    return EmbeddingDataset(
        dim=dim,
        sample_ids=np.arange(classes * per_class, dtype=np.uint64),
        class_ids=np.repeat(np.arange(classes, dtype=np.uint32), per_class),
        vectors=vectors.reshape(-1, dim).astype(np.float32),
    )


@pytest.fixture
def tiny_dataset() -> EmbeddingDataset:
    return blob_dataset(classes=8, per_class=12, dim=6, seed=42)
