"""Few-shot classifiers and the parallel episodic trial runner.

Three evaluation methods over a fixed embedding space:

  * finetune      -- a fresh linear head trained on the support set by
                     full-batch gradient descent on mean cross-entropy
  * prototypical  -- nearest class-mean under squared euclidean distance
  * matching      -- cosine similarity to every support vector, softmaxed,
                     probabilities summed per class

Trials are independent; accuracy is accumulated as integer counts, so
results are identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .datasets import METHOD_ORDER, AccuracyEstimate, EmbeddingDataset, Episode, Method
from .errors import ArgumentError, DegenerateInputError, ValidationError
from .sampling import ClassIndex, EpisodeConfig, _sample_episode, derive_trial_seed

#: Two-sided 95% normal quantile used by the Wilson interval.
Z95 = 1.959963984540054


@dataclass(frozen=True)
class FineTuneConfig:
    """Linear-head fine-tuning hyperparameters.

    init_scale None means the per-episode default 1/sqrt(dim). A zero
    learning rate is allowed (the head then stays at its initialization).
    """

    steps: int = 5
    learning_rate: float = 0.01
    init_scale: float | None = None

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ArgumentError(f"steps must be >= 1, got {self.steps}")
        if not (self.learning_rate >= 0.0) or not math.isfinite(self.learning_rate):
            raise ArgumentError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.init_scale is not None and not (self.init_scale > 0.0):
            raise ArgumentError("init_scale must be positive when given")


@dataclass(frozen=True)
class LinearHead:
    """Trained classification head: logits = weights @ x + bias."""

    weights: np.ndarray  # (way, dim) float64
    bias: np.ndarray  # (way,) float64

    def __post_init__(self) -> None:
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ValidationError("head shapes inconsistent")
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise ValidationError("head has non-finite entries")


def compute_prototypes(episode: Episode) -> np.ndarray:
    """Per-slot mean of support vectors, computed in float64: (way, dim)."""
    return kernels.proto_means(episode.support_vectors, episode.support_slots, episode.way)


def classify_prototypical(query: np.ndarray, protos: np.ndarray) -> int:
    """Slot of the nearest prototype (squared euclidean, ties to lowest slot)."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (protos.shape[1],):
        raise ArgumentError(
            f"query dim {query.shape} does not match prototypes {protos.shape}"
        )
    return int(kernels.proto_predict(protos, query[None, :])[0])


def _check_norms(episode: Episode, query: np.ndarray | None = None) -> None:
    if np.any(np.linalg.norm(episode.support_vectors, axis=1) == 0.0):
        raise DegenerateInputError("support set contains a zero-norm vector")
    if query is not None and np.linalg.norm(query) == 0.0:
        raise DegenerateInputError("query vector has zero norm")


def classify_matching(query: np.ndarray, episode: Episode) -> int:
    """Matching-network prediction for one query (ties to lowest slot)."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (episode.dim,):
        raise ArgumentError(f"query dim {query.shape} does not match episode dim {episode.dim}")
    _check_norms(episode, query)
    return int(
        kernels.matching_predict(
            episode.support_vectors, episode.support_slots, query[None, :], episode.way
        )[0]
    )


def matching_probabilities(query: np.ndarray, episode: Episode) -> np.ndarray:
    """Per-class probability mass behind classify_matching, for inspection."""
    query = np.asarray(query, dtype=np.float64)
    _check_norms(episode, query)
    support = episode.support_vectors
    sims = support @ query / (
        np.linalg.norm(support, axis=1) * np.linalg.norm(query)
    )
    weights = np.exp(sims - sims.max())
    weights /= weights.sum()
    out = np.zeros(episode.way)
    np.add.at(out, episode.support_slots, weights)
    return out


def finetune_linear_head(
    episode: Episode, config: FineTuneConfig, trial_seed: int
) -> LinearHead:
    """Initialize a fresh head from uniform(-a, a) and train it on the support set.

    a defaults to 1/sqrt(dim). Weights are drawn before biases; the whole
    procedure is deterministic per (episode, config, trial_seed).
    """
    rng = np.random.default_rng(trial_seed)
    a = config.init_scale if config.init_scale is not None else 1.0 / math.sqrt(episode.dim)
    weights = rng.uniform(-a, a, size=(episode.way, episode.dim))
    bias = rng.uniform(-a, a, size=episode.way)
    kernels.head_fit(
        weights,
        bias,
        episode.support_vectors,
        episode.support_slots,
        config.steps,
        config.learning_rate,
    )
    return LinearHead(weights=weights, bias=bias)


def classify_head(head: LinearHead, query: np.ndarray) -> int:
    """Argmax of head logits for one query (ties to lowest slot)."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (head.weights.shape[1],):
        raise ArgumentError(
            f"query dim {query.shape} does not match head {head.weights.shape}"
        )
    return int(kernels.head_predict(head.weights, head.bias, query[None, :])[0])


def head_loss(head: LinearHead, vectors: np.ndarray, slots: np.ndarray) -> float:
    """Mean softmax cross-entropy of a head on a labeled batch."""
    return kernels.head_loss(head.weights, head.bias, vectors, slots)


def head_gradient(
    head: LinearHead, vectors: np.ndarray, slots: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of head_loss with respect to (weights, bias)."""
    return kernels.head_grad(head.weights, head.bias, vectors, slots)


def wilson_interval(successes: int, total: int, z: float = Z95) -> tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ArgumentError("wilson_interval needs a positive total")
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2.0 * total)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total))
    # The interval provably contains p, but at p = 0 or 1 the closed form
    # lands a couple of ulps inside; clamp so callers can rely on it.
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


def _evaluate_trial(
    index: ClassIndex,
    config: EpisodeConfig,
    methods: Sequence[Method],
    ft: FineTuneConfig,
    trial: int,
    counts: np.ndarray,
) -> None:
    episode = _sample_episode(index, config, trial)
    queries = episode.query_vectors
    truth = episode.query_slots
    for m, method in enumerate(methods):
        if method is Method.PROTOTYPICAL:
            protos = kernels.proto_means(
                episode.support_vectors, episode.support_slots, episode.way
            )
            pred = kernels.proto_predict(protos, queries)
        elif method is Method.MATCHING:
            _check_norms(episode)
            if np.any(np.linalg.norm(queries, axis=1) == 0.0):
                raise DegenerateInputError("query set contains a zero-norm vector")
            pred = kernels.matching_predict(
                episode.support_vectors, episode.support_slots, queries, episode.way
            )
        else:
            head = finetune_linear_head(episode, ft, derive_trial_seed(config.master_seed, trial))
            pred = kernels.head_predict(head.weights, head.bias, queries)
        counts[m, 0] += int((pred == truth).sum())
        counts[m, 1] += len(truth)


def run_evaluation(
    view: EmbeddingDataset,
    config: EpisodeConfig,
    methods: Iterable[Method] = METHOD_ORDER,
    ft: FineTuneConfig | None = None,
    workers: int = 1,
) -> list[AccuracyEstimate]:
    """Evaluate the requested methods over `config.trials` episodes.

    Accuracy pools every query classification across trials; the interval
    is the 95% Wilson score. Counts are summed per worker chunk, so any
    worker count yields bit-identical estimates for a fixed master_seed.
    """
    wanted = set(methods)
    ordered = [m for m in METHOD_ORDER if m in wanted]
    if not ordered:
        raise ArgumentError("run_evaluation needs at least one method")
    ft = ft or FineTuneConfig()
    index = ClassIndex(view)
    workers = max(1, int(workers))

    def run_chunk(lo: int, hi: int) -> np.ndarray:
        counts = np.zeros((len(ordered), 2), dtype=np.int64)
        for trial in range(lo, hi):
            _evaluate_trial(index, config, ordered, ft, trial, counts)
        return counts

    trials = config.trials
    if workers == 1:
        totals = run_chunk(0, trials)
    else:
        bounds = [(i * trials // workers, (i + 1) * trials // workers) for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda b: run_chunk(*b), bounds))
        totals = np.sum(chunks, axis=0)

    estimates = []
    for m, method in enumerate(ordered):
        correct, total = int(totals[m, 0]), int(totals[m, 1])
        lo, hi = wilson_interval(correct, total)
        estimates.append(
            AccuracyEstimate(
                method=method,
                mean_accuracy=correct / total,
                ci_low=lo,
                ci_high=hi,
                trials=trials,
            )
        )
    return estimates
