"""Pure-numpy episode-evaluation kernels.

Fallback twin of the compiled extension in `_kernels.pyx`; both expose the
same functions with the same semantics. Ties always resolve to the lowest
class slot (argmin/argmax of numpy return the first occurrence). All
arithmetic is float64.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def proto_means(support: np.ndarray, slots: np.ndarray, way: int) -> np.ndarray:
    """Per-slot mean of support vectors: (way, dim) float64."""
    support = np.asarray(support, dtype=np.float64)
    slots = np.asarray(slots, dtype=np.int64)
    dim = support.shape[1]
    out = np.zeros((way, dim), dtype=np.float64)
    np.add.at(out, slots, support)
    counts = np.bincount(slots, minlength=way).astype(np.float64)
    return out / counts[:, None]


def proto_predict(protos: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Nearest prototype by squared euclidean distance; ties to lowest slot."""
    protos = np.asarray(protos, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    diffs = queries[:, None, :] - protos[None, :, :]
    d2 = np.einsum("qwd,qwd->qw", diffs, diffs)
    return d2.argmin(axis=1).astype(np.int64)


def matching_predict(
    support: np.ndarray, slots: np.ndarray, queries: np.ndarray, way: int
) -> np.ndarray:
    """Cosine attention over the support set, softmaxed and summed per class.

    Callers must reject zero-norm vectors before calling.
    """
    support = np.asarray(support, dtype=np.float64)
    slots = np.asarray(slots, dtype=np.int64)
    queries = np.asarray(queries, dtype=np.float64)
    s_norm = np.sqrt((support * support).sum(axis=1))
    q_norm = np.sqrt((queries * queries).sum(axis=1))
    sims = (queries @ support.T) / (q_norm[:, None] * s_norm[None, :])
    shifted = np.exp(sims - sims.max(axis=1, keepdims=True))
    onehot = np.zeros((len(slots), way), dtype=np.float64)
    onehot[np.arange(len(slots)), slots] = 1.0
    class_mass = shifted @ onehot
    probs = class_mass / shifted.sum(axis=1, keepdims=True)
    return probs.argmax(axis=1).astype(np.int64)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def head_loss(
    weights: np.ndarray, bias: np.ndarray, vectors: np.ndarray, slots: np.ndarray
) -> float:
    """Mean softmax cross-entropy of the linear head on a labeled batch."""
    logits = vectors @ weights.T + bias
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    picked = logits[np.arange(len(slots)), slots]
    return float(np.mean(lse - picked))


def head_grad(
    weights: np.ndarray, bias: np.ndarray, vectors: np.ndarray, slots: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of head_loss with respect to (weights, bias)."""
    n = len(slots)
    probs = _softmax_rows(vectors @ weights.T + bias)
    probs[np.arange(n), slots] -= 1.0
    probs /= n
    return probs.T @ vectors, probs.sum(axis=0)


def head_fit(
    weights: np.ndarray,
    bias: np.ndarray,
    vectors: np.ndarray,
    slots: np.ndarray,
    steps: int,
    lr: float,
) -> None:
    """Run full-batch gradient descent in place on (weights, bias)."""
    for _ in range(steps):
        g_w, g_b = head_grad(weights, bias, vectors, slots)
        weights -= lr * g_w
        bias -= lr * g_b


def head_predict(
    weights: np.ndarray, bias: np.ndarray, queries: np.ndarray
) -> np.ndarray:
    """Argmax of weights @ q + bias; ties to lowest slot."""
    logits = np.asarray(queries, dtype=np.float64) @ weights.T + bias
    return logits.argmax(axis=1).astype(np.int64)
