"""Backend parity and hand-checked oracles for the evaluation kernels.

Every function here runs against whichever backend is active, then the
parity tests pin the compiled extension to the numpy twin when both exist.
"""

import numpy as np
import pytest

from fewscale import kernels
from fewscale import _kernels_py as pyk

try:
    from fewscale import _kernels as cyk
except ImportError:
    cyk = None

needs_cython = pytest.mark.skipif(cyk is None, reason="compiled kernels not built")


def frozen(arr):
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


def random_episode(rng, way=5, shot=3, queries=20, dim=8):
    support = rng.normal(size=(way * shot, dim))
    slots = np.repeat(np.arange(way, dtype=np.int64), shot)
    order = rng.permutation(way * shot)
    qvecs = rng.normal(size=(queries, dim))
    return frozen(support[order]), frozen(slots[order]), frozen(qvecs)


def test_backend_name_matches_module():
    assert kernels.backend_name() in ("cython", "python")
    assert kernels.BACKEND == kernels.backend_name()


def test_proto_means_hand_oracle():
    support = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 5.0]])
    slots = np.array([0, 0, 1], dtype=np.int64)
    means = kernels.proto_means(frozen(support), frozen(slots), 2)
    np.testing.assert_allclose(means, [[2.0, 0.0], [0.0, 5.0]])


def test_proto_predict_tie_goes_to_lowest_slot():
    protos = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    # origin is equidistant from all three
    pred = kernels.proto_predict(frozen(protos), frozen(np.zeros((1, 2))))
    assert pred.tolist() == [0]


def test_matching_predict_tie_goes_to_lowest_slot():
    # two supports mirror each other; the query on the axis of symmetry
    # gives both classes identical mass
    support = np.array([[1.0, 1.0], [1.0, -1.0]])
    slots = np.array([1, 0], dtype=np.int64)
    query = np.array([[1.0, 0.0]])
    pred = kernels.matching_predict(frozen(support), frozen(slots), frozen(query), 2)
    assert pred.tolist() == [0]


def test_matching_prefers_aligned_class():
    support = np.array([[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]])
    slots = np.array([0, 1, 1], dtype=np.int64)
    query = np.array([[0.1, 0.99]])
    pred = kernels.matching_predict(frozen(support), frozen(slots), frozen(query), 2)
    assert pred.tolist() == [1]


def test_head_predict_tie_goes_to_lowest_slot():
    weights = np.zeros((3, 4))
    bias = np.array([0.5, 0.5, 0.5])
    pred = kernels.head_predict(frozen(weights), frozen(bias), frozen(np.ones((2, 4))))
    assert pred.tolist() == [0, 0]


def test_head_loss_uniform_logits_is_log_way():
    way, dim = 5, 3
    weights = np.zeros((way, dim))
    bias = np.zeros(way)
    vectors = np.ones((7, dim))
    slots = np.arange(7, dtype=np.int64) % way
    loss = kernels.head_loss(frozen(weights), frozen(bias), frozen(vectors), frozen(slots))
    assert loss == pytest.approx(np.log(way), rel=1e-12)


def test_head_grad_matches_manual_softmax():
    rng = np.random.default_rng(0)
    way, dim, n = 4, 6, 9
    weights = rng.normal(size=(way, dim))
    bias = rng.normal(size=way)
    vectors = rng.normal(size=(n, dim))
    slots = rng.integers(0, way, size=n).astype(np.int64)

    logits = vectors @ weights.T + bias
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = z / z.sum(axis=1, keepdims=True)
    onehot = np.eye(way)[slots]
    gw = (probs - onehot).T @ vectors / n
    gb = (probs - onehot).mean(axis=0)

    got_w, got_b = kernels.head_grad(
        frozen(weights), frozen(bias), frozen(vectors), frozen(slots)
    )
    np.testing.assert_allclose(got_w, gw, atol=1e-12)
    np.testing.assert_allclose(got_b, gb, atol=1e-12)


def test_head_fit_runs_plain_gradient_descent():
    rng = np.random.default_rng(1)
    way, dim = 3, 4
    weights = rng.normal(size=(way, dim))
    bias = rng.normal(size=way)
    vectors = frozen(rng.normal(size=(6, dim)))
    slots = frozen(np.array([0, 0, 1, 1, 2, 2], dtype=np.int64))

    expect_w, expect_b = weights.copy(), bias.copy()
    for _ in range(5):
        gw, gb = pyk.head_grad(expect_w, expect_b, vectors, slots)
        expect_w -= 0.01 * gw
        expect_b -= 0.01 * gb

    kernels.head_fit(weights, bias, vectors, slots, 5, 0.01)
    np.testing.assert_allclose(weights, expect_w, atol=1e-12)
    np.testing.assert_allclose(bias, expect_b, atol=1e-12)


@needs_cython
def test_compiled_backend_matches_numpy_twin():
    rng = np.random.default_rng(7)
    for trial in range(25):
        support, slots, queries = random_episode(
            rng, way=4 + trial % 3, shot=1 + trial % 4, queries=11, dim=5 + trial % 6
        )
        way = int(slots.max()) + 1
        np.testing.assert_allclose(
            cyk.proto_means(support, slots, way),
            pyk.proto_means(support, slots, way),
            atol=1e-13,
        )
        protos = pyk.proto_means(support, slots, way)
        np.testing.assert_array_equal(
            cyk.proto_predict(frozen(protos), queries),
            pyk.proto_predict(protos, queries),
        )
        np.testing.assert_array_equal(
            cyk.matching_predict(support, slots, queries, way),
            pyk.matching_predict(support, slots, queries, way),
        )
        weights = rng.normal(size=(way, support.shape[1]))
        bias = rng.normal(size=way)
        assert cyk.head_loss(frozen(weights), frozen(bias), support, slots) == pytest.approx(
            pyk.head_loss(weights, bias, support, slots), rel=1e-13
        )
        cw, cb = cyk.head_grad(frozen(weights), frozen(bias), support, slots)
        pw, pb = pyk.head_grad(weights, bias, support, slots)
        np.testing.assert_allclose(cw, pw, atol=1e-13)
        np.testing.assert_allclose(cb, pb, atol=1e-13)
        np.testing.assert_array_equal(
            cyk.head_predict(frozen(weights), frozen(bias), queries),
            pyk.head_predict(weights, bias, queries),
        )


@needs_cython
def test_compiled_head_fit_matches_numpy_twin():
    rng = np.random.default_rng(9)
    support, slots, _ = random_episode(rng, way=5, shot=2, queries=1, dim=7)
    w0 = rng.normal(size=(5, 7))
    b0 = rng.normal(size=5)
    wc, bc = w0.copy(), b0.copy()
    wp, bp = w0.copy(), b0.copy()
    cyk.head_fit(wc, bc, support, slots, 8, 0.05)
    pyk.head_fit(wp, bp, support, slots, 8, 0.05)
    np.testing.assert_allclose(wc, wp, atol=1e-12)
    np.testing.assert_allclose(bc, bp, atol=1e-12)
