"""Queue mechanics and batch-times-queue pair construction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pairsim import (
    ConfigError,
    DegenerateInputError,
    FeatureQueue,
    PairBatch,
    SimilarityKind,
    enqueue_batch,
    form_pairs,
    pos_neg_ratio,
    score,
)


def feats(rng, m, d=4):
    return rng.normal(size=(m, d))


def test_enqueue_grows_until_capacity():
    q = FeatureQueue(capacity=8, d_feat=4)
    rng = np.random.default_rng(0)
    enqueue_batch(q, feats(rng, 2), [0, 1])
    assert q.size == 2
    enqueue_batch(q, feats(rng, 3), [2, 3, 4])
    assert q.size == 5


def test_fifo_eviction_drops_oldest():
    q = FeatureQueue(capacity=4, d_feat=2)
    first = np.arange(8.0).reshape(4, 2)
    enqueue_batch(q, first, [0, 1, 2, 3])
    second = 100.0 + np.arange(4.0).reshape(2, 2)
    enqueue_batch(q, second, [4, 5])
    assert q.size == 4
    # rows 0,1 of the first batch are gone; order is oldest first
    expect = np.vstack([first[2:], second])
    assert np.array_equal(q.features(), expect)
    assert np.array_equal(q.labels(), [2, 3, 4, 5])


def test_insertion_order_preserved():
    q = FeatureQueue(capacity=16, d_feat=1)
    enqueue_batch(q, [[1.0], [2.0]], [0, 0])
    enqueue_batch(q, [[3.0]], [0])
    assert np.array_equal(q.features().ravel(), [1.0, 2.0, 3.0])


def test_steps_strictly_increasing_after_random_enqueues():
    q = FeatureQueue(capacity=7, d_feat=3)
    rng = np.random.default_rng(3)
    for _ in range(40):
        m = int(rng.integers(1, 8))
        enqueue_batch(q, feats(rng, m, 3), rng.integers(0, 5, size=m))
        steps = q.steps_enqueued()
        assert np.all(np.diff(steps) > 0)
        assert q.size <= q.capacity


def test_batch_larger_than_capacity_rejected():
    q = FeatureQueue(capacity=2, d_feat=2)
    with pytest.raises(ConfigError):
        enqueue_batch(q, np.zeros((3, 2)), [0, 1, 2])


def test_label_length_mismatch_rejected():
    q = FeatureQueue(capacity=4, d_feat=2)
    with pytest.raises(ValueError):
        enqueue_batch(q, np.zeros((2, 2)), [0])


def test_stored_features_are_a_snapshot():
    q = FeatureQueue(capacity=4, d_feat=2)
    block = np.ones((2, 2))
    enqueue_batch(q, block, [0, 1])
    before = q.features()
    block[:] = -7.0  # caller mutates its own array afterwards
    assert np.array_equal(q.features(), before)


def test_form_pairs_count_and_index_layout():
    q = FeatureQueue(capacity=8, d_feat=3)
    rng = np.random.default_rng(1)
    enqueue_batch(q, feats(rng, 4, 3), [0, 1, 2, 3])
    pairs = form_pairs(q, feats(rng, 2, 3), [0, 9], SimilarityKind("inner"))
    assert len(pairs) == 8
    assert np.array_equal(pairs.batch_index, [0, 0, 0, 0, 1, 1, 1, 1])
    assert np.array_equal(pairs.queue_index, [0, 1, 2, 3, 0, 1, 2, 3])


def test_form_pairs_scores_match_scalar_scores():
    rng = np.random.default_rng(5)
    for name in ("generalized_inner", "inner", "cosine", "angular"):
        sim = SimilarityKind(name)
        q = FeatureQueue(capacity=8, d_feat=5)
        qf = rng.normal(size=(6, 5))
        enqueue_batch(q, qf, rng.integers(0, 3, size=6))
        bf = rng.normal(size=(3, 5))
        pairs = form_pairs(q, bf, [0, 1, 2], sim)
        for p in range(len(pairs)):
            i, j = pairs.batch_index[p], pairs.queue_index[p]
            assert_allclose(pairs.scores[p], score(sim, bf[i], qf[j]), rtol=1e-12)


def test_form_pairs_label_agreement():
    sim = SimilarityKind("inner")
    rng = np.random.default_rng(2)
    q = FeatureQueue(capacity=4, d_feat=2)
    enqueue_batch(q, feats(rng, 4, 2), [7, 7, 7, 7])
    same = form_pairs(q, feats(rng, 2, 2), [7, 7], sim)
    assert np.all(same.labels == 1)
    disjoint = form_pairs(q, feats(rng, 2, 2), [1, 2], sim)
    assert np.all(disjoint.labels == 0)
    mixed = form_pairs(q, feats(rng, 2, 2), [7, 0], sim)
    assert np.array_equal(mixed.labels, [1, 1, 1, 1, 0, 0, 0, 0])


def test_form_pairs_empty_queue_rejected():
    q = FeatureQueue(capacity=4, d_feat=2)
    with pytest.raises(DegenerateInputError):
        form_pairs(q, np.ones((1, 2)), [0], SimilarityKind("inner"))


def test_form_pairs_does_not_mutate_queue():
    rng = np.random.default_rng(4)
    q = FeatureQueue(capacity=4, d_feat=2)
    enqueue_batch(q, feats(rng, 3, 2), [0, 1, 2])
    before_f, before_l = q.features(), q.labels()
    form_pairs(q, feats(rng, 2, 2), [0, 1], SimilarityKind("cosine"))
    assert np.array_equal(q.features(), before_f)
    assert np.array_equal(q.labels(), before_l)


def test_pos_neg_ratio_values():
    assert pos_neg_ratio(PairBatch(np.zeros(3), [1, 1, 1])) == 1.0
    assert pos_neg_ratio(PairBatch(np.zeros(3), [0, 0, 0])) == 0.0
    assert pos_neg_ratio(PairBatch(np.zeros(8), [1, 0, 0, 1, 0, 0, 0, 0])) == 0.25


def test_pos_neg_ratio_empty_rejected():
    with pytest.raises(DegenerateInputError):
        pos_neg_ratio(PairBatch(np.zeros(0), np.zeros(0, dtype=int)))
