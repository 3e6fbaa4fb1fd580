import numpy as np
import pytest

from msr.reasoning.memory import (
    MemoryStore,
    MemoryTier,
    attention_readout,
    cosine_score,
    label_readout,
    ltm_retrieve,
    ltm_seed,
    promote_to_ltm,
    readout_weights,
    stm_append,
)
from msr.utils.errors import ConfigError, EmptyMemoryError, InvalidEntryError


def test_stm_eviction_moves_oldest_to_ltm():
    store = MemoryStore(stm_capacity=2)
    first = stm_append(store, [1.0, 0.0], 0)
    assert first is None
    stm_append(store, [0.0, 1.0], 1)
    evicted = stm_append(store, [1.0, 1.0], 2)
    assert evicted.label == 0
    assert evicted.timestamp == 1
    assert [e.label for e in store.stm] == [1, 2]
    assert len(store.ltm) == 1
    assert store.ltm[0].tier is MemoryTier.LTM
    assert store.ltm[0].timestamp == 1


def test_capacity_is_validated():
    with pytest.raises(ConfigError):
        MemoryStore(stm_capacity=0)


def test_zero_vector_is_rejected():
    with pytest.raises(InvalidEntryError):
        stm_append(MemoryStore(), [0.0, 0.0], 0)


def test_cosine_score_bounds():
    assert cosine_score([1.0, 0.0], [2.0, 0.0]) == 1.0
    assert cosine_score([1.0, 0.0], [-3.0, 0.0]) == -1.0
    assert cosine_score([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)
    with pytest.raises(InvalidEntryError):
        cosine_score([1.0], [1.0, 2.0])


def test_ltm_retrieve_empty():
    with pytest.raises(EmptyMemoryError):
        ltm_retrieve(MemoryStore(), [1.0, 0.0])


def test_ltm_retrieve_best_and_earliest_tie():
    store = MemoryStore()
    ltm_seed(store, [0.0, 1.0], 0)
    ltm_seed(store, [2.0, 0.0], 1)
    ltm_seed(store, [1.0, 0.0], 2)
    assert ltm_retrieve(store, [5.0, 0.1]).label == 1
    assert ltm_retrieve(store, [1.0, 0.0]).label == 1


def test_attention_readout_weights_sum_to_one():
    store = MemoryStore()
    ltm_seed(store, [1.0, 0.0], 0)
    stm_append(store, [0.0, 1.0], 1)
    vectors, weights, labels = readout_weights(store, [1.0, 0.0])
    assert weights.sum() == pytest.approx(1.0)
    assert sorted(labels.tolist()) == [0, 1]
    readout = attention_readout(store, [1.0, 0.0])
    assert readout[0] > readout[1]


def test_readout_tiers_filter():
    store = MemoryStore()
    ltm_seed(store, [1.0, 0.0], 0)
    stm_append(store, [0.0, 1.0], 1)
    assert attention_readout(store, [1.0, 1.0], tiers=[MemoryTier.STM]).tolist() == [0.0, 1.0]
    with pytest.raises(EmptyMemoryError):
        attention_readout(MemoryStore(), [1.0, 0.0], tiers=[MemoryTier.LTM])


def test_label_readout_uses_only_matching_entries():
    store = MemoryStore()
    ltm_seed(store, [1.0, 0.0], 0)
    ltm_seed(store, [0.0, 1.0], 1)
    ltm_seed(store, [0.0, 3.0], 1)
    readout = label_readout(store, [1.0, 0.0], 1)
    assert readout[0] == 0.0
    assert readout[1] == pytest.approx(2.0)
    with pytest.raises(EmptyMemoryError):
        label_readout(store, [1.0, 0.0], 3)


def test_sparse_readout_keeps_top_n():
    store = MemoryStore(sparse_readout_top_n=3, sparse_readout_threshold=5)
    for angle in np.linspace(0.0, np.pi / 2, 10):
        ltm_seed(store, [np.cos(angle), np.sin(angle)], 0)
    vectors, weights, _ = readout_weights(store, [1.0, 0.0])
    assert len(weights) == 3
    assert weights.sum() == pytest.approx(1.0)
    assert vectors[0].tolist() == [1.0, 0.0]
    assert np.all(np.diff(weights) <= 0)


def test_sparse_readout_is_not_used_below_threshold():
    store = MemoryStore(sparse_readout_top_n=2, sparse_readout_threshold=5)
    for x in range(1, 6):
        ltm_seed(store, [float(x), 1.0], 0)
    _, weights, _ = readout_weights(store, [1.0, 0.0])
    assert len(weights) == 5


def test_ltm_retrieve_matches_linear_scan():
    rng = np.random.default_rng(2)
    store = MemoryStore()
    for i in range(1024):
        ltm_seed(store, rng.normal(size=6), i % 4)
    for _ in range(50):
        query = rng.normal(size=6)
        scores = [cosine_score(query, entry.vector) for entry in store.ltm]
        best = max(range(len(scores)), key=lambda i: (scores[i], -store.ltm[i].timestamp))
        assert ltm_retrieve(store, query) is store.ltm[best]


def test_readout_is_a_convex_combination():
    rng = np.random.default_rng(3)
    store = MemoryStore(stm_capacity=4)
    for i in range(20):
        stm_append(store, rng.uniform(0.1, 1.0, size=3), i % 2)
    vectors, weights, _ = readout_weights(store, [1.0, 0.5, 0.2])
    assert np.all(weights >= 0.0)
    assert abs(weights.sum() - 1.0) <= 1e-9
    readout = attention_readout(store, [1.0, 0.5, 0.2])
    assert np.all(readout >= vectors.min(axis=0) - 1e-12)
    assert np.all(readout <= vectors.max(axis=0) + 1e-12)


def test_promote_to_ltm_keeps_timestamp_and_is_retrievable():
    store = MemoryStore()
    entry = stm_append(store, [0.0, 2.0], 3)
    assert entry is None
    stm_entry = store.stm[0]
    promote_to_ltm(store, stm_entry)
    assert len(store.ltm) == 1
    promoted = store.ltm[0]
    assert promoted.tier is MemoryTier.LTM
    assert promoted.timestamp == stm_entry.timestamp
    assert promoted.vector == stm_entry.vector
    assert stm_entry.tier is MemoryTier.STM
    assert ltm_retrieve(store, [0.0, 1.0]) is promoted
