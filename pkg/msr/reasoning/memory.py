"""
Память: кратковременная (STM, FIFO фиксированной емкости) и долговременная (LTM).

Вытесненная из STM запись переносится в LTM с исходной меткой времени.
Поиск в LTM ищет argmax косинусной близости, считывание берет softmax по
косинусам с разреженным top-n для больших хранилищ.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from msr.reasoning.attention import softmax
from msr.utils.errors import ConfigError, EmptyMemoryError, InvalidEntryError


class MemoryTier(str, Enum):
    STM = "STM"
    LTM = "LTM"


ALL_TIERS = frozenset({MemoryTier.STM, MemoryTier.LTM})


@dataclass(frozen=True)
class MemoryEntry:
    vector: tuple[float, ...]
    label: int
    timestamp: int
    tier: MemoryTier

    def array(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=float)


class _EntryBuffer:
    """Растущий numpy-буфер векторов LTM для векторизованного поиска."""

    def __init__(self, dim: int | None = None):
        self.size = 0
        self._dim = dim
        self._vectors = np.empty((0, 0))
        self._norms = np.empty(0)
        self._labels = np.empty(0, dtype=np.int64)
        self._timestamps = np.empty(0, dtype=np.int64)

    def append(self, vector: np.ndarray, label: int, timestamp: int):
        if self._dim is None:
            self._dim = vector.size
            self._vectors = np.empty((16, self._dim))
            self._norms = np.empty(16)
            self._labels = np.empty(16, dtype=np.int64)
            self._timestamps = np.empty(16, dtype=np.int64)
        if vector.size != self._dim:
            raise InvalidEntryError(f"memory vectors have dimension {self._dim}, got {vector.size}")
        if self.size == self._vectors.shape[0]:
            grow = self._vectors.shape[0] * 2
            self._vectors = np.resize(self._vectors, (grow, self._dim))
            self._norms = np.resize(self._norms, grow)
            self._labels = np.resize(self._labels, grow)
            self._timestamps = np.resize(self._timestamps, grow)
        self._vectors[self.size] = vector
        self._norms[self.size] = np.linalg.norm(vector)
        self._labels[self.size] = label
        self._timestamps[self.size] = timestamp
        self.size += 1

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors[:self.size]

    @property
    def norms(self) -> np.ndarray:
        return self._norms[:self.size]

    @property
    def labels(self) -> np.ndarray:
        return self._labels[:self.size]

    @property
    def timestamps(self) -> np.ndarray:
        return self._timestamps[:self.size]


@dataclass
class MemoryStore:
    stm_capacity: int = 32
    sparse_readout_top_n: int = 8
    sparse_readout_threshold: int = 64
    stm: deque = field(default_factory=deque)
    ltm: list = field(default_factory=list)
    clock: int = 0

    def __post_init__(self):
        if self.stm_capacity < 1:
            raise ConfigError("memory.stm_capacity", f"must be >= 1, got {self.stm_capacity}")
        if self.sparse_readout_top_n < 1:
            raise ConfigError("memory.sparse_readout_top_n", f"must be >= 1, got {self.sparse_readout_top_n}")
        if self.sparse_readout_threshold < 1:
            raise ConfigError("memory.sparse_readout_threshold",
                              f"must be >= 1, got {self.sparse_readout_threshold}")
        self._ltm_buffer = _EntryBuffer()
        for entry in self.ltm:
            self._ltm_buffer.append(entry.array(), entry.label, entry.timestamp)

    def tick(self) -> int:
        self.clock += 1
        return self.clock

    def _blocks(self, tiers: Iterable[MemoryTier]) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """(векторы, нормы, метки) по уровням без склейки LTM в новую матрицу."""
        tiers = set(MemoryTier(t) for t in tiers)
        blocks = []
        if MemoryTier.STM in tiers and self.stm:
            stm_vectors = np.array([e.vector for e in self.stm], dtype=float)
            blocks.append((stm_vectors, np.linalg.norm(stm_vectors, axis=1),
                           np.array([e.label for e in self.stm], dtype=np.int64)))
        if MemoryTier.LTM in tiers and self._ltm_buffer.size:
            buffer = self._ltm_buffer
            blocks.append((buffer.vectors, buffer.norms, buffer.labels))
        return blocks


def _checked_vector(vector: Sequence[float]) -> np.ndarray:
    vector = np.asarray(vector, dtype=float).ravel()
    if vector.size == 0 or not np.any(vector != 0.0):
        raise InvalidEntryError("memory vectors must have at least one nonzero entry")
    if not np.all(np.isfinite(vector)):
        raise InvalidEntryError("memory vectors must be finite")
    return vector


def promote_to_ltm(store: MemoryStore, entry: MemoryEntry) -> None:
    promoted = MemoryEntry(vector=entry.vector, label=entry.label, timestamp=entry.timestamp,
                           tier=MemoryTier.LTM)
    store.ltm.append(promoted)
    store._ltm_buffer.append(promoted.array(), promoted.label, promoted.timestamp)


def ltm_seed(store: MemoryStore, vector: Sequence[float], label: int) -> MemoryEntry:
    """Прямая запись в LTM (прототипы прошлого опыта)."""
    entry = MemoryEntry(vector=tuple(float(x) for x in _checked_vector(vector)), label=int(label),
                        timestamp=store.tick(), tier=MemoryTier.LTM)
    promote_to_ltm(store, entry)
    return entry


def stm_append(store: MemoryStore, delta: Sequence[float], label: int) -> MemoryEntry | None:
    """STM(t) = STM(t-1) + ΔScenario. Возвращает вытесненную запись, если она была."""
    vector = _checked_vector(delta)
    entry = MemoryEntry(vector=tuple(float(x) for x in vector), label=int(label),
                        timestamp=store.tick(), tier=MemoryTier.STM)
    store.stm.append(entry)
    if len(store.stm) > store.stm_capacity:
        evicted = store.stm.popleft()
        promote_to_ltm(store, evicted)
        return evicted
    return None


def cosine_score(query: Sequence[float], entry: Sequence[float]) -> float:
    q = _checked_vector(query)
    e = _checked_vector(entry)
    if q.size != e.size:
        raise InvalidEntryError(f"vectors differ in dimension: {q.size} vs {e.size}")
    score = float(np.dot(q, e) / (np.linalg.norm(q) * np.linalg.norm(e)))
    return min(1.0, max(-1.0, score))


def _scores(matrix: np.ndarray, norms: np.ndarray, query: np.ndarray) -> np.ndarray:
    if matrix.shape[1] != query.size:
        raise InvalidEntryError(f"query has dimension {query.size}, memory holds {matrix.shape[1]}")
    return np.clip(matrix @ query / (norms * np.linalg.norm(query)), -1.0, 1.0)


def ltm_retrieve(store: MemoryStore, query: Sequence[float]) -> MemoryEntry:
    if not store.ltm:
        raise EmptyMemoryError("long-term memory is empty")
    q = _checked_vector(query)
    buffer = store._ltm_buffer
    scores = _scores(buffer.vectors, buffer.norms, q)
    best = scores.max()
    tied = np.flatnonzero(scores == best)
    # при равенстве: самая ранняя метка времени
    winner = tied[np.argmin(buffer.timestamps[tied])]
    return store.ltm[int(winner)]


def _top_n(scores: np.ndarray, n: int) -> np.ndarray:
    """Индексы n лучших по убыванию косинуса; при равенстве: меньший индекс."""
    if scores.size <= n:
        return np.lexsort((np.arange(scores.size), -scores))
    candidates = np.argpartition(-scores, n - 1)[:n]
    cutoff = scores[candidates].min()
    above = np.flatnonzero(scores > cutoff)
    at_cutoff = np.flatnonzero(scores == cutoff)[:n - above.size]
    top = np.concatenate([above, at_cutoff])
    return top[np.lexsort((top, -scores[top]))]


def readout_weights(store: MemoryStore, query: Sequence[float],
                    tiers: Iterable[MemoryTier] = ALL_TIERS,
                    label: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Возвращает (векторы, веса, метки) записей, участвующих в считывании.
    При размере больше sparse_readout_threshold остаются top-n по косинусу.
    """
    q = _checked_vector(query)
    blocks = store._blocks(tiers)
    if not blocks:
        raise EmptyMemoryError("no memory entries in the selected tiers")

    scores = np.concatenate([_scores(v, n, q) for v, n, _ in blocks])
    labels = np.concatenate([l for _, _, l in blocks])
    candidates = np.arange(scores.size)
    if label is not None:
        candidates = np.flatnonzero(labels == label)
        if candidates.size == 0:
            raise EmptyMemoryError(f"no memory entries labelled {label}")
    if candidates.size > store.sparse_readout_threshold:
        candidates = candidates[_top_n(scores[candidates], store.sparse_readout_top_n)]

    offsets = np.cumsum([0] + [v.shape[0] for v, _, _ in blocks])
    block_of = np.searchsorted(offsets, candidates, side="right") - 1
    vectors = np.array([blocks[b][0][i - offsets[b]] for b, i in zip(block_of, candidates)])
    return vectors, softmax(scores[candidates]), labels[candidates]


def attention_readout(store: MemoryStore, query: Sequence[float],
                      tiers: Iterable[MemoryTier] = ALL_TIERS) -> np.ndarray:
    vectors, weights, _ = readout_weights(store, query, tiers)
    return weights @ vectors


def label_readout(store: MemoryStore, query: Sequence[float], label: int,
                  tiers: Iterable[MemoryTier] = ALL_TIERS) -> np.ndarray:
    vectors, weights, _ = readout_weights(store, query, tiers, label=label)
    return weights @ vectors
