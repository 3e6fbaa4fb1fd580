"""Ввод данных: фильтр доверия, z-нормализация по модальности, извлечение признаков, слияние."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from msr.reasoning.dataset import MODALITY_ORDER, ModalRecord, Modality
from msr.utils.errors import (
    ConfigError,
    DegenerateModalityError,
    EmptyInputError,
    InvalidInputError,
)


class ExtractionMode(str, Enum):
    IDENTITY = "identity"
    SUMMARY = "summary"


@dataclass(frozen=True)
class TrustThreshold:
    tau: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("ingest.tau", f"must lie in [0, 1], got {self.tau!r}")


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float


@dataclass(frozen=True)
class FeatureBundle:
    entries: tuple[tuple[Modality, tuple[float, ...]], ...]

    def modalities(self) -> tuple[Modality, ...]:
        return tuple(m for m, _ in self.entries)

    def vector(self, modality: Modality) -> np.ndarray:
        for m, values in self.entries:
            if m == modality:
                return np.asarray(values, dtype=float)
        raise KeyError(modality)

    def concatenated(self) -> np.ndarray:
        return np.concatenate([np.asarray(values, dtype=float) for _, values in self.entries])


def filter_by_trust(records: Iterable[ModalRecord], threshold: TrustThreshold) -> list[ModalRecord]:
    # T(d): сохраненная оценка доверия, сравнение строгое
    return [r for r in records if r.trust > threshold.tau]


def fit_norm_stats(values: Sequence[float] | np.ndarray) -> NormStats:
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise InvalidInputError(f"at least 2 values are required to fit norm stats, got {values.size}")
    mean = float(np.mean(values))
    std = float(np.std(values))
    if std == 0.0:
        raise DegenerateModalityError(f"constant modality (value {mean!r}): standard deviation is zero")
    return NormStats(mean=mean, std=std)


def fit_pooled_stats(records: Sequence[ModalRecord]) -> NormStats:
    """Одна пара (μ, σ) на модальность по всем значениям признаков записей."""
    if not records:
        raise EmptyInputError("no records survived trust filtering")
    return fit_norm_stats(np.concatenate([r.vector() for r in records]))


def normalize(values: Sequence[float] | np.ndarray, stats: NormStats) -> np.ndarray:
    if not stats.std > 0.0:
        raise DegenerateModalityError(f"cannot normalize with standard deviation {stats.std!r}")
    return (np.asarray(values, dtype=float) - stats.mean) / stats.std


def extract_features(norm: Sequence[float] | np.ndarray,
                     mode: ExtractionMode | str = ExtractionMode.IDENTITY,
                     window: int | None = None,
                     stride: int = 1) -> np.ndarray:
    norm = np.asarray(norm, dtype=float)
    mode = ExtractionMode(mode)
    if mode is ExtractionMode.IDENTITY:
        return norm.copy()

    width = norm.size if window is None else int(window)
    if width < 1:
        raise ConfigError("ingest.window", f"must be >= 1, got {width}")
    if width > norm.size:
        raise ConfigError("ingest.window", f"window {width} is wider than the input ({norm.size})")
    if stride < 1:
        raise ConfigError("ingest.window_stride", f"must be >= 1, got {stride}")

    windows = np.lib.stride_tricks.sliding_window_view(norm, width)[::stride]
    summary = np.stack([
        windows.mean(axis=1),
        windows.std(axis=1),
        windows.min(axis=1),
        windows.max(axis=1),
        np.mean(windows ** 2, axis=1),
    ], axis=1)
    return summary.ravel()


def extracted_length(raw_length: int, mode: ExtractionMode | str, window: int | None, stride: int = 1) -> int:
    if ExtractionMode(mode) is ExtractionMode.IDENTITY:
        return raw_length
    width = raw_length if window is None else int(window)
    return 5 * len(range(0, raw_length - width + 1, stride))


def fuse(per_modality: Iterable[tuple[Modality | str, Sequence[float] | np.ndarray]]) -> FeatureBundle:
    collected: dict[Modality, tuple[float, ...]] = {}
    for tag, values in per_modality:
        modality = Modality(tag)
        if modality in collected:
            raise InvalidInputError(f"duplicate modality tag {modality.value!r}")
        collected[modality] = tuple(float(x) for x in np.asarray(values, dtype=float).ravel())
    if not collected:
        raise EmptyInputError("no surviving modalities to fuse")
    return FeatureBundle(entries=tuple((m, collected[m]) for m in MODALITY_ORDER if m in collected))
