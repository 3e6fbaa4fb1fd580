"""Обработка сценариев: интеграция каналов, карта признаков, генерация сценариев, полезность, top-k."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from msr.utils.errors import ConfigError, ShapeError

COMPENSATED_SUM_FROM = 1000

RECORD_ORIGIN = "record"
BACKGROUND_ORIGIN = "background"


@dataclass(frozen=True)
class ModalityWeights:
    alpha_s: float = 0.6
    alpha_i: float = 0.2
    alpha_h: float = 0.2

    def __post_init__(self):
        for name in ("alpha_s", "alpha_i", "alpha_h"):
            if getattr(self, name) < 0:
                raise ConfigError(f"scenario.weights.{name}", "must be >= 0")
        total = self.alpha_s + self.alpha_i + self.alpha_h
        if abs(total - 1.0) > 1e-12:
            raise ConfigError("scenario.weights", f"alpha_s + alpha_i + alpha_h must equal 1, got {total!r}")


@dataclass(frozen=True)
class FeatureMap:
    m: tuple[float, ...]
    r: tuple[float, ...]

    def array(self) -> np.ndarray:
        return np.asarray(self.m, dtype=float)


@dataclass(frozen=True)
class Scenario:
    index: int
    attributes: tuple[float, ...]
    utility: float
    origin: str = RECORD_ORIGIN

    def array(self) -> np.ndarray:
        return np.asarray(self.attributes, dtype=float)


def integrate(s: Sequence[float], i: Sequence[float], h: Sequence[float], w: ModalityWeights) -> np.ndarray:
    s, i, h = (np.asarray(x, dtype=float) for x in (s, i, h))
    if s.ndim != 1 or s.size < 1 or s.shape != i.shape or s.shape != h.shape:
        raise ShapeError(f"s, i, h must be equal-length vectors, got {s.shape}, {i.shape}, {h.shape}")
    return w.alpha_s * s + w.alpha_i * i + w.alpha_h * h


def semantic_features(u: Sequence[float]) -> np.ndarray:
    """round(U_k, 2), половина округляется от нуля."""
    scaled = np.round(np.asarray(u, dtype=float) * 100.0, 9)
    return np.sign(scaled) * np.floor(np.abs(scaled) + 0.5) / 100.0


def feature_map(u: Sequence[float]) -> np.ndarray:
    return np.exp(-np.asarray(u, dtype=float))


def build_feature_map(u: Sequence[float]) -> FeatureMap:
    return FeatureMap(
        m=tuple(float(x) for x in feature_map(u)),
        r=tuple(float(x) for x in semantic_features(u)),
    )


def scenario_utility(attributes: Sequence[float]) -> float:
    values = [float(x) for x in attributes]
    if len(values) > COMPENSATED_SUM_FROM:
        return math.fsum(values)
    total = 0.0
    for x in values:
        total += x
    return total


def generate_scenarios(m: Sequence[float], m_count: int, noise_width: float = 0.1, rng_seed: int = 0,
                       start_index: int = 0, origin: str = RECORD_ORIGIN) -> list[Scenario]:
    if m_count < 1:
        raise ConfigError("scenario.m_count", f"must be >= 1, got {m_count}")
    if noise_width < 0:
        raise ConfigError("scenario.noise_width", f"must be >= 0, got {noise_width}")
    base = np.asarray(m, dtype=float)
    rng = np.random.default_rng(rng_seed)
    # равномерный шум на полуинтервале [-w, +w)
    deltas = rng.uniform(-noise_width, noise_width, size=(m_count, base.size))
    scenarios = []
    for j in range(m_count):
        attributes = tuple(float(x) for x in base + deltas[j])
        scenarios.append(Scenario(index=start_index + j, attributes=attributes,
                                  utility=scenario_utility(attributes), origin=origin))
    return scenarios


def select_top_k(scenarios: Sequence[Scenario], k: int) -> list[Scenario]:
    if k < 1:
        raise ConfigError("scenario.k", f"must be >= 1, got {k}")
    ranked = sorted(scenarios, key=lambda s: (-s.utility, s.index))
    return ranked[:k]
