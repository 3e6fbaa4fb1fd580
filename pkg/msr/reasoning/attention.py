"""Приоритизация вниманием: softmax-релевантность, top-k, уточнение сценария памятью."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from msr.reasoning.scenario import Scenario
from msr.utils.errors import ConfigError, EmptyInputError, InvalidInputError, ShapeError


@dataclass(frozen=True)
class RelevanceDistribution:
    r: tuple[float, ...]

    def array(self) -> np.ndarray:
        return np.asarray(self.r, dtype=float)


@dataclass(frozen=True)
class RefinedScenario:
    base: Scenario
    attributes: tuple[float, ...]
    beta: float

    def array(self) -> np.ndarray:
        return np.asarray(self.attributes, dtype=float)


def softmax(values: Sequence[float] | np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    shifted = values - values.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def relevance_scores(utilities: Sequence[float]) -> RelevanceDistribution:
    utilities = np.asarray(utilities, dtype=float)
    if utilities.size == 0:
        raise EmptyInputError("relevance needs at least one utility")
    if not np.all(np.isfinite(utilities)):
        raise InvalidInputError("utilities must be finite")
    return RelevanceDistribution(r=tuple(float(x) for x in softmax(utilities)))


def top_k_by_relevance(dist: RelevanceDistribution, scenarios: Sequence[Scenario], k: int) -> list[Scenario]:
    if len(dist.r) != len(scenarios):
        raise ShapeError(f"{len(dist.r)} relevance scores for {len(scenarios)} scenarios")
    if k < 1:
        raise ConfigError("scenario.k", f"must be >= 1, got {k}")
    # полезность разводит значения, которые exp свел к одному float
    ranked = sorted(zip(dist.r, scenarios), key=lambda pair: (-pair[0], -pair[1].utility, pair[1].index))
    return [scenario for _, scenario in ranked[:k]]


def refine_scenario(a: Sequence[float], m: Sequence[float], beta: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    m = np.asarray(m, dtype=float)
    if a.shape != m.shape:
        raise ShapeError(f"attributes {a.shape} and memory readout {m.shape} differ in shape")
    if not 0.0 <= beta <= 1.0:
        raise ConfigError("attention.beta", f"must lie in [0, 1], got {beta!r}")
    return (1.0 - beta) * a + beta * m


def refine(scenario: Scenario, readout: Sequence[float], beta: float) -> RefinedScenario:
    attributes = refine_scenario(scenario.attributes, readout, beta)
    return RefinedScenario(base=scenario, attributes=tuple(float(x) for x in attributes), beta=beta)
