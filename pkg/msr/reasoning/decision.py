"""Моделирование решений: декомпозиция задач, приоритеты подзадач, полезность, выбор, обратная связь."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from msr.reasoning.dataset import ACTION_NAMES
from msr.utils.errors import ConfigError, CycleError, EmptyInputError, ShapeError, TaskLookupError

DEFAULT_TASK = "respond"


@dataclass(frozen=True)
class Subtask:
    subtask_id: str
    weights: tuple[float, ...] = ()
    # id другого шаблона: подзадача раскрывается в его подзадачи
    expands: Optional[str] = None


@dataclass(frozen=True)
class TaskTemplate:
    task_id: str
    subtasks: tuple[Subtask, ...]

    def __post_init__(self):
        if not self.subtasks:
            raise ConfigError(f"decision.templates.{self.task_id}", "a template needs at least one subtask")
        ids = [s.subtask_id for s in self.subtasks]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"decision.templates.{self.task_id}", f"subtask ids must be unique, got {ids}")


@dataclass(frozen=True)
class DecisionCandidate:
    decision_id: int
    context: tuple[float, ...]
    predicted_outcome: float = 0.0
    historical_feedback: float = 0.0


@dataclass(frozen=True)
class ContextWeights:
    w: tuple[float, ...]
    lambda_: float = 0.4

    def __post_init__(self):
        if not self.w or any(x < 0 for x in self.w):
            raise ConfigError("decision.weights", f"weights must be non-negative, got {self.w}")
        if not any(x > 0 for x in self.w):
            raise ConfigError("decision.weights", "weights must not all be zero")
        if self.lambda_ < 0:
            raise ConfigError("decision.lambda", f"must be >= 0, got {self.lambda_}")

    def scaled(self, factor: float) -> "ContextWeights":
        return ContextWeights(w=tuple(x * factor for x in self.w), lambda_=self.lambda_)


@dataclass
class FeedbackHistory:
    """Исходы прошлых решений по id решения. Только добавление."""
    outcomes: dict[int, list[float]] = field(default_factory=dict)

    def append(self, decision_id: int, outcome: float) -> None:
        self.outcomes.setdefault(int(decision_id), []).append(float(outcome))

    def mean(self, decision_id: int) -> float:
        history = self.outcomes.get(int(decision_id))
        if not history:
            return 0.0
        return sum(history) / len(history)

    def __len__(self) -> int:
        return len(self.outcomes)


def default_templates(n_actions: int) -> dict[str, TaskTemplate]:
    """Шаблон respond: по подзадаче на действие, веса: контраст e_d - 1/A."""
    subtasks = []
    for d in range(n_actions):
        weights = tuple((1.0 if j == d else 0.0) - 1.0 / n_actions for j in range(n_actions))
        subtasks.append(Subtask(subtask_id=f"move_{ACTION_NAMES[d]}", weights=weights))
    return {DEFAULT_TASK: TaskTemplate(task_id=DEFAULT_TASK, subtasks=tuple(subtasks))}


def decompose(task_id: str, templates: Mapping[str, TaskTemplate]) -> list[Subtask]:
    """H(t) = {h_1..h_n}: листовые подзадачи в порядке шаблона, вложенные шаблоны: в глубину."""
    result: list[Subtask] = []

    def expand(current: str, path: tuple[str, ...]):
        if current in path:
            raise CycleError(f"template cycle: {' -> '.join(path + (current,))}")
        template = templates.get(current)
        if template is None:
            raise TaskLookupError(f"unknown task id {current!r}")
        for subtask in template.subtasks:
            if subtask.expands is not None:
                expand(subtask.expands, path + (current,))
            else:
                result.append(subtask)

    expand(task_id, ())
    return result


def subtask_priority(h: Subtask, context: Sequence[float]) -> float:
    """P(h_i) = U(h_i | C): скалярное произведение весов подзадачи и контекста."""
    weights = np.asarray(h.weights, dtype=float)
    context = np.asarray(context, dtype=float)
    if weights.shape != context.shape:
        raise ShapeError(f"subtask {h.subtask_id!r} has {weights.size} weights for {context.size} context values")
    return float(np.dot(weights, context))


def decision_utility(d: DecisionCandidate, w: ContextWeights) -> float:
    """Utility(D|E) = sum_i w_i * C_i(D)."""
    if len(d.context) != len(w.w):
        raise ShapeError(f"decision {d.decision_id} has {len(d.context)} context factors for {len(w.w)} weights")
    return float(np.dot(np.asarray(w.w, dtype=float), np.asarray(d.context, dtype=float)))


def select_decision(candidates: Sequence[DecisionCandidate], w: ContextWeights) -> DecisionCandidate:
    if not candidates:
        raise EmptyInputError("no decision candidates")
    best = candidates[0]
    best_utility = decision_utility(best, w)
    for candidate in candidates[1:]:
        utility = decision_utility(candidate, w)
        # строгое сравнение: при равенстве остается меньший индекс
        if utility > best_utility:
            best, best_utility = candidate, utility
    return best


def feedback_adjusted_utility(d: DecisionCandidate, lambda_: float) -> float:
    """U(D) = Predicted Outcome(D) + λ · Historical Feedback(D)."""
    return d.predicted_outcome + lambda_ * d.historical_feedback


def build_candidates(scenario_utility: float, evidence: Sequence[float], subtasks: Sequence[Subtask],
                     history: FeedbackHistory, lambda_: float) -> list[DecisionCandidate]:
    """
    Кандидат на каждое действие d. Факторы контекста:
    0: полезность эпизодного сценария, 1: память за класс d,
    2: приоритет подзадачи h_d, 3: полезность с учетом обратной связи.
    """
    if len(subtasks) != len(evidence):
        raise ShapeError(f"{len(subtasks)} subtasks for {len(evidence)} decisions")
    candidates = []
    for d, (subtask, support) in enumerate(zip(subtasks, evidence)):
        priority = subtask_priority(subtask, evidence)
        partial = DecisionCandidate(decision_id=d, context=(), predicted_outcome=float(support),
                                    historical_feedback=history.mean(d))
        adjusted = feedback_adjusted_utility(partial, lambda_)
        candidates.append(DecisionCandidate(
            decision_id=d,
            context=(float(scenario_utility), float(support), priority, adjusted),
            predicted_outcome=partial.predicted_outcome,
            historical_feedback=partial.historical_feedback,
        ))
    return candidates
