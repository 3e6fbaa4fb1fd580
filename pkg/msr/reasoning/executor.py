"""Исполнитель: итоговая команда действия из политики и маршрутизация обратной связи."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

from msr.reasoning.decision import DecisionCandidate, FeedbackHistory
from msr.reasoning.memory import MemoryEntry, MemoryStore, stm_append
from msr.reasoning.sim2real import PolicyTable
from msr.utils.errors import ConfigError


@dataclass(frozen=True)
class ActionCommand:
    record_id: int
    action: int
    decision_id: int
    state: int
    confidence: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FeedbackRecord:
    record_id: int
    decision_id: int
    outcome: float
    matched: bool

    def to_json(self) -> dict:
        return asdict(self)


def select_optimal_action(decision: DecisionCandidate, policy: PolicyTable, state: int,
                          record_id: int = 0, confidence: float = 1.0,
                          remaining: Optional[int] = None) -> ActionCommand:
    """Действие политики в состоянии state; недопустимое состояние: TaskLookupError."""
    if not 0.0 <= confidence <= 1.0:
        raise ConfigError("executor.confidence", f"must lie in [0, 1], got {confidence}")
    action = policy.action(state, remaining)
    return ActionCommand(record_id=int(record_id), action=action, decision_id=decision.decision_id,
                         state=int(state), confidence=float(confidence))


def feedback_for(command: ActionCommand, action_label: int) -> FeedbackRecord:
    matched = command.action == int(action_label)
    return FeedbackRecord(record_id=command.record_id, decision_id=command.decision_id,
                          outcome=1.0 if matched else 0.0, matched=matched)


def route_feedback(fb: FeedbackRecord, history: FeedbackHistory, store: MemoryStore,
                   scenario_vector: Sequence[float], label: int) -> Optional[MemoryEntry]:
    """
    Дописывает исход в историю решения и вектор эпизода в STM.
    Возвращает запись, вытесненную из STM в LTM, если она была.
    """
    history.append(fb.decision_id, fb.outcome)
    return stm_append(store, scenario_vector, label)
