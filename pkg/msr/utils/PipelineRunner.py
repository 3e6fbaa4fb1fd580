"""
PipelineRunner: семь шагов конвейера по каждой записи каждой модальности.

Чистая фаза (нормализация, карта признаков, сценарии, внимание) идет в пуле
потоков. Фаза с общим состоянием (память, решение, политика, обратная связь) идет
одним упорядоченным проходом. Поэтому результат не зависит от числа потоков.
"""
from __future__ import annotations

import copy
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, TypeVar

import numpy as np
from rich.progress import track

from msr.reasoning.attention import refine, relevance_scores, top_k_by_relevance
from msr.reasoning.dataset import Dataset, Modality, ModalRecord, calibration_records
from msr.reasoning.decision import FeedbackHistory, build_candidates, decompose, select_decision
from msr.reasoning.evaluation import STEPS, StepConfusion, metrics, record_outcome, render_csv, render_markdown
from msr.reasoning.executor import feedback_for, route_feedback, select_optimal_action
from msr.reasoning.ingest import (
    extract_features,
    extracted_length,
    filter_by_trust,
    fit_pooled_stats,
    fuse,
    normalize,
)
from msr.reasoning.memory import (
    MemoryStore,
    attention_readout,
    cosine_score,
    label_readout,
    ltm_retrieve,
    ltm_seed,
)
from msr.reasoning.scenario import (
    BACKGROUND_ORIGIN,
    RECORD_ORIGIN,
    Scenario,
    build_feature_map,
    generate_scenarios,
    integrate,
    select_top_k,
)
from msr.reasoning.sim2real import (
    AlignmentModel,
    align_features,
    discounted_return,
    plan_policy_bank,
    reward_table,
    rollout,
)
from msr.utils.MsrConfig import RunConfig
from msr.utils.errors import ConfigError, EmptyMemoryError, ShapeError
from msr.utils.logger import msr_logger
from msr.utils.seeding import derive_seed, rng_for

T = TypeVar("T")
R = TypeVar("R")

TRACE_FILE = "trace.jsonl"
MARKDOWN_FILE = "report.md"

# оценка, когда в памяти нет ни одной записи с меткой класса
MISSING_EVIDENCE = -1.0


def csv_name(modality: Modality) -> str:
    return f"report_{modality.value}.csv"


def polarity(label: int) -> bool:
    """Нечетный класс (down, right): положительный."""
    return bool(int(label) % 2)


def label_outcome(predicted: int, actual: int) -> tuple[bool, bool]:
    """
    (предсказание, истина) для матрицы ошибок многоклассового шага.

    Истина: полярность метки. Точное совпадение метки дает TP или TN, любое
    несовпадение (в том числе той же полярности) дает FP или FN.
    """
    positive = polarity(actual)
    return (positive if int(predicted) == int(actual) else not positive), positive


@dataclass(frozen=True)
class PreparedRecord:
    """Результат чистой фазы для одной записи."""
    record: ModalRecord
    features: np.ndarray
    feature_map: np.ndarray
    semantic: tuple[float, ...]


@dataclass(frozen=True)
class AttendedRecord:
    prepared: PreparedRecord
    episode: Scenario
    confidence: float
    own_selected: int
    selected: int
    own_relevance: float


@dataclass
class ModalityRun:
    modality: Modality
    confusions: dict[int, StepConfusion]
    episodes: list[dict] = field(default_factory=list)
    alignment: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def metrics_table(self):
        return {step: metrics(self.confusions[step]) for step in STEPS}


@dataclass
class RunResult:
    seed: int
    meta: dict
    runs: list[ModalityRun]

    def tables(self) -> dict:
        return {run.modality.value: run.metrics_table() for run in self.runs}


class PipelineRunner:
    def __init__(self, config: RunConfig, dataset: Dataset, seed: int, show_progress: bool = False):
        self.config = config
        self.dataset = dataset
        self.seed = seed
        self.show_progress = show_progress
        self.generator = dataset.config
        self.n_actions = self.generator.n_actions

        templates = config.decision.resolved_templates(self.n_actions)
        self.subtasks = decompose(config.decision.task, templates)
        if len(self.subtasks) != self.n_actions:
            raise ConfigError("decision.templates",
                              f"task {config.decision.task!r} has {len(self.subtasks)} subtasks, "
                              f"the dataset has {self.n_actions} actions")
        for subtask in self.subtasks:
            if len(subtask.weights) != self.n_actions:
                raise ShapeError(f"subtask {subtask.subtask_id!r} needs {self.n_actions} weights, "
                                 f"got {len(subtask.weights)}")

        available = set(dataset.counts())
        missing = [m.value for m in config.run.modalities if m.value not in available]
        if missing:
            raise ConfigError("run.modalities", f"the dataset has no records for {missing}")

    # --- helpers -------------------------------------------------------------

    def _map(self, fn: Callable[[T], R], items: list[T]) -> list[R]:
        if self.config.run.workers == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.run.workers) as pool:
            return list(pool.map(fn, items))

    def _progress(self, items: list[T], description: str) -> Iterable[T]:
        if self.show_progress:
            return track(items, description=description)
        return items

    def _channel(self, value: Optional[tuple[float, ...]], length: int, name: str) -> np.ndarray:
        if value is None:
            return np.zeros(length)
        if len(value) != length:
            raise ConfigError(f"scenario.{name}", f"expected {length} values, got {len(value)}")
        return np.asarray(value, dtype=float)

    # --- фазы ----------------------------------------------------------------

    def _preparer(self, modality: Modality, survivors: list[ModalRecord]) -> Callable[[ModalRecord], PreparedRecord]:
        """Чистое преобразование записи; статистики берутся только по выжившим записям."""
        ingest = self.config.ingest
        stats = fit_pooled_stats(survivors)
        msr_logger.info(f"Статистики нормализации: mean={stats.mean:.6f}, std={stats.std:.6f}")
        length = extracted_length(self.generator.feature_dim, ingest.extraction_mode, ingest.window,
                                  ingest.window_stride)
        internal = self._channel(self.config.scenario.internal_state, length, "internal_state")
        instruction = self._channel(self.config.scenario.instruction, length, "instruction")
        weights = self.config.scenario.weights

        def prepare(record: ModalRecord) -> PreparedRecord:
            extracted = extract_features(normalize(record.vector(), stats), ingest.extraction_mode,
                                         ingest.window, ingest.window_stride)
            s = fuse([(modality, extracted)]).vector(modality)
            u = integrate(s, internal, instruction, weights)
            mapped = build_feature_map(u)
            return PreparedRecord(record=record, features=s, feature_map=mapped.array(), semantic=mapped.r)

        return prepare

    def _attend(self, modality: Modality, prepared: list[PreparedRecord]) -> list[AttendedRecord]:
        settings = self.config.scenario
        threshold = self.config.attention.relevance_threshold
        background = np.mean([p.feature_map for p in prepared], axis=0)
        m = settings.m_count

        def attend(item: PreparedRecord) -> AttendedRecord:
            record_id = item.record.id
            own = generate_scenarios(item.feature_map, m, settings.noise_width,
                                     derive_seed(self.seed, modality.value, "scenarios", record_id),
                                     start_index=0, origin=RECORD_ORIGIN)
            others = generate_scenarios(background, m, settings.noise_width,
                                        derive_seed(self.seed, modality.value, "background", record_id),
                                        start_index=m, origin=BACKGROUND_ORIGIN)
            pool = own + others
            distribution = relevance_scores([s.utility for s in pool])
            selected = top_k_by_relevance(distribution, pool, settings.k)
            episode = select_top_k(own, 1)[0]
            return AttendedRecord(
                prepared=item,
                episode=episode,
                confidence=distribution.r[episode.index],
                own_selected=sum(1 for s in selected if s.origin == RECORD_ORIGIN),
                selected=len(selected),
                own_relevance=float(sum(distribution.r[:m])),
            )

        attended = self._map(attend, prepared)
        own_share = np.mean([a.own_relevance for a in attended])
        msr_logger.info(f"{modality.value}: средняя релевантность собственных сценариев {own_share:.3f}, "
                        f"порог {threshold}")
        return attended

    def _alignment(self, modality: Modality, prepared: list[PreparedRecord]) -> dict:
        settings = self.config.sim2real.alignment
        sim = np.array([p.features for p in prepared])
        noise = rng_for(self.seed, modality.value, "real-features").normal(0.0, settings.real_noise, size=sim.shape)
        real = sim + settings.real_shift + noise
        seed = derive_seed(self.seed, modality.value, "alignment")
        initial = AlignmentModel.initial(sim.shape[1], lambda_task=settings.lambda_task)
        baseline = align_features(sim, real, initial, steps=settings.steps, lr=settings.lr,
                                  train_encoder=False, holdout=settings.holdout, seed=seed)
        adapted = align_features(sim, real, initial, steps=settings.steps, lr=settings.lr,
                                 train_encoder=True, holdout=settings.holdout, seed=seed)
        return {
            "type": "alignment",
            "modality": modality.value,
            "steps": settings.steps,
            "baseline_heldout_accuracy": baseline.heldout_accuracy,
            "adapted_heldout_accuracy": adapted.heldout_accuracy,
            "adapted_train_accuracy": adapted.train_accuracy,
            "baseline_train_accuracy": baseline.train_accuracy,
        }

    def _prime_memory(self, calibration: list[PreparedRecord]) -> MemoryStore:
        """LTM с прототипами классов памяти по калибровочной выборке, которая не оценивается."""
        settings = self.config.memory
        store = MemoryStore(stm_capacity=settings.stm_capacity,
                            sparse_readout_top_n=settings.sparse_readout_top_n,
                            sparse_readout_threshold=settings.sparse_readout_threshold)
        for label in range(self.n_actions):
            members = [p.feature_map for p in calibration if p.record.mem_label == label]
            if members:
                ltm_seed(store, np.mean(members, axis=0), label)
        return store

    def _evidence(self, store: MemoryStore, query: np.ndarray) -> list[float]:
        evidence = []
        for label in range(self.n_actions):
            try:
                readout = label_readout(store, query, label, self.config.memory.tiers)
            except EmptyMemoryError:
                evidence.append(MISSING_EVIDENCE)
                continue
            evidence.append(cosine_score(query, readout))
        return evidence

    # --- запуск --------------------------------------------------------------

    def run_modality(self, modality: Modality) -> ModalityRun:
        config = self.config
        records = self.dataset.for_modality(modality)
        confusions = {step: StepConfusion(step) for step in STEPS}
        run = ModalityRun(modality=modality, confusions=confusions)

        # Step 1: фильтр доверия против valid
        survivors = filter_by_trust(records, config.ingest.threshold)
        kept = {r.id for r in survivors}
        for record in records:
            record_outcome(confusions[1], record.id in kept, record.valid)
        msr_logger.info(f"{modality.value}: {len(survivors)} из {len(records)} записей прошли фильтр доверия")

        preparer = self._preparer(modality, survivors)
        prepared = self._map(preparer, survivors)
        attended = self._attend(modality, prepared)
        run.alignment = self._alignment(modality, prepared)

        s2r = config.sim2real
        base = s2r.base_env(self.n_actions)
        spec = replace(s2r.randomization, seed=derive_seed(self.seed, modality.value, "randomize"))
        bank = plan_policy_bank(base, spec, s2r.real_shift, s2r.gamma, s2r.alpha, s2r.goal_distance)
        real_rewards = [reward_table(planned.real_env) for planned in bank]
        start = base.state(base.start)

        calibration = calibration_records(self.generator, modality, config.memory.prime_records)
        store = self._prime_memory(self._map(preparer, calibration))
        history = FeedbackHistory()
        weights = config.decision.weights

        for item in self._progress(attended, f"{modality.value}: episodes"):
            record = item.prepared.record

            # Steps 2, 3: выбор top-k и релевантность собственных сценариев
            record_outcome(confusions[2], 2 * item.own_selected >= item.selected, record.relevant)
            record_outcome(confusions[3], item.own_relevance > config.attention.relevance_threshold,
                           record.relevant)

            # Step 4: уточнение сценария памятью и поиск в LTM
            readout = attention_readout(store, item.episode.attributes, config.memory.tiers)
            refined = refine(item.episode, readout, config.attention.beta)
            query = refined.array()
            retrieved = ltm_retrieve(store, query)
            record_outcome(confusions[4], *label_outcome(retrieved.label, record.mem_label))

            # Step 5: выбор решения
            evidence = self._evidence(store, query)
            candidates = build_candidates(item.episode.utility, evidence, self.subtasks, history,
                                          weights.lambda_)
            decision = select_decision(candidates, weights)
            record_outcome(confusions[5], *label_outcome(decision.decision_id, record.action))
            order = sorted(range(len(candidates)), key=lambda d: (-candidates[d].context[2], d))

            # Step 6: уточненная политика
            planned = bank[decision.decision_id]
            policy_action = planned.refined_policy.action(start)
            record_outcome(confusions[6], *label_outcome(policy_action, record.action))

            # Step 7: команда исполнителя и обратная связь
            command = select_optimal_action(decision, planned.refined_policy, start,
                                            record_id=record.id, confidence=item.confidence)
            record_outcome(confusions[7], *label_outcome(command.action, record.action))
            feedback = feedback_for(command, record.action)
            route_feedback(feedback, history, store, query, label=command.action)

            trajectory = rollout(planned.real_env, planned.refined_policy,
                                 seed=derive_seed(self.seed, modality.value, "rollout", record.id),
                                 reward=real_rewards[decision.decision_id])
            run.episodes.append({
                "type": "episode",
                "modality": modality.value,
                "record_id": record.id,
                "command": command.to_json(),
                "feedback": feedback.to_json(),
                "retrieved_label": retrieved.label,
                "evidence": evidence,
                "subtasks": [self.subtasks[d].subtask_id for d in order],
                "own_selected": item.own_selected,
                "own_relevance": item.own_relevance,
                "semantic_features": list(item.prepared.semantic),
                "real_return": discounted_return(trajectory, s2r.gamma),
            })

        run.summary = {
            "type": "summary",
            "modality": modality.value,
            "records": len(records),
            "survivors": len(survivors),
            "confusion": [confusions[step].to_json() for step in STEPS],
        }
        msr_logger.info(f"{modality.value}: прогон завершен, эпизодов {len(run.episodes)}")
        return run

    def run(self) -> RunResult:
        # след не зависит от числа потоков и каталога вывода
        snapshot = copy.deepcopy(self.config.raw)
        snapshot["run"].pop("workers", None)
        snapshot["run"].pop("out_dir", None)
        meta = {
            "type": "meta",
            "seed": self.seed,
            "config": snapshot,
            "dataset": self.dataset.meta,
            "modalities": [m.value for m in self.config.run.modalities],
        }
        runs = [self.run_modality(m) for m in self.config.run.modalities]
        return RunResult(seed=self.seed, meta=meta, runs=runs)


def _jsonl(lines: Iterable[dict]) -> str:
    return "".join(json.dumps(line, sort_keys=True, ensure_ascii=False) + "\n" for line in lines)


def write_outputs(result: RunResult, out_dir: str | Path) -> list[Path]:
    """trace.jsonl, report_<modality>.csv и report.md в каталоге out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    lines = [result.meta]
    for run in result.runs:
        lines.append(run.alignment)
        lines.extend(run.episodes)
        lines.append(run.summary)
    trace = out / TRACE_FILE
    trace.write_text(_jsonl(lines), encoding="utf-8", newline="\n")
    written.append(trace)

    tables = result.tables()
    for run in result.runs:
        path = out / csv_name(run.modality)
        path.write_text(render_csv(tables[run.modality.value], run.modality.value), encoding="utf-8", newline="\n")
        written.append(path)

    markdown, _ = render_markdown(tables)
    path = out / MARKDOWN_FILE
    path.write_text(markdown, encoding="utf-8", newline="\n")
    written.append(path)
    return written
