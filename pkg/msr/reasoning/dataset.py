"""
Синтетический мультимодальный датасет: генерация, сохранение и загрузка.

Запись i каждой модальности наблюдает одну и ту же латентную сцену i.
Сцена (чистые флаги, класс действия, доверие, равномерные величины для
шумовых переворотов) берется из подпотока (seed, "scene", i), шум сенсора
из подпотока (seed, modality, i). Порядок генерации ни на что не влияет.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from msr.utils.errors import ConfigError, DatasetParseError
from msr.utils.logger import msr_logger
from msr.utils.seeding import rng_for

SCHEMA_VERSION = 1


class Modality(str, Enum):
    VISUAL = "visual"
    AUDITORY = "auditory"
    TACTILE = "tactile"


MODALITY_ORDER: tuple[Modality, ...] = (Modality.VISUAL, Modality.AUDITORY, Modality.TACTILE)

DEFAULT_LABEL_NOISE = {
    Modality.VISUAL.value: 0.09,
    Modality.AUDITORY.value: 0.11,
    Modality.TACTILE.value: 0.12,
}

ACTION_NAMES = ("up", "down", "left", "right")

RECORD_KEYS = ("id", "modality", "features", "trust", "valid", "relevant", "action", "mem_label")


@dataclass(frozen=True)
class ModalRecord:
    id: int
    modality: Modality
    features: tuple[float, ...]
    trust: float
    valid: bool
    relevant: bool
    action: int
    mem_label: int

    def vector(self) -> np.ndarray:
        return np.asarray(self.features, dtype=float)

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "modality": self.modality.value,
            "features": [float(x) for x in self.features],
            "trust": float(self.trust),
            "valid": self.valid,
            "relevant": self.relevant,
            "action": self.action,
            "mem_label": self.mem_label,
        }


@dataclass(frozen=True)
class GeneratorConfig:
    n_per_modality: int = 10_000
    feature_dim: int = 8
    n_actions: int = 4
    label_noise: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LABEL_NOISE))
    trust_mean: float = 0.5
    trust_spread: float = 0.45
    separation: float = 2.0
    seed: int = 42
    modalities: tuple[str, ...] = tuple(m.value for m in MODALITY_ORDER)

    def validate(self) -> "GeneratorConfig":
        if isinstance(self.n_per_modality, bool) or not isinstance(self.n_per_modality, int) \
                or self.n_per_modality < 1:
            raise ConfigError("n_per_modality", f"must be an integer >= 1, got {self.n_per_modality!r}")
        if self.n_actions not in (2, 4):
            raise ConfigError("n_actions", f"must be 2 or 4 (grid moves), got {self.n_actions!r}")
        if not isinstance(self.feature_dim, int) or self.feature_dim < self.n_actions + 1:
            raise ConfigError(
                "feature_dim", f"must be an integer >= n_actions + 1 = {self.n_actions + 1}, got {self.feature_dim!r}")
        if not self.modalities:
            raise ConfigError("modalities", "at least one modality is required")
        known = {m.value for m in MODALITY_ORDER}
        for name in self.modalities:
            if name not in known:
                raise ConfigError("modalities", f"unknown modality {name!r}")
        if len(set(self.modalities)) != len(self.modalities):
            raise ConfigError("modalities", "duplicate modality")
        for name in self.modalities:
            if name not in self.label_noise:
                raise ConfigError(f"label_noise.{name}", "missing noise rate")
        for name, rate in self.label_noise.items():
            if name not in known:
                raise ConfigError(f"label_noise.{name}", "unknown modality")
            if not isinstance(rate, (int, float)) or not 0.0 <= rate < 0.5:
                raise ConfigError(f"label_noise.{name}", f"must lie in [0, 0.5), got {rate!r}")
        if not self.separation > 0 or not math.isfinite(self.separation):
            raise ConfigError("separation", f"must be a positive finite number, got {self.separation!r}")
        if not self.trust_spread > 0:
            raise ConfigError("trust_distribution.spread", f"must be > 0, got {self.trust_spread!r}")
        if not (self.trust_mean - self.trust_spread > 0.0 and self.trust_mean + self.trust_spread <= 1.0):
            raise ConfigError(
                "trust_distribution",
                f"mean ± spread must stay inside (0, 1], got {self.trust_mean!r} ± {self.trust_spread!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {self.seed!r}")
        return self

    def ordered_modalities(self) -> tuple[Modality, ...]:
        chosen = set(self.modalities)
        return tuple(m for m in MODALITY_ORDER if m.value in chosen)

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        data["label_noise"] = {k: float(v) for k, v in sorted(self.label_noise.items())}
        data["modalities"] = list(self.modalities)
        return data

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "GeneratorConfig":
        try:
            return cls(
                n_per_modality=data["n_per_modality"],
                feature_dim=data["feature_dim"],
                n_actions=data["n_actions"],
                label_noise=dict(data["label_noise"]),
                trust_mean=data["trust_mean"],
                trust_spread=data["trust_spread"],
                separation=data["separation"],
                seed=data["seed"],
                modalities=tuple(data["modalities"]),
            )
        except (KeyError, TypeError) as exc:
            raise DatasetParseError(f"generator meta is malformed: {exc}", field="meta.generator") from exc


@dataclass(frozen=True)
class Dataset:
    records: tuple[ModalRecord, ...]
    meta: dict[str, Any]

    @property
    def config(self) -> GeneratorConfig:
        return GeneratorConfig.from_json(self.meta["generator"])

    def counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for record in self.records:
            counts[record.modality.value] = counts.get(record.modality.value, 0) + 1
        return counts

    def for_modality(self, modality: Modality) -> list[ModalRecord]:
        return [r for r in self.records if r.modality == modality]


@dataclass(frozen=True)
class Scene:
    """Латентная сцена, общая для всех модальностей."""
    index: int
    valid: bool
    relevant: bool
    action: int
    trust: float
    flip_draws: tuple[float, float, float, float]  # valid, relevant, action, mem_label


def draw_scene(config: GeneratorConfig, index: int, stream: str = "scene") -> Scene:
    rng = rng_for(config.seed, stream, index)
    valid = bool(rng.random() < 0.5)
    relevant = bool(rng.random() < 0.5)
    action = int(rng.integers(config.n_actions))
    offset = config.trust_spread * (1.0 - rng.random())
    trust = config.trust_mean + offset if valid else config.trust_mean - offset
    flips = tuple(float(u) for u in rng.random(4))
    return Scene(index=index, valid=valid, relevant=relevant, action=action, trust=float(trust), flip_draws=flips)


def cluster_center(config: GeneratorConfig, relevant: bool, action: int) -> np.ndarray:
    center = np.zeros(config.feature_dim)
    center[action] = -config.separation
    center[config.n_actions:] = -config.separation / 2 if relevant else config.separation / 2
    return center


def _truncated_normal(rng: np.random.Generator, size: int, bound: float) -> np.ndarray:
    out = rng.standard_normal(size)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def paired_class(label: int) -> int:
    """Парный класс: up<->down, left<->right."""
    return label ^ 1


def observe(config: GeneratorConfig, scene: Scene, modality: Modality, record_id: int,
            stream: str | None = None) -> ModalRecord:
    labels = (modality.value, scene.index) if stream is None else (stream, modality.value, scene.index)
    rng = rng_for(config.seed, *labels)
    noise = _truncated_normal(rng, config.feature_dim, config.separation / 4)
    features = cluster_center(config, scene.relevant, scene.action) + noise

    p = float(config.label_noise[modality.value])
    u_valid, u_relevant, u_action, u_mem = scene.flip_draws
    return ModalRecord(
        id=record_id,
        modality=modality,
        features=tuple(float(x) for x in features),
        trust=scene.trust,
        valid=scene.valid != (u_valid < p),
        relevant=scene.relevant != (u_relevant < p),
        action=paired_class(scene.action) if u_action < p else scene.action,
        mem_label=paired_class(scene.action) if u_mem < p else scene.action,
    )


def generate(config: GeneratorConfig) -> Dataset:
    config.validate()
    modalities = config.ordered_modalities()
    scenes = [draw_scene(config, i) for i in range(config.n_per_modality)]

    records = []
    for position, modality in enumerate(modalities):
        base = position * config.n_per_modality
        for scene in scenes:
            records.append(observe(config, scene, modality, base + scene.index))

    meta = {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "generator": config.to_json(),
        "counts": {m.value: config.n_per_modality for m in modalities},
    }
    msr_logger.info(
        f"Сгенерирован датасет: {len(records)} записей, seed={config.seed}, модальности={[m.value for m in modalities]}")
    return Dataset(records=tuple(records), meta=meta)


CALIBRATION_STREAM = "prime"


def calibration_records(config: GeneratorConfig, modality: Modality | str, count: int) -> list[ModalRecord]:
    """
    Размеченная выборка прошлого опыта для начального заполнения LTM.

    Сцены и шум берутся из отдельного подпотока (seed, "prime", ...), поэтому
    ни одна из этих записей не совпадает с оцениваемыми записями датасета.
    """
    if count < 1:
        raise ConfigError("memory.prime_records", f"must be >= 1, got {count}")
    modality = Modality(modality)
    return [observe(config, draw_scene(config, i, CALIBRATION_STREAM), modality, i, stream=CALIBRATION_STREAM)
            for i in range(count)]


def nearest_cluster_labels(config: GeneratorConfig, record: ModalRecord) -> tuple[bool, bool, int]:
    """Оракул ближайшего кластера: (valid, relevant, action) без шума меток."""
    x = record.vector()
    action = int(np.argmin(x[:config.n_actions]))
    relevant = bool(np.mean(x[config.n_actions:]) < 0.0)
    valid = record.trust > config.trust_mean
    return valid, relevant, action


def dumps(dataset: Dataset) -> str:
    payload = {
        "meta": dataset.meta,
        "records": [r.to_json() for r in dataset.records],
    }
    return json.dumps(payload, ensure_ascii=False)


def save(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(dataset))
    msr_logger.info(f"Датасет сохранен: {path} ({len(dataset.records)} записей)")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _parse_record(index: int, raw: Any, config: GeneratorConfig) -> ModalRecord:
    if not isinstance(raw, dict):
        raise DatasetParseError("record must be an object", record_index=index)
    for key in RECORD_KEYS:
        if key not in raw:
            raise DatasetParseError("missing field", record_index=index, field=key)
    extra = set(raw) - set(RECORD_KEYS)
    if extra:
        raise DatasetParseError(f"unknown fields {sorted(extra)}", record_index=index)

    record_id = raw["id"]
    if isinstance(record_id, bool) or not isinstance(record_id, int):
        raise DatasetParseError("must be an integer", record_index=index, field="id")
    try:
        modality = Modality(raw["modality"])
    except ValueError as exc:
        raise DatasetParseError(f"unknown modality {raw['modality']!r}", record_index=index,
                                field="modality") from exc

    features = raw["features"]
    if not isinstance(features, list) or len(features) != config.feature_dim:
        raise DatasetParseError(f"must be a list of {config.feature_dim} numbers", record_index=index,
                                field="features")
    if not all(_is_number(x) and math.isfinite(x) for x in features):
        raise DatasetParseError("all entries must be finite numbers", record_index=index, field="features")

    trust = raw["trust"]
    if not _is_number(trust) or not 0.0 <= trust <= 1.0:
        raise DatasetParseError(f"must lie in [0, 1], got {trust!r}", record_index=index, field="trust")
    for key in ("valid", "relevant"):
        if not isinstance(raw[key], bool):
            raise DatasetParseError("must be a boolean", record_index=index, field=key)
    for key in ("action", "mem_label"):
        value = raw[key]
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < config.n_actions:
            raise DatasetParseError(f"must be an integer in [0, {config.n_actions}), got {value!r}",
                                    record_index=index, field=key)

    return ModalRecord(
        id=record_id,
        modality=modality,
        features=tuple(float(x) for x in features),
        trust=float(trust),
        valid=raw["valid"],
        relevant=raw["relevant"],
        action=raw["action"],
        mem_label=raw["mem_label"],
    )


def loads(text: str) -> Dataset:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(payload, dict) or "meta" not in payload or "records" not in payload:
        raise DatasetParseError("top-level object must contain 'meta' and 'records'")

    meta = payload["meta"]
    if not isinstance(meta, dict) or "schema_version" not in meta:
        raise DatasetParseError("schema_version is mandatory", field="meta.schema_version")
    if meta["schema_version"] != SCHEMA_VERSION:
        raise DatasetParseError(
            f"schema mismatch: expected {SCHEMA_VERSION}, got {meta['schema_version']!r}",
            field="meta.schema_version")
    if "generator" not in meta or "counts" not in meta:
        raise DatasetParseError("meta must contain 'generator' and 'counts'", field="meta")
    declared = meta["counts"]
    if not isinstance(declared, dict) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in declared.values()):
        raise DatasetParseError(f"must map modality names to non-negative integers, got {declared!r}",
                                field="meta.counts")
    config = GeneratorConfig.from_json(meta["generator"])
    try:
        config.validate()
    except ConfigError as exc:
        raise DatasetParseError(str(exc), field=f"meta.generator.{exc.field}") from exc

    raw_records = payload["records"]
    if not isinstance(raw_records, list):
        raise DatasetParseError("'records' must be a list", field="records")

    records = []
    seen: set[int] = set()
    for index, raw in enumerate(raw_records):
        record = _parse_record(index, raw, config)
        if record.id in seen:
            raise DatasetParseError(f"duplicate id {record.id}", record_index=index, field="id")
        if (index == 0 and record.id != 0) or (records and record.id <= records[-1].id):
            raise DatasetParseError(f"ids must increase strictly from 0, got {record.id}",
                                    record_index=index, field="id")
        seen.add(record.id)
        records.append(record)

    dataset = Dataset(records=tuple(records), meta=meta)
    counts = dataset.counts()
    expected = {k: v for k, v in declared.items() if v}
    if counts != expected:
        raise DatasetParseError(f"per-modality counts {counts} do not match meta {expected}", field="meta.counts")
    return dataset


def load(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Файл датасета {path} не найден!")
    try:
        dataset = loads(path.read_text(encoding="utf-8"))
    except DatasetParseError as exc:
        msr_logger.warning(f"Датасет {path} отклонен: {exc}")
        raise
    msr_logger.info(f"Датасет загружен: {path} ({len(dataset.records)} записей)")
    return dataset


FLIP_FLAGS = ("valid", "relevant", "action", "mem_label")


def flip_fractions(dataset: Dataset, modality: Modality) -> dict[str, float]:
    """Доли записей модальности, у которых флаг отличается от чистого значения сцены."""
    config = dataset.config
    records = dataset.for_modality(modality)
    flipped = dict.fromkeys(FLIP_FLAGS, 0)
    if not records:
        return {flag: 0.0 for flag in FLIP_FLAGS}
    for position, record in enumerate(records):
        scene = draw_scene(config, position)
        clean = {"valid": scene.valid, "relevant": scene.relevant,
                 "action": scene.action, "mem_label": scene.action}
        for flag in FLIP_FLAGS:
            flipped[flag] += getattr(record, flag) != clean[flag]
    return {flag: flipped[flag] / len(records) for flag in FLIP_FLAGS}


def iter_modalities(dataset: Dataset) -> Iterable[Modality]:
    present = set(dataset.counts())
    return (m for m in MODALITY_ORDER if m.value in present)
