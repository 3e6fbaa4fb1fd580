import copy
import json
import os
from dataclasses import dataclass, replace
from typing import Any, Optional

from msr.reasoning.dataset import DEFAULT_LABEL_NOISE, MODALITY_ORDER, GeneratorConfig, Modality
from msr.reasoning.decision import ContextWeights, Subtask, TaskTemplate, default_templates
from msr.reasoning.ingest import ExtractionMode, TrustThreshold
from msr.reasoning.memory import MemoryTier
from msr.reasoning.scenario import ModalityWeights
from msr.reasoning.sim2real import GridEnv, RandomizationSpec, goal_for_action
from msr.utils.errors import ConfigError
from msr.utils.helpers import table_print
from msr.utils.logger import msr_logger


DEFAULT_RUN_CONFIG = {
    "dataset": {
        "path": None,
        "generator": {
            "n_per_modality": 10000,
            "feature_dim": 8,
            "n_actions": 4,
            "label_noise": dict(DEFAULT_LABEL_NOISE),
            "trust_mean": 0.5,
            "trust_spread": 0.45,
            "separation": 2.0,
        },
    },
    "ingest": {
        "tau": 0.5,
        "extraction_mode": "identity",
        "window": None,
        "window_stride": 1,
    },
    "scenario": {
        "weights": {"alpha_s": 0.6, "alpha_i": 0.2, "alpha_h": 0.2},
        "m_count": 16,
        "k": 4,
        "noise_width": 0.1,
        "internal_state": None,
        "instruction": None,
    },
    "attention": {
        "beta": 0.3,
        "relevance_threshold": 0.5,
    },
    "memory": {
        "stm_capacity": 32,
        "sparse_readout_top_n": 8,
        "sparse_readout_threshold": 64,
        "tiers": ["STM", "LTM"],
        "prime_records": 256,
    },
    "decision": {
        "weights": [0.25, 0.25, 0.25, 0.25],
        "lambda": 0.4,
        "task": "respond",
        "templates": None,
    },
    "sim2real": {
        "grid": {
            "width": 5,
            "height": 5,
            "step_reward": -1.0,
            "goal_reward": 10.0,
            "slip_prob": 0.0,
            "horizon": 8,
        },
        "goal_distance": 2,
        "real_shift": {"step_reward": -0.1, "slip_prob": 0.05},
        "randomization": {
            "continuous": {
                "step_reward": [0.0, 0.1],
                "goal_reward": [0.0, 1.0],
                "slip_prob": [0.05, 0.02],
            },
            "categorical": {"horizon": {"8": 0.5, "10": 0.5}},
        },
        "gamma": 0.95,
        "alpha": 0.5,
        "alignment": {
            "steps": 500,
            "lr": 0.05,
            "lambda_task": 0.1,
            "holdout": 0.5,
            "real_shift": 0.5,
            "real_noise": 0.1,
        },
    },
    "run": {
        "seed": None,
        "workers": 1,
        "modalities": [m.value for m in MODALITY_ORDER],
        "out_dir": "out",
    },
}

# Словари, которые пользователь задает целиком, без слияния по ключам
WHOLE_VALUE_KEYS = {
    "dataset.generator.label_noise",
    "decision.templates",
    "sim2real.real_shift",
    "sim2real.randomization.continuous",
    "sim2real.randomization.categorical",
}


def default_run_config() -> dict:
    return copy.deepcopy(DEFAULT_RUN_CONFIG)


def _merge(defaults: dict, data: dict, prefix: str) -> dict:
    result = copy.deepcopy(defaults)
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        if isinstance(defaults[key], dict) and path not in WHOLE_VALUE_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(path, f"expected an object, got {type(value).__name__}")
            result[key] = _merge(defaults[key], value, f"{path}.")
        else:
            result[key] = copy.deepcopy(value)
    return result


def merge_with_defaults(data: dict | None) -> dict:
    """Рекурсивное слияние с умолчаниями. Неизвестный ключ: ConfigError с полным путем."""
    if data is None:
        return default_run_config()
    if not isinstance(data, dict):
        raise ConfigError("config", "the config file must hold a JSON object")
    return _merge(DEFAULT_RUN_CONFIG, data, "")


def _number(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(path: str, value: Any, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _vector(path: str, value: Any) -> Optional[tuple[float, ...]]:
    if value is None:
        return None
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list of numbers, got {value!r}")
    return tuple(_number(f"{path}[{i}]", x) for i, x in enumerate(value))


@dataclass(frozen=True)
class DatasetSettings:
    path: Optional[str]
    generator: GeneratorConfig

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSettings":
        g = data["generator"]
        generator = GeneratorConfig(
            n_per_modality=g["n_per_modality"],
            feature_dim=g["feature_dim"],
            n_actions=g["n_actions"],
            label_noise=dict(g["label_noise"]),
            trust_mean=_number("dataset.generator.trust_mean", g["trust_mean"]),
            trust_spread=_number("dataset.generator.trust_spread", g["trust_spread"]),
            separation=_number("dataset.generator.separation", g["separation"]),
        )
        try:
            generator.validate()
        except ConfigError as exc:
            raise ConfigError(f"dataset.generator.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        return cls(path=data["path"], generator=generator)


@dataclass(frozen=True)
class IngestSettings:
    threshold: TrustThreshold
    extraction_mode: ExtractionMode
    window: Optional[int]
    window_stride: int

    @classmethod
    def from_dict(cls, data: dict) -> "IngestSettings":
        try:
            mode = ExtractionMode(data["extraction_mode"])
        except ValueError:
            raise ConfigError("ingest.extraction_mode",
                              f"expected one of {[m.value for m in ExtractionMode]}, got {data['extraction_mode']!r}") from None
        window = data["window"]
        if window is not None:
            window = _integer("ingest.window", window, minimum=1)
        return cls(
            threshold=TrustThreshold(tau=_number("ingest.tau", data["tau"])),
            extraction_mode=mode,
            window=window,
            window_stride=_integer("ingest.window_stride", data["window_stride"], minimum=1),
        )


@dataclass(frozen=True)
class ScenarioSettings:
    weights: ModalityWeights
    m_count: int
    k: int
    noise_width: float
    internal_state: Optional[tuple[float, ...]]
    instruction: Optional[tuple[float, ...]]

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSettings":
        w = data["weights"]
        noise_width = _number("scenario.noise_width", data["noise_width"])
        if noise_width < 0:
            raise ConfigError("scenario.noise_width", f"must be >= 0, got {noise_width}")
        return cls(
            weights=ModalityWeights(
                alpha_s=_number("scenario.weights.alpha_s", w["alpha_s"]),
                alpha_i=_number("scenario.weights.alpha_i", w["alpha_i"]),
                alpha_h=_number("scenario.weights.alpha_h", w["alpha_h"]),
            ),
            m_count=_integer("scenario.m_count", data["m_count"], minimum=1),
            k=_integer("scenario.k", data["k"], minimum=1),
            noise_width=noise_width,
            internal_state=_vector("scenario.internal_state", data["internal_state"]),
            instruction=_vector("scenario.instruction", data["instruction"]),
        )


@dataclass(frozen=True)
class AttentionSettings:
    beta: float
    relevance_threshold: float

    @classmethod
    def from_dict(cls, data: dict) -> "AttentionSettings":
        beta = _number("attention.beta", data["beta"])
        if not 0.0 <= beta <= 1.0:
            raise ConfigError("attention.beta", f"must lie in [0, 1], got {beta}")
        threshold = _number("attention.relevance_threshold", data["relevance_threshold"])
        if not 0.0 <= threshold <= 1.0:
            raise ConfigError("attention.relevance_threshold", f"must lie in [0, 1], got {threshold}")
        return cls(beta=beta, relevance_threshold=threshold)


@dataclass(frozen=True)
class MemorySettings:
    stm_capacity: int
    sparse_readout_top_n: int
    sparse_readout_threshold: int
    tiers: tuple[MemoryTier, ...]
    prime_records: int

    @classmethod
    def from_dict(cls, data: dict) -> "MemorySettings":
        tiers = data["tiers"]
        if not isinstance(tiers, list) or not tiers:
            raise ConfigError("memory.tiers", "expected a non-empty list of STM/LTM")
        try:
            parsed = tuple(MemoryTier(t) for t in tiers)
        except ValueError:
            raise ConfigError("memory.tiers", f"expected STM and/or LTM, got {tiers!r}") from None
        return cls(
            stm_capacity=_integer("memory.stm_capacity", data["stm_capacity"], minimum=1),
            sparse_readout_top_n=_integer("memory.sparse_readout_top_n", data["sparse_readout_top_n"], minimum=1),
            sparse_readout_threshold=_integer("memory.sparse_readout_threshold",
                                              data["sparse_readout_threshold"], minimum=1),
            tiers=parsed,
            prime_records=_integer("memory.prime_records", data["prime_records"], minimum=1),
        )


def _parse_templates(data: Any) -> Optional[dict[str, TaskTemplate]]:
    if data is None:
        return None
    if not isinstance(data, dict) or not data:
        raise ConfigError("decision.templates", "expected an object of task id -> subtask list")
    templates = {}
    for task_id, subtasks in data.items():
        path = f"decision.templates.{task_id}"
        if not isinstance(subtasks, list):
            raise ConfigError(path, "expected a list of subtasks")
        parsed = []
        for i, item in enumerate(subtasks):
            if not isinstance(item, dict) or "id" not in item:
                raise ConfigError(f"{path}[{i}]", "each subtask needs an 'id'")
            unknown = set(item) - {"id", "weights", "expands"}
            if unknown:
                raise ConfigError(f"{path}[{i}].{sorted(unknown)[0]}", "unknown key")
            weights = _vector(f"{path}[{i}].weights", item.get("weights")) or ()
            parsed.append(Subtask(subtask_id=str(item["id"]), weights=weights, expands=item.get("expands")))
        templates[task_id] = TaskTemplate(task_id=task_id, subtasks=tuple(parsed))
    return templates


@dataclass(frozen=True)
class DecisionSettings:
    weights: ContextWeights
    task: str
    templates: Optional[dict[str, TaskTemplate]]

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionSettings":
        weights = _vector("decision.weights", data["weights"])
        if weights is None or len(weights) != 4:
            raise ConfigError("decision.weights", "expected four context weights")
        return cls(
            weights=ContextWeights(w=weights, lambda_=_number("decision.lambda", data["lambda"])),
            task=str(data["task"]),
            templates=_parse_templates(data["templates"]),
        )

    def resolved_templates(self, n_actions: int) -> dict[str, TaskTemplate]:
        return self.templates if self.templates is not None else default_templates(n_actions)


@dataclass(frozen=True)
class AlignmentSettings:
    steps: int
    lr: float
    lambda_task: float
    holdout: float
    real_shift: float
    real_noise: float

    @classmethod
    def from_dict(cls, data: dict) -> "AlignmentSettings":
        settings = cls(
            steps=_integer("sim2real.alignment.steps", data["steps"], minimum=0),
            lr=_number("sim2real.alignment.lr", data["lr"]),
            lambda_task=_number("sim2real.alignment.lambda_task", data["lambda_task"]),
            holdout=_number("sim2real.alignment.holdout", data["holdout"]),
            real_shift=_number("sim2real.alignment.real_shift", data["real_shift"]),
            real_noise=_number("sim2real.alignment.real_noise", data["real_noise"]),
        )
        if settings.lr <= 0:
            raise ConfigError("sim2real.alignment.lr", f"must be > 0, got {settings.lr}")
        if settings.lambda_task < 0:
            raise ConfigError("sim2real.alignment.lambda_task", f"must be >= 0, got {settings.lambda_task}")
        if not 0.0 < settings.holdout < 1.0:
            raise ConfigError("sim2real.alignment.holdout", f"must lie in (0, 1), got {settings.holdout}")
        if settings.real_noise < 0:
            raise ConfigError("sim2real.alignment.real_noise", f"must be >= 0, got {settings.real_noise}")
        return settings


@dataclass(frozen=True)
class Sim2RealSettings:
    grid: GridEnv
    goal_distance: int
    real_shift: dict[str, float]
    randomization: RandomizationSpec
    gamma: float
    alpha: float
    alignment: AlignmentSettings

    @classmethod
    def from_dict(cls, data: dict) -> "Sim2RealSettings":
        g = data["grid"]
        width = _integer("sim2real.grid.width", g["width"], minimum=1)
        height = _integer("sim2real.grid.height", g["height"], minimum=1)
        distance = _integer("sim2real.goal_distance", data["goal_distance"], minimum=1)
        start = (width // 2, height // 2)
        placeholder_goal = (start[0], max(0, start[1] - distance))
        if placeholder_goal == start:
            raise ConfigError("sim2real.goal_distance", f"grid {width}x{height} leaves no room to move up")
        grid = GridEnv(
            width=width,
            height=height,
            start=start,
            goal=placeholder_goal,
            step_reward=_number("sim2real.grid.step_reward", g["step_reward"]),
            goal_reward=_number("sim2real.grid.goal_reward", g["goal_reward"]),
            slip_prob=_number("sim2real.grid.slip_prob", g["slip_prob"]),
            horizon=_integer("sim2real.grid.horizon", g["horizon"], minimum=1),
        )
        for action in range(grid.n_actions):
            goal_for_action(grid, action, distance)

        real_shift = data["real_shift"]
        if not isinstance(real_shift, dict):
            raise ConfigError("sim2real.real_shift", "expected an object")
        real_shift = {k: _number(f"sim2real.real_shift.{k}", v) for k, v in real_shift.items()}

        r = data["randomization"]
        continuous = {}
        for name, pair in (r["continuous"] or {}).items():
            path = f"sim2real.randomization.continuous.{name}"
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(path, "expected [mu, sigma]")
            continuous[name] = (_number(path, pair[0]), _number(path, pair[1]))
        categorical = {}
        for name, distribution in (r["categorical"] or {}).items():
            path = f"sim2real.randomization.categorical.{name}"
            if not isinstance(distribution, dict):
                raise ConfigError(path, "expected an object of value -> probability")
            try:
                categorical[name] = {int(k): _number(path, p) for k, p in distribution.items()}
            except ValueError:
                raise ConfigError(path, f"values must be integers, got {sorted(distribution)}") from None
            if any(value < 1 for value in categorical[name]):
                raise ConfigError(path, "horizon values must be >= 1")
        spec = RandomizationSpec(continuous=continuous, categorical=categorical).validate()

        gamma = _number("sim2real.gamma", data["gamma"])
        if not 0.0 <= gamma <= 1.0:
            raise ConfigError("sim2real.gamma", f"must lie in [0, 1], got {gamma}")
        return cls(
            grid=grid,
            goal_distance=distance,
            real_shift=real_shift,
            randomization=spec,
            gamma=gamma,
            alpha=_number("sim2real.alpha", data["alpha"]),
            alignment=AlignmentSettings.from_dict(data["alignment"]),
        )

    def base_env(self, n_actions: int) -> GridEnv:
        return replace(self.grid, n_actions=n_actions)


@dataclass(frozen=True)
class RunSettings:
    seed: Optional[int]
    workers: int
    modalities: tuple[Modality, ...]
    out_dir: str

    @classmethod
    def from_dict(cls, data: dict) -> "RunSettings":
        seed = data["seed"]
        if seed is not None:
            seed = _integer("run.seed", seed, minimum=0)
        modalities = data["modalities"]
        if not isinstance(modalities, list) or not modalities:
            raise ConfigError("run.modalities", "expected a non-empty list")
        try:
            chosen = {Modality(m) for m in modalities}
        except ValueError:
            raise ConfigError("run.modalities", f"unknown modality in {modalities!r}") from None
        return cls(
            seed=seed,
            workers=_integer("run.workers", data["workers"], minimum=1),
            modalities=tuple(m for m in MODALITY_ORDER if m in chosen),
            out_dir=str(data["out_dir"]),
        )


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSettings
    ingest: IngestSettings
    scenario: ScenarioSettings
    attention: AttentionSettings
    memory: MemorySettings
    decision: DecisionSettings
    sim2real: Sim2RealSettings
    run: RunSettings
    raw: dict

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        merged = merge_with_defaults(data)
        return cls(
            dataset=DatasetSettings.from_dict(merged["dataset"]),
            ingest=IngestSettings.from_dict(merged["ingest"]),
            scenario=ScenarioSettings.from_dict(merged["scenario"]),
            attention=AttentionSettings.from_dict(merged["attention"]),
            memory=MemorySettings.from_dict(merged["memory"]),
            decision=DecisionSettings.from_dict(merged["decision"]),
            sim2real=Sim2RealSettings.from_dict(merged["sim2real"]),
            run=RunSettings.from_dict(merged["run"]),
            raw=merged,
        )

    def with_overrides(self, workers: Optional[int] = None, modalities: Optional[list[str]] = None,
                       out_dir: Optional[str] = None) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        if workers is not None:
            raw["run"]["workers"] = workers
        if modalities is not None:
            raw["run"]["modalities"] = modalities
        if out_dir is not None:
            raw["run"]["out_dir"] = out_dir
        return RunConfig.from_dict(raw)


class MsrConfig:
    def __init__(self, path='msr.json', data=None):
        """
        path: путь к json-файлу с конфигурацией запуска.
        data: словарь с параметрами (частичный: недостающее берется из умолчаний).
        """
        self.path = path
        self._data = data.copy() if data is not None else None

    def exists(self):
        return os.path.exists(self.path)

    def load(self) -> dict:
        """Загрузить данные из файла в self._data (и вернуть их)."""
        if not self.exists():
            raise FileNotFoundError(f"Файл {self.path} не найден!")
        with open(self.path, "r", encoding="utf-8") as f:
            try:
                self._data = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"{self.path} is not valid JSON: {exc}") from None
        return self._data

    def run_config(self) -> RunConfig:
        """Проверенная конфигурация: умолчания + содержимое файла."""
        try:
            return RunConfig.from_dict(self.data)
        except ConfigError as exc:
            msr_logger.warning(f"Конфигурация {self.path} отклонена: {exc}")
            raise

    def save(self, data=None):
        if data is not None:
            self._data = data.copy()
        if self._data is None:
            raise ValueError("Нет данных для сохранения!")
        with open(self.path, "w", encoding="utf-8") as f:
            json.dump(self._data, f, ensure_ascii=False, indent=4)

    def create(self, data=None, force=False):
        """
        Создать новый конфиг. Если файл уже есть: запросить подтверждение на перезапись.
        """
        if self.exists() and not force:
            answer = table_print(
                "INPUT",
                f"Файл {self.path} уже существует. Перезаписать? (Y/N): "
            ).strip().lower()
            if answer != 'y':
                table_print("WARNING", "Создание файла конфигурации отменено.")
                return False
        self._data = merge_with_defaults(data if data is not None else self._data)
        self.save()
        table_print("SUCCESS", f"Новый файл конфигурации {self.path} создан.")
        return True

    @property
    def data(self) -> dict:
        if self._data is None:
            return self.load()
        return self._data


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """Конфигурация запуска из файла path или умолчания, если путь не задан."""
    if path is None:
        return RunConfig.from_dict(None)
    return MsrConfig(path).run_config()
