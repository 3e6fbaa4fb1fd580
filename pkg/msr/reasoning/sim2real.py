"""
Sim2Real: рандомизация среды, точная оптимизация политики обратной индукцией,
состязательное выравнивание признаков, расхождение наград и уточнение политики.

Сетка: состояние s = y * width + x, действия up, down, left, right.
Каждый ход стоит step_reward, вход в цель добавляет goal_reward, цель
поглощающая с нулевой наградой. При проскальзывании агент остается на месте.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from msr.reasoning.dataset import ACTION_NAMES
from msr.utils.errors import ConfigError, EmptyInputError, ShapeError, TaskLookupError
from msr.utils.logger import msr_logger

MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))
SLIP_CLAMP = (0.0, 0.95)

CONTINUOUS_PARAMS = ("step_reward", "goal_reward", "slip_prob")
CATEGORICAL_PARAMS = ("horizon",)


@dataclass(frozen=True)
class GridEnv:
    width: int = 5
    height: int = 5
    start: tuple[int, int] = (2, 2)
    goal: tuple[int, int] = (2, 0)
    step_reward: float = -1.0
    goal_reward: float = 10.0
    slip_prob: float = 0.0
    horizon: int = 8
    n_actions: int = 4

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("sim2real.grid", f"grid must be at least 1x1, got {self.width}x{self.height}")
        for name in ("start", "goal"):
            x, y = getattr(self, name)
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ConfigError(f"sim2real.grid.{name}", f"cell {(x, y)} is outside the grid")
        if tuple(self.start) == tuple(self.goal):
            raise ConfigError("sim2real.grid", "start and goal must differ")
        if self.horizon < 1:
            raise ConfigError("sim2real.grid.horizon", f"must be >= 1, got {self.horizon}")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ConfigError("sim2real.grid.slip_prob", f"must lie in [0, 1), got {self.slip_prob}")
        if self.n_actions not in (2, 4):
            raise ConfigError("sim2real.grid.n_actions", f"must be 2 or 4, got {self.n_actions}")

    @property
    def n_states(self) -> int:
        return self.width * self.height

    def state(self, cell: tuple[int, int]) -> int:
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise TaskLookupError(f"cell {(x, y)} is outside the {self.width}x{self.height} grid")
        return y * self.width + x

    def cell(self, state: int) -> tuple[int, int]:
        return state % self.width, state // self.width

    def next_cell(self, cell: tuple[int, int], action: int) -> tuple[int, int]:
        dx, dy = MOVES[action]
        x, y = cell[0] + dx, cell[1] + dy
        if 0 <= x < self.width and 0 <= y < self.height:
            return x, y
        return cell


@dataclass(frozen=True)
class RandomizationSpec:
    continuous: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    categorical: Mapping[str, Mapping[int, float]] = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> "RandomizationSpec":
        for name, (_, sigma) in self.continuous.items():
            if name not in CONTINUOUS_PARAMS:
                raise ConfigError(f"sim2real.randomization.continuous.{name}", "unknown parameter")
            if sigma < 0:
                raise ConfigError(f"sim2real.randomization.continuous.{name}", f"sigma must be >= 0, got {sigma}")
        for name, distribution in self.categorical.items():
            if name not in CATEGORICAL_PARAMS:
                raise ConfigError(f"sim2real.randomization.categorical.{name}", "unknown parameter")
            if not distribution:
                raise ConfigError(f"sim2real.randomization.categorical.{name}", "empty distribution")
            total = sum(distribution.values())
            if abs(total - 1.0) > 1e-9 or any(p < 0 for p in distribution.values()):
                raise ConfigError(f"sim2real.randomization.categorical.{name}",
                                  f"probabilities must be non-negative and sum to 1, got {total}")
        return self


@dataclass(frozen=True)
class PolicyTable:
    """actions[h - 1][s]: действие при оставшемся горизонте h; values[h][s]: оптимальная ценность."""
    actions: np.ndarray
    values: np.ndarray
    gamma: float
    width: int
    height: int

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def action(self, state: int, remaining: Optional[int] = None) -> int:
        remaining = self.horizon if remaining is None else remaining
        if not 0 <= state < self.width * self.height:
            raise TaskLookupError(f"state {state} is outside the {self.width}x{self.height} grid")
        if not 1 <= remaining <= self.horizon:
            raise TaskLookupError(f"remaining horizon {remaining} outside [1, {self.horizon}]")
        return int(self.actions[remaining - 1, state])

    def value(self, state: int, remaining: Optional[int] = None) -> float:
        remaining = self.horizon if remaining is None else remaining
        return float(self.values[remaining, state])


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[tuple[int, int, float], ...]

    def rewards(self) -> list[float]:
        return [r for _, _, r in self.steps]


@dataclass
class AlignmentModel:
    encoder: np.ndarray
    disc_weights: np.ndarray
    disc_bias: float = 0.0
    lambda_task: float = 0.1
    center: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, raw_dim: int, encoded_dim: Optional[int] = None, lambda_task: float = 0.1,
                seed: int = 0) -> "AlignmentModel":
        encoded_dim = raw_dim if encoded_dim is None else encoded_dim
        if encoded_dim < 1:
            raise ConfigError("sim2real.alignment.encoded_dim", f"must be >= 1, got {encoded_dim}")
        if lambda_task < 0:
            raise ConfigError("sim2real.alignment.lambda_task", f"must be >= 0, got {lambda_task}")
        if encoded_dim == raw_dim:
            encoder = np.eye(raw_dim)
        else:
            rng = np.random.default_rng(seed)
            encoder = rng.normal(0.0, 1.0 / math.sqrt(raw_dim), size=(encoded_dim, raw_dim))
        return cls(encoder=encoder, disc_weights=np.zeros(encoded_dim), lambda_task=lambda_task)

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.center is not None:
            x = (x - self.center) / self.scale
        return x @ self.encoder.T

    def discriminate(self, x: np.ndarray) -> np.ndarray:
        """P(sim | x)."""
        return _sigmoid(self.encode(x) @ self.disc_weights + self.disc_bias)


@dataclass(frozen=True)
class AlignmentResult:
    model: AlignmentModel
    heldout_accuracy: float
    train_accuracy: float


# --- среда и награды -------------------------------------------------------

def transition_tensor(env: GridEnv) -> np.ndarray:
    """P[a, s, s'] с учетом проскальзывания и поглощающей цели."""
    n = env.n_states
    goal = env.state(env.goal)
    tensor = np.zeros((env.n_actions, n, n))
    for a in range(env.n_actions):
        for s in range(n):
            if s == goal:
                tensor[a, s, s] = 1.0
                continue
            target = env.state(env.next_cell(env.cell(s), a))
            tensor[a, s, target] += 1.0 - env.slip_prob
            tensor[a, s, s] += env.slip_prob
    return tensor


def reward_table(env: GridEnv, transitions: Optional[np.ndarray] = None) -> np.ndarray:
    """R(s, a): ожидаемая награда за ход."""
    transitions = transition_tensor(env) if transitions is None else transitions
    goal = env.state(env.goal)
    table = env.step_reward + env.goal_reward * transitions[:, :, goal].T
    table[goal, :] = 0.0
    return table


def randomize_env(base: GridEnv, spec: RandomizationSpec) -> GridEnv:
    """ε = Randomize(E; μ, σ, P): сдвиг ~ N(μ, σ) к непрерывным параметрам, выбор из P для дискретных."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    changes: dict[str, float | int] = {}
    for name in sorted(spec.continuous):
        mu, sigma = spec.continuous[name]
        value = getattr(base, name) + float(rng.normal(mu, sigma))
        if name == "slip_prob":
            value = min(SLIP_CLAMP[1], max(SLIP_CLAMP[0], value))
        changes[name] = value
    for name in sorted(spec.categorical):
        distribution = spec.categorical[name]
        options = sorted(distribution)
        probabilities = np.array([distribution[o] for o in options], dtype=float)
        changes[name] = int(options[int(rng.choice(len(options), p=probabilities / probabilities.sum()))])
    return replace(base, **changes)


# --- оптимизация политики ----------------------------------------------------

def optimize_policy(env: GridEnv, gamma: float, reward: Optional[np.ndarray] = None) -> PolicyTable:
    """
    π = argmax E[Σ γ^t R(s_t, a_t)] обратной индукцией по оставшемуся горизонту.
    Равенство разрешается порядком действий up, down, left, right.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError("sim2real.gamma", f"must lie in [0, 1], got {gamma}")
    transitions = transition_tensor(env)
    rewards = reward_table(env, transitions) if reward is None else np.asarray(reward, dtype=float)
    if rewards.shape != (env.n_states, env.n_actions):
        raise ShapeError(f"reward table must be {(env.n_states, env.n_actions)}, got {rewards.shape}")

    values = np.zeros((env.horizon + 1, env.n_states))
    actions = np.zeros((env.horizon, env.n_states), dtype=np.int64)
    for h in range(1, env.horizon + 1):
        q = rewards + gamma * np.einsum("ast,t->sa", transitions, values[h - 1])
        actions[h - 1] = np.argmax(q, axis=1)
        values[h] = q[np.arange(env.n_states), actions[h - 1]]
    return PolicyTable(actions=actions, values=values, gamma=gamma, width=env.width, height=env.height)


def discounted_return(trajectory: Trajectory | Sequence[float], gamma: float) -> float:
    rewards = trajectory.rewards() if isinstance(trajectory, Trajectory) else list(trajectory)
    total = 0.0
    discount = 1.0
    for r in rewards:
        total += discount * r
        discount *= gamma
    return total


def rollout(env: GridEnv, policy: PolicyTable, seed: int = 0,
            reward: Optional[np.ndarray] = None) -> Trajectory:
    rng = np.random.default_rng(seed)
    rewards = reward_table(env) if reward is None else reward
    goal = env.state(env.goal)
    state = env.state(env.start)
    steps = []
    for remaining in range(policy.horizon, 0, -1):
        if state == goal:
            break
        action = policy.action(state, remaining)
        steps.append((state, action, float(rewards[state, action])))
        if rng.random() >= env.slip_prob:
            state = env.state(env.next_cell(env.cell(state), action))
    return Trajectory(steps=tuple(steps))


def reward_discrepancy(r_real, r_sim):
    """δ = R_real(s, a) - R_sim(s, a)."""
    if np.isscalar(r_real) and np.isscalar(r_sim):
        return float(r_real) - float(r_sim)
    real = np.asarray(r_real, dtype=float)
    sim = np.asarray(r_sim, dtype=float)
    if real.shape != sim.shape:
        raise ShapeError(f"reward shapes differ: {real.shape} vs {sim.shape}")
    return real - sim


def refine_policy(env_real: GridEnv, delta, alpha: float, gamma: float) -> PolicyTable:
    """π+ = argmax Σ γ^t (R_real + αδ). Скалярный δ действует на все (s, a)."""
    base = reward_table(env_real)
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 0 and delta.shape != base.shape:
        raise ShapeError(f"delta must be a scalar or {base.shape}, got {delta.shape}")
    return optimize_policy(env_real, gamma, reward=base + alpha * delta)


# --- состязательное выравнивание ---------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _accuracy(model: AlignmentModel, x: np.ndarray, y: np.ndarray) -> float:
    predicted = model.discriminate(x) >= 0.5
    return float(np.mean(predicted == (y == 1.0)))


def align_features(sim_features, real_features, model: AlignmentModel, steps: int = 500,
                   lr: float = 0.05, train_encoder: bool = True, holdout: float = 0.5,
                   seed: int = 0) -> AlignmentResult:
    """
    min_φ max_D L_adv(φ, D) + λ L_task(φ) полнобатчевыми чередующимися шагами.

    Дискриминатор поднимается по логарифмическому правдоподобию (sim = 1, real = 0),
    кодировщик спускается по кросс-энтропии смешения (цель p = 1/2 для обоих доменов)
    плюс λ · MSE реконструкции x ≈ WᵀWx.
    Точность считается на отложенной части выборки.
    """
    sim = np.atleast_2d(np.asarray(sim_features, dtype=float))
    real = np.atleast_2d(np.asarray(real_features, dtype=float))
    if sim.size == 0 or real.size == 0:
        raise EmptyInputError("alignment needs non-empty simulated and real samples")
    if sim.shape[1] != real.shape[1] or sim.shape[1] != model.encoder.shape[1]:
        raise ShapeError(f"raw dimensions differ: sim {sim.shape[1]}, real {real.shape[1]}, "
                         f"encoder {model.encoder.shape[1]}")
    if not 0.0 < holdout < 1.0:
        raise ConfigError("sim2real.alignment.holdout", f"must lie in (0, 1), got {holdout}")

    x = np.vstack([sim, real])
    y = np.concatenate([np.ones(len(sim)), np.zeros(len(real))])
    order = np.random.default_rng(seed).permutation(len(x))
    cut = max(1, min(len(x) - 1, int(round(len(x) * (1.0 - holdout)))))
    train, test = order[:cut], order[cut:]

    center = x[train].mean(axis=0)
    scale = x[train].std(axis=0)
    scale[scale == 0.0] = 1.0
    trained = AlignmentModel(encoder=model.encoder.copy(), disc_weights=model.disc_weights.copy(),
                             disc_bias=model.disc_bias, lambda_task=model.lambda_task,
                             center=center, scale=scale)

    xs = (x[train] - center) / scale
    ys = y[train]
    for _ in range(steps):
        z = xs @ trained.encoder.T
        p = _sigmoid(z @ trained.disc_weights + trained.disc_bias)
        residual = ys - p
        # дискриминатор: подъем по правдоподобию
        trained.disc_weights = trained.disc_weights + lr * (z.T @ residual) / len(xs)
        trained.disc_bias = trained.disc_bias + lr * float(residual.mean())
        if not train_encoder:
            continue
        p = _sigmoid(z @ trained.disc_weights + trained.disc_bias)
        # d/dlogit смешения: p - 1/2
        grad_adv = np.outer(trained.disc_weights, (p - 0.5) @ xs) / len(xs)
        reconstruction = xs - z @ trained.encoder
        grad_task = -2.0 * (z.T @ reconstruction + trained.encoder @ reconstruction.T @ xs) / len(xs)
        trained.encoder = trained.encoder - lr * (grad_adv + trained.lambda_task * grad_task)

    result = AlignmentResult(
        model=trained,
        heldout_accuracy=_accuracy(trained, x[test], y[test]),
        train_accuracy=_accuracy(trained, x[train], y[train]),
    )
    msr_logger.info(
        f"Выравнивание признаков: шагов={steps}, encoder={'обучается' if train_encoder else 'заморожен'}, "
        f"точность дискриминатора на отложенной выборке={result.heldout_accuracy:.3f}")
    return result


# --- банк политик для конвейера ----------------------------------------------

def goal_for_action(base: GridEnv, action: int, distance: int) -> tuple[int, int]:
    dx, dy = MOVES[action]
    x = min(base.width - 1, max(0, base.start[0] + dx * distance))
    y = min(base.height - 1, max(0, base.start[1] + dy * distance))
    if (x, y) == tuple(base.start):
        raise ConfigError("sim2real.goal_distance",
                          f"action {ACTION_NAMES[action]} has no room to move from {base.start}")
    return x, y


@dataclass(frozen=True)
class PlannedAction:
    """Политики одного действия: в рандомизированной симуляции и уточненная для «реальной» среды."""
    action: int
    sim_env: GridEnv
    real_env: GridEnv
    sim_policy: PolicyTable
    refined_policy: PolicyTable
    delta: np.ndarray


def plan_policy_bank(base: GridEnv, spec: RandomizationSpec, real_shift: Mapping[str, float],
                     gamma: float, alpha: float, goal_distance: int) -> list[PlannedAction]:
    bank = []
    for action in range(base.n_actions):
        goal_env = replace(base, goal=goal_for_action(base, action, goal_distance))
        sim_env = randomize_env(goal_env, spec)
        real_env = shifted_env(goal_env, real_shift)
        sim_policy = optimize_policy(sim_env, gamma)
        delta = reward_discrepancy(reward_table(real_env), reward_table(sim_env))
        refined = refine_policy(real_env, delta, alpha, gamma)
        bank.append(PlannedAction(action=action, sim_env=sim_env, real_env=real_env,
                                  sim_policy=sim_policy, refined_policy=refined, delta=delta))
    msr_logger.info(f"Банк политик построен: {len(bank)} действий, горизонт {base.horizon}, gamma={gamma}")
    return bank


def shifted_env(base: GridEnv, shift: Mapping[str, float]) -> GridEnv:
    """«Реальная» среда: базовая сетка со сдвинутыми наградами и проскальзыванием."""
    changes = {}
    for name, offset in shift.items():
        if name not in CONTINUOUS_PARAMS:
            raise ConfigError(f"sim2real.real_shift.{name}", "unknown parameter")
        value = getattr(base, name) + offset
        if name == "slip_prob":
            value = min(SLIP_CLAMP[1], max(SLIP_CLAMP[0], value))
        changes[name] = value
    return replace(base, **changes)
