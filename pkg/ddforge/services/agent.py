"""Tabular Q-learning over DD segment choices.

The agent builds a sequence one segment at a time. States are the last ``m``
actions (left-padded with -1), the reward is the final coherence of the whole
sequence, and every (state, action) pair visited in an episode is moved
towards that reward with a first-visit Monte Carlo update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from ..monitoring import EPISODES, TRAIN_SECONDS, track_duration
from ..schemas import TrainConfig, TrainRecord
from ..utils.errors import ConfigError, DomainError, PreconditionError
from .coherence import coherence_value
from .noise_model import Nsd
from .sequences import ACTION_CODES, DdSequence, SegmentKind, segments_for_time
from .spectral import FrequencyGrid, TransformCache

logger = logging.getLogger(__name__)

PAD = -1
N_ACTIONS = len(ACTION_CODES)
EPISODE_HEADER = ("env_id", "T", "episode", "epsilon", "reward")

AggregatedState = tuple[int, ...]
Visit = tuple[AggregatedState, int]


def aggregate_state(partial_actions: Sequence[int], m: int) -> AggregatedState:
    """Last ``m`` action codes, left-padded with -1."""

    if m < 1:
        raise DomainError(f"history length m must be >= 1, got {m}")
    tail = tuple(int(a) for a in list(partial_actions)[-m:])
    return (PAD,) * (m - len(tail)) + tail


class QTable:
    """Action values Q(s, a); unseen pairs read as 0."""

    def __init__(self, values: dict[Visit, float] | None = None) -> None:
        self._values: dict[Visit, float] = dict(values or {})

    def __len__(self) -> int:
        return len(self._values)

    def value(self, state: AggregatedState, action: int) -> float:
        return self._values.get((state, int(action)), 0.0)

    def row(self, state: AggregatedState) -> np.ndarray:
        return np.array([self._values.get((state, a), 0.0) for a in ACTION_CODES])

    def set(self, state: AggregatedState, action: int, value: float) -> None:
        self._values[(state, int(action))] = float(value)

    def states(self) -> set[AggregatedState]:
        return {state for state, _ in self._values}

    def snapshot(self) -> "QTable":
        return QTable(self._values)

    def items(self) -> Iterable[tuple[Visit, float]]:
        return sorted(self._values.items())

    def to_json(self) -> list[dict[str, Any]]:
        return [{"state": list(state), "action": action, "value": value} for (state, action), value in self.items()]

    @classmethod
    def from_json(cls, records: Iterable[dict[str, Any]]) -> "QTable":
        return cls({(tuple(int(s) for s in r["state"]), int(r["action"])): float(r["value"]) for r in records})


def select_action(q: QTable, state: AggregatedState, epsilon: float, rng: np.random.Generator) -> int:
    """ε-greedy choice; greedy ties go to the lowest action code."""

    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(q.row(state)))


def monte_carlo_update(q: QTable, visited: Sequence[Visit], reward: float, alpha: float) -> None:
    """Q ← Q + α(r − Q) once per distinct visited pair, in first-visit order."""

    seen: set[Visit] = set()
    for state, action in visited:
        pair = (state, int(action))
        if pair in seen:
            continue
        seen.add(pair)
        current = q.value(state, action)
        q.set(state, action, current + alpha * (reward - current))


@dataclass(frozen=True)
class EpisodeOutcome:
    sequence: DdSequence
    reward: float
    visited: tuple[Visit, ...]


@dataclass(frozen=True)
class EpisodeLog:
    episode: int
    epsilon: float
    reward: float


@dataclass
class TrainResult:
    best_sequence: DdSequence
    best_reward: float
    q_table: QTable
    episode_log: list[EpisodeLog] = field(default_factory=list)
    final_epsilon: float = 0.0
    source: str = "greedy"

    @property
    def target_time(self) -> float:
        return self.best_sequence.total_time

    @property
    def episodes(self) -> int:
        return len(self.episode_log)

    def to_record(self, env_id: int) -> TrainRecord:
        return TrainRecord(
            env_id=env_id,
            T=self.target_time,
            actions=list(self.best_sequence.codes),
            coherence=self.best_reward,
            episodes=self.episodes,
            final_epsilon=self.final_epsilon,
            source=self.source,
        )

    def episode_rows(self, env_id: int) -> list[tuple[int, float, int, float, float]]:
        return [(env_id, self.target_time, e.episode, e.epsilon, e.reward) for e in self.episode_log]


class _Rewards:
    """Memo of coherence by action tuple for one (environment, grid)."""

    def __init__(self, nsd: Nsd, grid: FrequencyGrid, cache: TransformCache, config: TrainConfig) -> None:
        self.nsd, self.grid, self.cache, self.config = nsd, grid, cache, config
        self._memo: dict[tuple[int, ...], float] = {}

    def sequence(self, actions: Sequence[int]) -> DdSequence:
        return DdSequence(
            tuple(SegmentKind(a) for a in actions), self.config.delta_t, self.config.pulses_per_segment
        )

    def __call__(self, actions: Sequence[int]) -> float:
        key = tuple(int(a) for a in actions)
        reward = self._memo.get(key)
        if reward is None:
            reward = coherence_value(self.sequence(key), self.nsd, self.grid, self.cache)
            self._memo[key] = reward
        return reward


def run_episode(
    config: TrainConfig,
    q: QTable,
    nsd: Nsd,
    target_n: int,
    cache: TransformCache,
    rng: np.random.Generator,
    *,
    grid: FrequencyGrid,
    epsilon: float,
    rewards: _Rewards | None = None,
) -> EpisodeOutcome:
    """Complete the base sequence to ``target_n`` segments and score it."""

    base = [int(a) for a in config.base_sequence]
    if target_n < len(base):
        raise PreconditionError(f"target has {target_n} segments but the base sequence already has {len(base)}")
    rewards = rewards or _Rewards(nsd, grid, cache, config)
    actions = list(base)
    visited: list[Visit] = []
    for _ in range(len(base), target_n):
        state = aggregate_state(actions, config.m)
        action = select_action(q, state, epsilon, rng)
        visited.append((state, action))
        actions.append(action)
    EPISODES.inc()
    return EpisodeOutcome(rewards.sequence(actions), rewards(actions), tuple(visited))


def greedy_rollout(q: QTable, base: Sequence[int], target_n: int, m: int) -> tuple[int, ...]:
    """ε = 0 completion of ``base`` using only the Q-table."""

    actions = [int(a) for a in base]
    while len(actions) < target_n:
        actions.append(int(np.argmax(q.row(aggregate_state(actions, m)))))
    return tuple(actions)


@track_duration(TRAIN_SECONDS)
def train(
    config: TrainConfig,
    nsd: Nsd,
    target_time: float,
    cache: TransformCache,
    *,
    grid: FrequencyGrid | None = None,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Run ``config.n_episodes`` episodes and return the best sequence found.

    The returned sequence is the greedy rollout of the learned table, or the
    best episode when that scores strictly higher (unless ``greedy_only``).
    """

    grid = grid or FrequencyGrid()
    target_n = segments_for_time(target_time, config.delta_t)
    if len(config.base_sequence) > target_n:
        raise ConfigError(
            f"base sequence has {len(config.base_sequence)} segments, more than T={target_time} allows",
            field="base_sequence",
        )
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    rewards = _Rewards(nsd, grid, cache, config)
    q = QTable()
    log: list[EpisodeLog] = []
    epsilon = config.eps_start
    best_episode: EpisodeOutcome | None = None

    for episode in range(config.n_episodes):
        outcome = run_episode(config, q, nsd, target_n, cache, rng, grid=grid, epsilon=epsilon, rewards=rewards)
        monte_carlo_update(q, outcome.visited, outcome.reward, config.alpha)
        log.append(EpisodeLog(episode, epsilon, outcome.reward))
        if best_episode is None or outcome.reward > best_episode.reward:
            best_episode = outcome
        epsilon = max(config.eps_end, epsilon * config.eps_decay)

    greedy_actions = greedy_rollout(q, config.base_sequence, target_n, config.m)
    greedy_reward = rewards(greedy_actions)
    best_actions, best_reward, source = greedy_actions, greedy_reward, "greedy"
    if target_n == len(config.base_sequence):
        source = "base"
    elif not config.greedy_only and best_episode is not None and best_episode.reward > greedy_reward:
        best_actions, best_reward, source = best_episode.sequence.codes, best_episode.reward, "episode"

    logger.debug(
        "Trained T=%s: %s coherence=%.6f (%s, %d states)",
        target_time,
        rewards.sequence(best_actions).names,
        best_reward,
        source,
        len(q.states()),
    )
    return TrainResult(
        best_sequence=rewards.sequence(best_actions),
        best_reward=best_reward,
        q_table=q.snapshot(),
        episode_log=log,
        final_epsilon=epsilon,
        source=source,
    )


def train_ladder(
    config: TrainConfig,
    nsd: Nsd,
    max_time: float,
    cache: TransformCache,
    *,
    grid: FrequencyGrid | None = None,
) -> list[TrainResult]:
    """Train for T = Δt, 2Δt, …, ``max_time``, each step warm-started from the previous best.

    Step ``n`` draws from ``default_rng([seed, n])`` so every step is
    reproducible on its own.
    """

    grid = grid or FrequencyGrid()
    max_n = segments_for_time(max_time, config.delta_t)
    base = tuple(config.base_sequence)
    results: list[TrainResult] = []
    for n in range(max(1, len(base) + 1), max_n + 1):
        step_config = config.model_copy(update={"base_sequence": base})
        result = train(
            step_config,
            nsd,
            n * config.delta_t,
            cache,
            grid=grid,
            rng=np.random.default_rng([config.seed, n]),
        )
        results.append(result)
        base = result.best_sequence.codes
    return results
