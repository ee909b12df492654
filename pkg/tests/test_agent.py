import numpy as np
import pytest
from pydantic import ValidationError

from ddforge.schemas import TrainConfig
from ddforge.services.agent import (
    QTable,
    aggregate_state,
    greedy_rollout,
    monte_carlo_update,
    run_episode,
    select_action,
    train,
    train_ladder,
)
from ddforge.services.coherence import coherence_value
from ddforge.services.sequences import DdSequence, sequence_from_codes
from ddforge.services.spectral import TransformCache
from ddforge.utils.errors import ConfigError, DomainError


def test_aggregate_state_pads_and_truncates():
    assert aggregate_state([], 2) == (-1, -1)
    assert aggregate_state([3], 2) == (-1, 3)
    assert aggregate_state([1, 2, 3], 2) == (2, 3)
    with pytest.raises(DomainError):
        aggregate_state([1], 0)


def test_select_action_is_greedy_at_zero_epsilon():
    q = QTable()
    state = (-1, -1)
    for action, value in enumerate((0.1, 0.9, 0.3, 0.3)):
        q.set(state, action, value)
    rng = np.random.default_rng(0)

    assert select_action(q, state, 0.0, rng) == 1
    assert select_action(QTable(), state, 0.0, rng) == 0


def test_select_action_explores_uniformly_at_full_epsilon():
    rng = np.random.default_rng(1)
    draws = [select_action(QTable(), (-1,), 1.0, rng) for _ in range(10_000)]
    frequencies = np.bincount(draws, minlength=4) / len(draws)

    sigma = np.sqrt(0.25 * 0.75 / len(draws))
    assert np.all(np.abs(frequencies - 0.25) < 3 * sigma)


def test_select_action_rejects_bad_epsilon():
    with pytest.raises(DomainError):
        select_action(QTable(), (-1,), 1.5, np.random.default_rng(0))


def test_monte_carlo_update_arithmetic():
    q = QTable()
    state = (-1, -1)

    monte_carlo_update(q, [(state, 2)], 0.5, 0.1)
    assert q.value(state, 2) == pytest.approx(0.05)

    q.set(state, 1, 0.5)
    monte_carlo_update(q, [(state, 1)], 0.5, 0.1)
    assert q.value(state, 1) == 0.5

    monte_carlo_update(q, [(state, 3)], 0.7, 1.0)
    assert q.value(state, 3) == 0.7


def test_monte_carlo_update_is_first_visit():
    q = QTable()
    state = (2, 2)

    monte_carlo_update(q, [(state, 2), (state, 2), (state, 2)], 1.0, 0.5)

    assert q.value(state, 2) == 0.5


def test_q_table_json_round_trip():
    q = QTable()
    q.set((-1, 2), 1, 0.25)
    q.set((3, 3), 0, 0.75)

    assert list(QTable.from_json(q.to_json()).items()) == list(q.items())


def test_single_segment_training_finds_best_kind(grid, cache, nsd):
    config = TrainConfig(n_episodes=60, seed=3)
    result = train(config, nsd, 4.0, cache, grid=grid)
    singles = [coherence_value(sequence_from_codes([code]), nsd, grid, cache) for code in range(4)]

    assert result.best_reward == max(singles)
    assert result.best_sequence.codes == (int(np.argmax(singles)),)


def test_base_sequence_of_full_length_is_returned(grid, cache, nsd):
    config = TrainConfig(n_episodes=5, base_sequence=(2, 1))
    result = train(config, nsd, 8.0, cache, grid=grid)

    assert result.best_sequence.codes == (2, 1)
    assert result.source == "base"
    assert result.best_reward == coherence_value(sequence_from_codes([2, 1]), nsd, grid, cache)


def test_warm_start_keeps_prefix(grid, cache, nsd):
    first = train(TrainConfig(n_episodes=40), nsd, 4.0, cache, grid=grid)
    second = train(
        TrainConfig(n_episodes=40, base_sequence=first.best_sequence.codes), nsd, 8.0, cache, grid=grid
    )

    assert second.best_sequence.codes[0] == first.best_sequence.codes[0]
    assert len(second.best_sequence) == 2


def test_training_rejects_bad_targets(grid, cache, nsd):
    with pytest.raises(ConfigError):
        train(TrainConfig(n_episodes=1), nsd, 6.0, cache, grid=grid)
    with pytest.raises(ConfigError):
        train(TrainConfig(n_episodes=1, base_sequence=(1, 1, 1)), nsd, 8.0, cache, grid=grid)


def test_training_is_deterministic_across_cache_states(grid, quadrature, nsd):
    config = TrainConfig(n_episodes=50, seed=9)
    warm = TransformCache(quadrature)
    train(TrainConfig(n_episodes=20, seed=1), nsd, 12.0, warm, grid=grid)

    first = train(config, nsd, 12.0, warm, grid=grid)
    second = train(config, nsd, 12.0, TransformCache(quadrature), grid=grid)

    assert first.best_sequence == second.best_sequence
    assert first.best_reward == second.best_reward
    assert list(first.q_table.items()) == list(second.q_table.items())


def test_q_values_and_state_count_stay_bounded(grid, cache, nsd):
    config = TrainConfig(n_episodes=80, m=2, seed=4)
    result = train(config, nsd, 16.0, cache, grid=grid)

    assert all(0.0 <= value <= 1.0 for _, value in result.q_table.items())
    assert len(result.q_table.states()) <= sum(4**j for j in range(config.m + 1))


def test_epsilon_is_floored(grid, cache, nsd):
    result = train(TrainConfig(n_episodes=400), nsd, 4.0, cache, grid=grid)

    assert result.final_epsilon == 0.05
    assert result.episodes == 400
    assert result.episode_log[0].epsilon == 1.0


def test_result_is_best_of_greedy_and_episodes(grid, cache, nsd):
    config = TrainConfig(n_episodes=30, seed=2)
    result = train(config, nsd, 8.0, cache, grid=grid)
    greedy = greedy_rollout(result.q_table, (), 2, config.m)
    greedy_reward = coherence_value(sequence_from_codes(greedy), nsd, grid, cache)

    assert result.best_reward >= greedy_reward
    assert result.best_reward >= max(entry.reward for entry in result.episode_log)


def test_greedy_only_skips_episode_fallback(grid, cache, nsd):
    config = TrainConfig(n_episodes=30, seed=2, greedy_only=True)
    result = train(config, nsd, 8.0, cache, grid=grid)

    assert result.source == "greedy"
    assert result.best_sequence.codes == greedy_rollout(result.q_table, (), 2, config.m)


def test_run_episode_completes_base(grid, cache, nsd):
    config = TrainConfig(base_sequence=(2,))
    outcome = run_episode(
        config, QTable(), nsd, 3, cache, np.random.default_rng(0), grid=grid, epsilon=1.0
    )

    assert outcome.sequence.codes[0] == 2
    assert len(outcome.sequence) == 3
    assert len(outcome.visited) == 2
    assert outcome.visited[0][0] == (-1, -1, 2)


def test_ladder_warm_starts_each_step(grid, cache, nsd):
    results = train_ladder(TrainConfig(n_episodes=30, seed=5), nsd, 8.0, cache, grid=grid)

    assert [r.target_time for r in results] == [4.0, 8.0]
    assert results[1].best_sequence.codes[:1] == results[0].best_sequence.codes


def test_ladder_beats_free_evolution(grid, cache, nsd):
    results = train_ladder(TrainConfig(n_episodes=40, seed=6), nsd, 12.0, cache, grid=grid)

    for result in results:
        fid = coherence_value(DdSequence.pure("FID", len(result.best_sequence)), nsd, grid, cache)
        assert result.best_reward >= fid


def test_train_record_fields(grid, cache, nsd):
    record = train(TrainConfig(n_episodes=10), nsd, 4.0, cache, grid=grid).to_record(7)

    assert record.env_id == 7
    assert record.T == 4.0
    assert len(record.actions) == 1
    assert record.episodes == 10


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(eps_start=0.05, eps_end=0.5)
    with pytest.raises(ValidationError):
        TrainConfig(base_sequence=(4,))
