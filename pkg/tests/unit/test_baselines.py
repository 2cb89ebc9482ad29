import itertools

import numpy as np
import pytest

from src.baselines import (
    ExhaustivePolicy,
    FeedbackMemory,
    FeedbackPolicy,
    QConfig,
    QLearningPolicy,
    QTable,
    RandomPolicy,
    discretize,
    exhaustive_best,
    feedback_decide,
    joint_levels,
    q_step,
)
from src.control import RewardConfig, RunStreams, StateProcess, Transition, compute_reward, run_episodes
from src.errors import ConfigError
from src.experience import Example
from src.llm import CompletionResult, LlmClient, LlmConfig, MockLlm
from src.netsim import Case, NetworkConfig, PowerDecision, evaluate, sample_state
from src.prompting import PromptBundle, PromptTemplate

CONFIG = NetworkConfig()
REWARD = RewardConfig()
DISCRETE = PromptTemplate.default(Case.DISCRETE)


class SpyLlm(LlmClient):
    name = "spy"

    def __init__(self, reply: str = "level 2") -> None:
        self.reply = reply
        self.prompts: list[PromptBundle] = []

    def complete(self, prompt: PromptBundle, *, attempt: int = 1) -> CompletionResult:
        self.prompts.append(prompt)
        return CompletionResult(text=self.reply, latency_ms=0.0, attempt=attempt)


def brute_force(state, config: NetworkConfig, reward_cfg: RewardConfig = RewardConfig()) -> PowerDecision:
    """Reverse-order enumeration with plain Python comparisons."""
    best = None
    for levels in reversed(list(itertools.product(range(1, config.num_levels + 1), repeat=config.num_bs))):
        report = evaluate(state, PowerDecision(levels), config)
        if report.all_ok:
            key = (0, round(report.total_power, 9), levels)
        else:
            summed = sum(compute_reward(report, bs, reward_cfg) for bs in range(config.num_bs))
            key = (1, -round(summed, 9), levels)
        if best is None or key <= best:
            best = key
    return PowerDecision(best[-1])


def test_joint_levels_are_lexicographic():
    levels = joint_levels(CONFIG)
    assert levels.shape == (64, 3)
    assert tuple(levels[0]) == (1, 1, 1) and tuple(levels[-1]) == (4, 4, 4)
    assert tuple(levels[1]) == (1, 1, 2)


def test_exhaustive_with_no_rate_floor_picks_lowest_levels():
    config = NetworkConfig(min_rate=0.0)
    decision, report = exhaustive_best(sample_state(config, np.random.default_rng(0)), config)
    assert decision == PowerDecision((1, 1, 1))
    assert report.all_ok


def test_exhaustive_when_nothing_is_feasible_maximises_reward():
    config = NetworkConfig(min_rate=1e12)
    state = sample_state(config, np.random.default_rng(1))
    decision, report = exhaustive_best(state, config, REWARD)
    assert not report.constraint_ok.any()
    # every BS misses, so the cheapest decision has the largest summed reward
    assert decision == PowerDecision((1, 1, 1))


@pytest.mark.parametrize("min_rate", [2.5e6, 1e9])
def test_exhaustive_agrees_with_reverse_enumeration(min_rate):
    config = NetworkConfig(min_rate=min_rate)
    rng = np.random.default_rng(17)
    feasible = 0
    for _ in range(100):
        state = sample_state(config, rng)
        decision, report = exhaustive_best(state, config)
        assert decision == brute_force(state, config)
        feasible += report.all_ok
    if min_rate == 1e9:
        assert feasible == 0
    else:
        assert feasible > 0


def test_exhaustive_is_optimal_among_feasible_decisions():
    config = NetworkConfig(min_rate=2.0e6)
    rng = np.random.default_rng(23)
    for _ in range(20):
        state = sample_state(config, rng)
        decision, report = exhaustive_best(state, config)
        if not report.all_ok:
            continue
        for levels in joint_levels(config):
            other = evaluate(state, PowerDecision(tuple(levels)), config)
            if other.all_ok:
                assert report.total_power <= other.total_power + 1e-12


def test_exhaustive_policy_plans_the_optimum():
    state = sample_state(CONFIG, np.random.default_rng(4))
    choices = ExhaustivePolicy(CONFIG, REWARD).plan(state, state.state_values())
    decision, _ = exhaustive_best(state, CONFIG, REWARD)
    assert tuple(c.level for c in choices) == decision.levels


def test_q_step_examples():
    table = QTable(alpha=0.5, gamma=0.9)
    q_step(table, s=5, a=2, r=1.0, s_next=5)
    assert table.row(5)[1] == pytest.approx(0.5)
    q_step(table, s=5, a=2, r=1.0, s_next=5)
    assert table.row(5)[1] == pytest.approx(0.5 + 0.5 * (1.0 + 0.9 * 0.5 - 0.5))
    q_step(table, s=6, a=4, r=-2.0, s_next=None)
    assert table.row(6)[3] == pytest.approx(-1.0)


def test_q_step_reaches_fixed_point():
    table = QTable(alpha=0.1, gamma=0.9)
    for _ in range(1000):
        q_step(table, s=7, a=1, r=0.75, s_next=7)
    assert table.row(7)[0] == pytest.approx(0.75 / (1 - 0.9), abs=1e-3)


def test_q_table_is_per_bs():
    table = QTable()
    q_step(table, s=7, a=3, r=1.0, s_next=None, bs=1)
    assert table.greedy(7, bs=1) == 3
    assert table.greedy(7, bs=0) == 1


def test_greedy_ties_go_to_lowest_level():
    table = QTable()
    table.row(3)[:] = [0.0, 0.5, 0.5, 0.1]
    assert table.greedy(3) == 2


@pytest.mark.parametrize(
    "state, case, width, expected",
    [(7, Case.DISCRETE, 1.0, 7), (12.34, Case.CONTINUOUS, 1.0, 12), (12.34, Case.CONTINUOUS, 2.5, 4)],
)
def test_discretize(state, case, width, expected):
    assert discretize(state, case, width) == expected


def test_q_config_validation():
    with pytest.raises(ConfigError) as excinfo:
        QConfig(alpha=2.0, gamma=1.0, bin_width=0.0)
    assert len(excinfo.value.messages) == 3


def test_q_learning_policy_learns_from_transitions():
    policy = QLearningPolicy(QConfig(epsilon=0.0), Case.DISCRETE, RunStreams.from_seed(0), episodes=1, steps=2)
    policy.begin_episode(0)
    policy.observe([Transition(bs=0, state=7, action=4, reward=0.5, constraint_ok=True, stamp=0, next_state=None)])
    assert policy.decide(0, 7).level == 4
    assert policy.decide(1, 7).level == 1


def test_q_learning_closed_loop_runs():
    policy = QLearningPolicy(QConfig(), Case.CONTINUOUS, RunStreams.from_seed(2), episodes=3, steps=4)
    process = StateProcess(CONFIG, Case.CONTINUOUS, np.random.default_rng(2))
    records = run_episodes(policy, process, CONFIG, REWARD, episodes=3, steps=4)
    assert len(records) == 3 * 4 * 3
    assert {r.policy for r in records} == {"qlearning"}
    assert policy.table.values


def test_feedback_prompt_carries_only_the_last_outcome():
    llm = SpyLlm()
    policy = FeedbackPolicy(llm, DISCRETE, LlmConfig(), RunStreams.from_seed(0))
    process = StateProcess(CONFIG, Case.DISCRETE, np.random.default_rng(0))
    run_episodes(policy, process, CONFIG, REWARD, episodes=2, steps=3)
    assert [p.example_count for p in llm.prompts[:3]] == [0, 0, 0]
    assert all(p.example_count == 1 for p in llm.prompts[3:])
    assert len(llm.prompts) == 2 * 3 * 3


def test_feedback_memory_keeps_latest_per_bs():
    memory = FeedbackMemory()
    for stamp, action in enumerate([1, 3]):
        memory.remember(Example(state=7, bs=2, action=action, reward=0.0, constraint_ok=True, stamp=stamp))
    assert memory.get(2).action == 3
    assert memory.get(0) is None


def test_feedback_falls_back_on_unparseable_replies():
    choice = feedback_decide(
        FeedbackMemory(), 7, 0, SpyLlm("no idea"), DISCRETE, LlmConfig(max_retries=1), np.random.default_rng(0)
    )
    assert choice.fallback
    assert 1 <= choice.level <= 4


def test_feedback_with_mock_llm_stays_in_range():
    streams = RunStreams.from_seed(6)
    policy = FeedbackPolicy(MockLlm(streams.llm), DISCRETE, LlmConfig(), streams)
    process = StateProcess(CONFIG, Case.DISCRETE, np.random.default_rng(6))
    records = run_episodes(policy, process, CONFIG, REWARD, episodes=2, steps=5)
    assert all(1 <= r.action <= 4 and not r.fallback for r in records)


def test_random_policy_is_uniform_and_flagged():
    policy = RandomPolicy(RunStreams.from_seed(1))
    levels = [policy.decide(0, 7) for _ in range(4000)]
    assert all(choice.explored for choice in levels)
    counts = np.bincount([choice.level for choice in levels], minlength=5)[1:]
    assert counts.min() > 850
