import numpy as np
import pytest
from scipy import stats

from src.baselines import RandomPolicy, exhaustive_best
from src.control import (
    Choice,
    IclContext,
    IclPolicy,
    PerBsPolicy,
    PolicyConfig,
    RewardConfig,
    RunStreams,
    StateProcess,
    cap_examples,
    compute_reward,
    decide,
    run_episode,
    run_episodes,
)
from src.errors import ConfigError, LlmTransportError
from src.experience import Example, ExampleSet, ExperiencePool, SelectionConfig
from src.llm import CompletionResult, LlmClient, LlmConfig, MockLlm
from src.netsim import Case, EvalReport, NetworkConfig, PowerDecision, sample_state
from src.prompting import PromptBundle, PromptTemplate

CONFIG = NetworkConfig()
REWARD = RewardConfig()


class BrokenLlm(LlmClient):
    name = "broken"

    def complete(self, prompt: PromptBundle, *, attempt: int = 1) -> CompletionResult:
        raise LlmTransportError("Cannot reach http://llm.test")


def context(seed: int = 0, case: Case = Case.DISCRETE, llm: LlmClient | None = None, **overrides) -> IclContext:
    streams = RunStreams.from_seed(seed)
    return IclContext(
        case=case,
        template=PromptTemplate.default(case),
        selection=SelectionConfig(),
        llm=llm if llm is not None else MockLlm(streams.llm),
        llm_cfg=LlmConfig(),
        streams=streams,
        **overrides,
    )


def report(powers: list[float], ok: list[bool]) -> EvalReport:
    return EvalReport(
        decision=PowerDecision((1, 1, 1)),
        user_rates=(),
        mean_rates=np.zeros(len(powers)),
        bs_power=np.array(powers),
        constraint_ok=np.array(ok),
    )


def pool_with(*examples: tuple) -> ExperiencePool:
    pool = ExperiencePool()
    for stamp, (state, action, reward, ok) in enumerate(examples):
        pool.append(Example(state=state, bs=0, action=action, reward=reward, constraint_ok=ok, stamp=stamp))
    return pool


@pytest.mark.parametrize(
    "power, ok, expected",
    [(1.0, True, 0.0), (0.25, True, 0.75), (0.25, False, -1.25)],
)
def test_compute_reward(power, ok, expected):
    assert compute_reward(report([power, 0.5, 0.5], [ok, True, True]), 0, REWARD) == pytest.approx(expected)


def test_reward_config_rejects_negative_beta():
    with pytest.raises(ConfigError):
        RewardConfig(beta=-1.0)


def test_epsilon_schedule():
    cfg = PolicyConfig(epsilon=0.2, epsilon_decay=0.97, epsilon_min=0.01)
    assert cfg.epsilon_at(0) == pytest.approx(0.2)
    assert cfg.epsilon_at(10) == pytest.approx(0.2 * 0.97**10)
    assert cfg.epsilon_at(500) == pytest.approx(0.01)
    low = PolicyConfig(epsilon=0.005, epsilon_min=0.01)
    assert low.epsilon_at(0) == pytest.approx(0.005)
    assert PolicyConfig(epsilon=0.0).epsilon_at(3) == 0.0


def test_policy_config_reports_every_problem():
    with pytest.raises(ConfigError) as excinfo:
        PolicyConfig(epsilon=1.5, epsilon_decay=0.0, steps=0)
    assert len(excinfo.value.messages) == 3


def test_full_exploration_is_uniform():
    ctx = context(seed=3)
    pool = ExperiencePool()
    levels = [decide(7, 0, pool, ctx, epsilon=1.0).level for _ in range(10_000)]
    counts = np.bincount(levels, minlength=5)[1:]
    assert stats.chisquare(counts).pvalue > 0.01
    assert ctx.llm.calls == 0


def test_exploration_mixes_with_llm_choice():
    ctx = context(seed=4)
    pool = pool_with((7, 3, 0.25, True))
    choices = [decide(7, 0, pool, ctx, epsilon=0.3) for _ in range(10_000)]
    explored = np.mean([c.explored for c in choices])
    picked = np.mean([c.level == 3 for c in choices])
    assert explored == pytest.approx(0.3, abs=0.02)
    assert picked == pytest.approx(0.7 + 0.3 / 4, abs=0.02)


def test_greedy_choice_follows_best_example():
    pool = pool_with((7, 1, 0.75, True), (7, 4, -2.0, False), (9, 2, 0.5, True))
    choice = decide(7, 0, pool, context(), epsilon=0.0)
    assert choice == Choice(1)


def test_greedy_choice_with_empty_pool_is_reproducible():
    a, b = context(seed=11), context(seed=11)
    pool = ExperiencePool()
    assert [decide(9, 1, pool, a, 0.0).level for _ in range(50)] == [decide(9, 1, pool, b, 0.0).level for _ in range(50)]


def test_llm_failure_falls_back_to_random_level():
    choice = decide(7, 0, ExperiencePool(), context(llm=BrokenLlm()), epsilon=0.0)
    assert choice.fallback and not choice.explored
    assert 1 <= choice.level <= 4


def test_exploration_draws_are_shared_between_policies():
    icl = IclPolicy(context(seed=5), PolicyConfig(epsilon=1.0, epsilon_decay=1.0), num_bs=3)
    rand = RandomPolicy(RunStreams.from_seed(5))
    state = sample_state(CONFIG, np.random.default_rng(0))
    for _ in range(20):
        assert icl.plan(state, state.state_values()) == rand.plan(state, state.state_values())


def test_single_step_appends_one_example_per_bs():
    policy = IclPolicy(context(), PolicyConfig(), num_bs=3)
    state = sample_state(CONFIG, np.random.default_rng(1))
    records = run_episode(0, [state], policy, CONFIG, REWARD)
    assert len(records) == 3
    assert [len(policy.pools[bs]) for bs in range(3)] == [1, 1, 1]
    for record in records:
        [example] = policy.pools[record.bs].snapshot()
        assert (example.state, example.action, example.reward) == (record.state, record.action, record.reward)


def test_joint_decision_is_evaluated_once_per_step():
    policy = IclPolicy(context(), PolicyConfig(), num_bs=3)
    state = sample_state(CONFIG, np.random.default_rng(2))
    records = run_episode(0, [state], policy, CONFIG, REWARD)
    assert len({r.total_power for r in records}) == 1
    levels = tuple(r.action for r in sorted(records, key=lambda r: r.bs))
    assert records[0].total_power == pytest.approx(PowerDecision(levels).bs_power(CONFIG).sum())


@pytest.mark.parametrize("capacity, expected", [(10, 10), (None, 12), (10_000, 12)])
def test_pool_growth(capacity, expected):
    policy = IclPolicy(context(), PolicyConfig(), num_bs=3, capacity=capacity)
    process = StateProcess(CONFIG, Case.DISCRETE, np.random.default_rng(0))
    run_episodes(policy, process, CONFIG, REWARD, episodes=3, steps=4)
    assert [len(policy.pools[bs]) for bs in range(3)] == [expected] * 3

def seeded_states(config: NetworkConfig, steps: int, seed: int) -> tuple[list, dict[int, dict[int, int]]]:
    """Feasible states whose user counts never ask one BS for two different optimal levels."""
    rng = np.random.default_rng(seed)
    states, optimum = [], {bs: {} for bs in range(config.num_bs)}
    for _ in range(5000):
        state = sample_state(config, rng)
        decision, best = exhaustive_best(state, config)
        pairs = list(zip(state.state_values(), decision.levels))
        if not best.all_ok or any(optimum[bs].get(n, level) != level for bs, (n, level) in enumerate(pairs)):
            continue
        for bs, (n, level) in enumerate(pairs):
            optimum[bs][n] = level
        states.append(state)
        if len(states) == steps:
            break
    assert len(states) == steps
    return states, optimum


def test_seeded_pools_without_exploration_replay_the_optimum():
    config = NetworkConfig(min_rate=2.0e6)
    states, optimum = seeded_states(config, steps=12, seed=31)
    policy = IclPolicy(context(seed=31), PolicyConfig(epsilon=0.0, epsilon_min=0.0), num_bs=3)
    stamp = 0
    for bs, levels in optimum.items():
        for n, level in levels.items():
            for action in range(level, min(level + 1, 4) + 1):
                reward = REWARD.target_power - config.power_levels[action - 1]
                policy.pools[bs].append(
                    Example(state=n, bs=bs, action=action, reward=reward, constraint_ok=True, stamp=stamp)
                )
                stamp += 1
    records = run_episode(10, states, policy, config, REWARD)
    assert stamp <= 10 * 12
    assert len(records) == 12 * 3
    assert not any(r.explored or r.fallback for r in records)
    assert any(r.action > 1 for r in records)
    assert [r.action for r in records] == [optimum[r.bs][r.state] for r in records]
    assert all(r.constraint_ok for r in records)


def test_nopool_mode_never_stores():
    policy = IclPolicy(context(mode="none"), PolicyConfig(), num_bs=3)
    assert policy.tag == "icl_nopool"
    process = StateProcess(CONFIG, Case.DISCRETE, np.random.default_rng(0))
    run_episodes(policy, process, CONFIG, REWARD, episodes=2, steps=3)
    assert all(len(pool) == 0 for pool in policy.pools.values())


def test_rewards_are_bounded():
    policy = IclPolicy(context(seed=8), PolicyConfig(epsilon=0.5), num_bs=3)
    process = StateProcess(CONFIG, Case.CONTINUOUS, np.random.default_rng(8))
    records = run_episodes(policy, process, CONFIG, REWARD, episodes=4, steps=5)
    low = REWARD.target_power - CONFIG.power_levels[-1] - REWARD.beta
    high = REWARD.target_power - CONFIG.power_levels[0]
    assert all(low - 1e-12 <= r.reward <= high + 1e-12 for r in records)
    assert [r.episode for r in records] == sorted(r.episode for r in records)


def test_episode_transitions_end_terminal():
    class Recorder(PerBsPolicy):
        tag = "recorder"

        def __init__(self):
            self.seen = []

        def decide(self, bs, s_t):
            return Choice(2)

        def observe(self, transitions):
            self.seen.extend(transitions)

    policy = Recorder()
    states = StateProcess(CONFIG, Case.CONTINUOUS, np.random.default_rng(3)).episode_states(3)
    run_episode(4, states, policy, CONFIG, REWARD)
    assert [t.stamp for t in policy.seen] == [12] * 3 + [13] * 3 + [14] * 3
    assert all(t.next_state is None for t in policy.seen[-3:])
    assert [t.next_state for t in policy.seen[:3]] == states[1].state_values()


def test_discrete_states_hold_for_the_episode():
    states = StateProcess(CONFIG, Case.DISCRETE, np.random.default_rng(0)).episode_states(5)
    assert all(s is states[0] for s in states)
    assert all(isinstance(v, int) for v in states[0].state_values())


def test_continuous_states_move_users_but_keep_counts():
    states = StateProcess(CONFIG, Case.CONTINUOUS, np.random.default_rng(0)).episode_states(5)
    assert len({s.user_counts for s in states}) == 1
    assert len({tuple(s.state_values()) for s in states}) == 5


def test_state_process_respects_user_range():
    process = StateProcess(CONFIG, Case.DISCRETE, np.random.default_rng(2), user_range=(5, 30))
    counts = [n for _ in range(200) for n in process.episode_states(1)[0].user_counts]
    assert min(counts) >= 5 and max(counts) <= 30 and max(counts) > 15


def test_cap_examples_prefers_recommended():
    good = tuple(Example(state=7, bs=0, action=1, reward=0.75, constraint_ok=True, stamp=i) for i in range(3))
    bad = tuple(Example(state=7, bs=0, action=4, reward=-2.0, constraint_ok=False, stamp=10 + i) for i in range(2))
    examples = ExampleSet(recommended=good, inadvisable=bad)
    assert cap_examples(examples, None) == examples
    assert cap_examples(examples, 4) == ExampleSet(recommended=good, inadvisable=bad[:1])
    assert cap_examples(examples, 2) == ExampleSet(recommended=good[:2])
    assert len(cap_examples(examples, 0)) == 0
