"""Reference policies: exhaustive search, tabular Q-learning, feedback-only and random."""
import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from src.control import (
    Choice,
    PerBsPolicy,
    Policy,
    PolicyConfig,
    RewardConfig,
    RunStreams,
    Transition,
)
from src.errors import ConfigError, LlmError
from src.experience import Example
from src.llm.base import LlmClient, LlmConfig, complete_with_retries
from src.netsim import (
    Case,
    EvalReport,
    NetworkConfig,
    NetworkState,
    PowerDecision,
    StateValue,
    evaluate,
    evaluate_many,
)
from src.prompting import NUM_LEVELS, PromptTemplate, build_feedback_prompt, render_state

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12


def joint_levels(config: NetworkConfig) -> np.ndarray:
    """Every joint decision, lexicographically ordered, as an (L^B, B) array."""
    levels = range(1, config.num_levels + 1)
    return np.array(list(itertools.product(levels, repeat=config.num_bs)), dtype=int)


def exhaustive_best(
    state: NetworkState, config: NetworkConfig, reward_cfg: RewardConfig = RewardConfig()
) -> tuple[PowerDecision, EvalReport]:
    """Search all joint decisions.

    The cheapest decision that satisfies every BS wins. When none does, the one
    with the largest summed reward wins. Ties go to the lexicographically
    smallest level tuple.
    """
    candidates = joint_levels(config)
    _, mean_rates, bs_power = evaluate_many(state, candidates, config)
    ok = mean_rates >= config.min_rate
    feasible = ok.all(axis=1)
    if feasible.any():
        total = bs_power.sum(axis=1)
        best = total[feasible].min()
        index = int(np.flatnonzero(feasible & (total <= best + TIE_TOLERANCE))[0])
    else:
        summed = (reward_cfg.target_power - bs_power - reward_cfg.beta * ~ok).sum(axis=1)
        index = int(np.flatnonzero(summed >= summed.max() - TIE_TOLERANCE)[0])
        logger.debug("No feasible decision for user counts %s", state.user_counts)
    decision = PowerDecision(tuple(int(level) for level in candidates[index]))
    return decision, evaluate(state, decision, config)


class ExhaustivePolicy(Policy):
    tag = "exhaustive"

    def __init__(self, config: NetworkConfig, reward_cfg: RewardConfig) -> None:
        self.config = config
        self.reward_cfg = reward_cfg

    def plan(self, state: NetworkState, values: list[StateValue]) -> list[Choice]:
        decision, _ = exhaustive_best(state, self.config, self.reward_cfg)
        return [Choice(level) for level in decision.levels]


@dataclass(frozen=True)
class QConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    epsilon_decay: float = 0.97
    epsilon_min: float = 0.01
    bin_width: float = 1.0  # m, Case II state bins

    def __post_init__(self) -> None:
        errors = []
        if not 0 <= self.alpha <= 1:
            errors.append(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            errors.append(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.epsilon <= 1:
            errors.append(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.bin_width <= 0:
            errors.append(f"bin_width must be > 0, got {self.bin_width}")
        if errors:
            raise ConfigError(errors)

    def schedule(self, episodes: int, steps: int) -> PolicyConfig:
        return PolicyConfig(
            epsilon=self.epsilon,
            epsilon_decay=self.epsilon_decay,
            epsilon_min=self.epsilon_min,
            episodes=episodes,
            steps=steps,
        )


@dataclass
class QTable:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    num_levels: int = NUM_LEVELS
    values: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def row(self, s: int, bs: int = 0) -> np.ndarray:
        key = (s, bs)
        if key not in self.values:
            self.values[key] = np.zeros(self.num_levels)
        return self.values[key]

    def greedy(self, s: int, bs: int = 0) -> int:
        """Best level, lowest level on ties."""
        return int(np.argmax(self.row(s, bs))) + 1


def discretize(state: StateValue, case: Case, bin_width: float = 1.0) -> int:
    match case:
        case Case.DISCRETE:
            return int(state)
        case Case.CONTINUOUS:
            return int(math.floor(state / bin_width))
        case _:
            raise ValueError(f"Unknown case: {case}")


def q_step(table: QTable, s: int, a: int, r: float, s_next: int | None, bs: int = 0) -> QTable:
    """Q(s,a) <- Q(s,a) + alpha * (r + gamma * max Q(s_next, .) - Q(s,a)); no successor means terminal."""
    row = table.row(s, bs)
    target = r if s_next is None else r + table.gamma * float(table.row(s_next, bs).max())
    row[a - 1] += table.alpha * (target - row[a - 1])
    return table


class QLearningPolicy(PerBsPolicy):
    tag = "qlearning"

    def __init__(self, q_cfg: QConfig, case: Case, streams: RunStreams, episodes: int, steps: int) -> None:
        self.q_cfg = q_cfg
        self.case = case
        self.streams = streams
        self.schedule = q_cfg.schedule(episodes, steps)
        self.table = QTable(alpha=q_cfg.alpha, gamma=q_cfg.gamma, epsilon=q_cfg.epsilon)

    def begin_episode(self, episode: int) -> None:
        self.table.epsilon = self.schedule.epsilon_at(episode)

    def key(self, s_t: StateValue) -> int:
        return discretize(s_t, self.case, self.q_cfg.bin_width)

    def decide(self, bs: int, s_t: StateValue) -> Choice:
        u, random_level = self.streams.exploration_draw(self.table.num_levels)
        if u < self.table.epsilon:
            return Choice(random_level, explored=True)
        return Choice(self.table.greedy(self.key(s_t), bs))

    def observe(self, transitions: list[Transition]) -> None:
        for t in transitions:
            s_next = None if t.next_state is None else self.key(t.next_state)
            q_step(self.table, self.key(t.state), t.action, t.reward, s_next, bs=t.bs)


@dataclass
class FeedbackMemory:
    """Only the last outcome per BS."""

    last: dict[int, Example] = field(default_factory=dict)

    def remember(self, example: Example) -> None:
        self.last[example.bs] = example

    def get(self, bs: int) -> Example | None:
        return self.last.get(bs)


def feedback_decide(
    mem: FeedbackMemory,
    s_t: StateValue,
    bs: int,
    llm: LlmClient,
    tpl: PromptTemplate,
    llm_cfg: LlmConfig,
    fallback_rng: np.random.Generator,
) -> Choice:
    """Ask the LLM with the previous outcome as the only feedback; no exploration."""
    prompt = build_feedback_prompt(tpl, mem.get(bs), render_state(s_t, tpl.case), bs)
    try:
        parsed, _ = complete_with_retries(llm, prompt, llm_cfg)
    except LlmError as e:
        level = int(fallback_rng.integers(1, NUM_LEVELS + 1))
        logger.warning("Feedback decision for BS %d failed (%s), falling back to level %d", bs, e, level)
        return Choice(level, fallback=True)
    return Choice(parsed.level)


class FeedbackPolicy(PerBsPolicy):
    tag = "feedback"

    def __init__(self, llm: LlmClient, tpl: PromptTemplate, llm_cfg: LlmConfig, streams: RunStreams) -> None:
        self.llm = llm
        self.tpl = tpl
        self.llm_cfg = llm_cfg
        self.streams = streams
        self.memory = FeedbackMemory()

    def decide(self, bs: int, s_t: StateValue) -> Choice:
        return feedback_decide(self.memory, s_t, bs, self.llm, self.tpl, self.llm_cfg, self.streams.explore)

    def observe(self, transitions: list[Transition]) -> None:
        for t in transitions:
            self.memory.remember(
                Example(
                    state=t.state,
                    bs=t.bs,
                    action=t.action,
                    reward=t.reward,
                    constraint_ok=t.constraint_ok,
                    stamp=t.stamp,
                )
            )


class RandomPolicy(PerBsPolicy):
    tag = "random"

    def __init__(self, streams: RunStreams, num_levels: int = NUM_LEVELS) -> None:
        self.streams = streams
        self.num_levels = num_levels

    def decide(self, bs: int, s_t: StateValue) -> Choice:
        _, level = self.streams.exploration_draw(self.num_levels)
        return Choice(level, explored=True)
