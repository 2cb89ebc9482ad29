"""The closed decision loop.

Each step: observe the state, pick examples from the BS's pool, build the
prompt, let the LLM choose (wrapped in epsilon-greedy), evaluate the joint
decision once, reward every BS and append the outcome to its pool.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal, TypeAlias

import numpy as np

from src.errors import ConfigError, LlmError
from src.experience import (
    DEFAULT_CAPACITY,
    Example,
    ExampleSet,
    ExperiencePool,
    SelectionConfig,
    rank_continuous,
    select_discrete,
    select_random,
)
from src.llm.base import LlmClient, LlmConfig, complete_with_retries
from src.netsim import (
    Case,
    EvalReport,
    NetworkConfig,
    NetworkState,
    PowerDecision,
    StateValue,
    evaluate,
    sample_state,
    sample_user_counts,
)
from src.prompting import NUM_LEVELS, PromptTemplate, build_prompt, render_state

logger = logging.getLogger(__name__)

SelectionMode: TypeAlias = Literal["ranked", "random", "none"]
SELECTION_TAGS: dict[str, str] = {"ranked": "icl", "random": "icl_random_examples", "none": "icl_nopool"}


@dataclass(frozen=True)
class RewardConfig:
    target_power: float = 1.0  # W
    beta: float = 2.0

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class PolicyConfig:
    epsilon: float = 0.2
    epsilon_decay: float = 0.97  # per episode
    epsilon_min: float = 0.01
    episodes: int = 200
    steps: int = 20
    max_examples: int | None = None  # total prompt examples after selection

    def __post_init__(self) -> None:
        errors = []
        if not 0 <= self.epsilon <= 1:
            errors.append(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0 < self.epsilon_decay <= 1:
            errors.append(f"epsilon_decay must lie in (0, 1], got {self.epsilon_decay}")
        if not 0 <= self.epsilon_min <= 1:
            errors.append(f"epsilon_min must lie in [0, 1], got {self.epsilon_min}")
        if self.episodes < 1 or self.steps < 1:
            errors.append(f"episodes and steps must be >= 1, got ({self.episodes}, {self.steps})")
        if self.max_examples is not None and self.max_examples < 0:
            errors.append(f"max_examples must be >= 0 or None, got {self.max_examples}")
        if errors:
            raise ConfigError(errors)

    def epsilon_at(self, episode: int) -> float:
        """Decayed epsilon; the floor never lifts an epsilon that started below it."""
        return max(min(self.epsilon_min, self.epsilon), self.epsilon * self.epsilon_decay**episode)


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    step: int
    bs: int
    state: StateValue
    action: int
    reward: float
    total_power: float  # W, all BSs
    mean_rate: float  # bit/s, this BS
    constraint_ok: bool
    policy: str
    fallback: bool = False
    explored: bool = False


@dataclass(frozen=True)
class Choice:
    level: int
    explored: bool = False
    fallback: bool = False


@dataclass(frozen=True)
class Transition:
    bs: int
    state: StateValue
    action: int
    reward: float
    constraint_ok: bool
    stamp: int
    next_state: StateValue | None


@dataclass
class RunStreams:
    """Independent generators for one seed, so policies share states and exploration draws."""

    state: np.random.Generator
    explore: np.random.Generator
    llm: np.random.Generator
    selection: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RunStreams":
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.default_rng(child) for child in children))

    def exploration_draw(self, num_levels: int) -> tuple[float, int]:
        """One uniform for the epsilon test and one candidate random level, always both."""
        return float(self.explore.random()), int(self.explore.integers(1, num_levels + 1))


class StateProcess:
    """Case I keeps the state for a whole episode; Case II moves users every step."""

    def __init__(
        self,
        config: NetworkConfig,
        case: Case,
        rng: np.random.Generator,
        user_range: tuple[int, int] = (5, 15),
    ) -> None:
        self.config = config
        self.case = case
        self.rng = rng
        self.user_range = user_range

    def episode_states(self, steps: int) -> list[NetworkState]:
        counts = sample_user_counts(self.rng, self.config.num_bs, *self.user_range)
        match self.case:
            case Case.DISCRETE:
                return [sample_state(self.config, self.rng, self.case, counts)] * steps
            case Case.CONTINUOUS:
                return [sample_state(self.config, self.rng, self.case, counts) for _ in range(steps)]
            case _:
                raise ValueError(f"Unknown case: {self.case}")


def compute_reward(report: EvalReport, bs: int, cfg: RewardConfig) -> float:
    """r = P_target - P_b, minus beta when the BS misses its rate constraint."""
    reward = cfg.target_power - float(report.bs_power[bs])
    if not report.constraint_ok[bs]:
        reward -= cfg.beta
    return reward


def cap_examples(examples: ExampleSet, max_examples: int | None) -> ExampleSet:
    """Trim to a total budget, giving recommended examples priority."""
    if max_examples is None or len(examples) <= max_examples:
        return examples
    recommended = examples.recommended[:max_examples]
    return ExampleSet(
        recommended=recommended,
        inadvisable=examples.inadvisable[: max_examples - len(recommended)],
    )


@dataclass
class IclContext:
    case: Case
    template: PromptTemplate
    selection: SelectionConfig
    llm: LlmClient
    llm_cfg: LlmConfig
    streams: RunStreams
    mode: SelectionMode = "ranked"
    max_examples: int | None = None


def select_examples(pool: ExperiencePool, s_t: StateValue, ctx: IclContext) -> ExampleSet:
    match ctx.mode:
        case "none":
            examples = ExampleSet()
        case "random":
            examples = select_random(pool, ctx.selection, ctx.streams.selection)
        case "ranked" if ctx.case == Case.DISCRETE:
            examples = select_discrete(pool, s_t, ctx.selection)
        case "ranked":
            examples = rank_continuous(pool, s_t, ctx.selection)
        case _:
            raise ValueError(f"Unknown selection mode: {ctx.mode}")
    return cap_examples(examples, ctx.max_examples)


def decide(s_t: StateValue, bs: int, pool: ExperiencePool, ctx: IclContext, epsilon: float) -> Choice:
    """Epsilon-greedy wrapper around the LLM decision.

    Args:
        s_t: Current state of this BS
        bs: BS being decided for
        pool: That BS's experience pool
        ctx: Template, selection, LLM and random streams
        epsilon: Probability of a uniform-random level

    Returns:
        The chosen level, flagged when it came from exploration or from a failed LLM call
    """
    u, random_level = ctx.streams.exploration_draw(NUM_LEVELS)
    if u < epsilon:
        return Choice(random_level, explored=True)
    examples = select_examples(pool, s_t, ctx)
    prompt = build_prompt(ctx.template, examples, render_state(s_t, ctx.case), bs)
    try:
        parsed, _ = complete_with_retries(ctx.llm, prompt, ctx.llm_cfg)
    except LlmError as e:
        logger.warning("LLM decision for BS %d failed (%s), falling back to level %d", bs, e, random_level)
        return Choice(random_level, fallback=True)
    return Choice(parsed.level)


class Policy(ABC):
    """Chooses the joint power decision for one step and learns from its outcome."""

    tag: str

    def begin_episode(self, episode: int) -> None:
        pass

    @abstractmethod
    def plan(self, state: NetworkState, values: list[StateValue]) -> list[Choice]:
        """One choice per BS for the current step."""

    def observe(self, transitions: list[Transition]) -> None:
        pass


class PerBsPolicy(Policy):
    """BSs decide one after another, each from its own state only."""

    def plan(self, state: NetworkState, values: list[StateValue]) -> list[Choice]:
        return [self.decide(bs, value) for bs, value in enumerate(values)]

    @abstractmethod
    def decide(self, bs: int, s_t: StateValue) -> Choice:
        pass


class IclPolicy(PerBsPolicy):
    def __init__(
        self,
        ctx: IclContext,
        policy_cfg: PolicyConfig,
        num_bs: int,
        capacity: int | None = DEFAULT_CAPACITY,
        tag: str | None = None,
    ) -> None:
        self.ctx = ctx
        self.policy_cfg = policy_cfg
        self.tag = tag or SELECTION_TAGS[ctx.mode]
        self.pools = {bs: ExperiencePool(capacity) for bs in range(num_bs)}
        self.epsilon = policy_cfg.epsilon_at(0)

    def begin_episode(self, episode: int) -> None:
        self.epsilon = self.policy_cfg.epsilon_at(episode)

    def decide(self, bs: int, s_t: StateValue) -> Choice:
        return decide(s_t, bs, self.pools[bs], self.ctx, self.epsilon)

    def observe(self, transitions: list[Transition]) -> None:
        if self.ctx.mode == "none":
            return
        for t in transitions:
            self.pools[t.bs].append(
                Example(
                    state=t.state,
                    bs=t.bs,
                    action=t.action,
                    reward=t.reward,
                    constraint_ok=t.constraint_ok,
                    stamp=t.stamp,
                )
            )


def run_episode(
    episode: int,
    states: list[NetworkState],
    policy: Policy,
    config: NetworkConfig,
    reward_cfg: RewardConfig,
) -> list[EpisodeRecord]:
    """Play one episode over pre-sampled states.

    Every BS decides before the joint decision is evaluated once per step.
    """
    records = []
    steps = len(states)
    for step, state in enumerate(states):
        values = state.state_values()
        choices = policy.plan(state, values)
        decision = PowerDecision(tuple(choice.level for choice in choices))
        report = evaluate(state, decision, config)
        next_values = states[step + 1].state_values() if step + 1 < steps else None
        transitions = []
        for bs, (value, choice) in enumerate(zip(values, choices)):
            reward = compute_reward(report, bs, reward_cfg)
            ok = bool(report.constraint_ok[bs])
            transitions.append(
                Transition(
                    bs=bs,
                    state=value,
                    action=choice.level,
                    reward=reward,
                    constraint_ok=ok,
                    stamp=episode * steps + step,
                    next_state=next_values[bs] if next_values is not None else None,
                )
            )
            records.append(
                EpisodeRecord(
                    episode=episode,
                    step=step,
                    bs=bs,
                    state=value,
                    action=choice.level,
                    reward=reward,
                    total_power=report.total_power,
                    mean_rate=float(report.mean_rates[bs]),
                    constraint_ok=ok,
                    policy=policy.tag,
                    fallback=choice.fallback,
                    explored=choice.explored,
                )
            )
        policy.observe(transitions)
    return records


def run_episodes(
    policy: Policy,
    process: StateProcess,
    config: NetworkConfig,
    reward_cfg: RewardConfig,
    episodes: int,
    steps: int,
) -> list[EpisodeRecord]:
    records: list[EpisodeRecord] = []
    for episode in range(episodes):
        policy.begin_episode(episode)
        records.extend(run_episode(episode, process.episode_states(steps), policy, config, reward_cfg))
        logger.debug("%s finished episode %d", policy.tag, episode)
    return records
