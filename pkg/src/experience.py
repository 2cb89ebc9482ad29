"""Experience pool of (state, action, reward) examples and example selection.

Selection never sorts the pool itself: every method walks the pool once
through `ExperiencePool.scan` and keeps the best k with a heap.
"""
import heapq
import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Iterator, TypeAlias

import numpy as np

from src.errors import ConfigError, ParseError

logger = logging.getLogger(__name__)

State: TypeAlias = int | float | tuple[float, ...]
Scored: TypeAlias = tuple[float, "Example"]

DEFAULT_CAPACITY = 10_000
MAX_LEVEL = 4


@dataclass(frozen=True)
class Example:
    state: State
    bs: int
    action: int  # power level, 1-based
    reward: float
    constraint_ok: bool
    stamp: int

    def __post_init__(self) -> None:
        if not 1 <= self.action <= MAX_LEVEL:
            raise ValueError(f"Power level must be in 1..{MAX_LEVEL}, got {self.action}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Example":
        try:
            data: dict[str, Any] = json.loads(line)
            state = data["state"]
            return cls(
                state=tuple(state) if isinstance(state, list) else state,
                bs=int(data["bs"]),
                action=int(data["action"]),
                reward=float(data["reward"]),
                constraint_ok=bool(data["constraint_ok"]),
                stamp=int(data["stamp"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"Invalid example record: {line!r}") from e


@dataclass(frozen=True)
class SelectionConfig:
    tau: float = 0.5  # reward traded per metre of state distance
    k_recommended: int = 4
    k_inadvisable: int = 2

    def __post_init__(self) -> None:
        errors = []
        if self.tau < 0:
            errors.append(f"tau must be >= 0, got {self.tau}")
        if self.k_recommended < 0 or self.k_inadvisable < 0:
            errors.append(
                f"example caps must be >= 0, got ({self.k_recommended}, {self.k_inadvisable})"
            )
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class ExampleSet:
    recommended: tuple[Example, ...] = ()
    inadvisable: tuple[Example, ...] = ()

    def __len__(self) -> int:
        return len(self.recommended) + len(self.inadvisable)


class ExperiencePool:
    """Append-only store of examples, optionally bounded (oldest evicted first)."""

    def __init__(self, capacity: int | None = DEFAULT_CAPACITY) -> None:
        if capacity is not None and capacity < 1:
            raise ConfigError(f"capacity must be >= 1 or None, got {capacity}")
        self.capacity = capacity
        self.touches = 0
        self._examples: deque[Example] = deque(maxlen=capacity)
        self._last_stamp: int | None = None

    def __len__(self) -> int:
        return len(self._examples)

    def append(self, example: Example) -> "ExperiencePool":
        if self._last_stamp is not None and example.stamp <= self._last_stamp:
            raise ValueError(
                f"Example stamp {example.stamp} does not follow last stamp {self._last_stamp}"
            )
        self._examples.append(example)
        self._last_stamp = example.stamp
        return self

    def snapshot(self) -> tuple[Example, ...]:
        return tuple(self._examples)

    def scan(self) -> Iterator[Example]:
        """Iterate the pool in insertion order, counting every element visited."""
        for example in self._examples:
            self.touches += 1
            yield example

    def save_ndjson(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for example in self._examples:
                f.write(example.to_json() + "\n")
        logger.debug("Wrote %d examples to %s", len(self), path)

    @classmethod
    def load_ndjson(cls, path: str | Path, capacity: int | None = DEFAULT_CAPACITY) -> "ExperiencePool":
        pool = cls(capacity)
        with Path(path).open(encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    pool.append(Example.from_json(line))
        return pool


def state_distance(a: State, b: State) -> float:
    """||a - b||: absolute difference for scalars, Euclidean for fixed-length vectors."""
    if isinstance(a, tuple) or isinstance(b, tuple):
        return math.dist(a, b)  # type: ignore[arg-type]
    return abs(a - b)


def _split(
    candidates: list[Scored],
    cfg: SelectionConfig,
    inadvisable_key: Callable[[Scored], tuple],
) -> ExampleSet:
    """Top-k by score among met examples, then bottom-k of the rest.

    Constraint-violating examples are only ever inadvisable.
    """
    met = [c for c in candidates if c[1].constraint_ok]
    recommended = heapq.nsmallest(cfg.k_recommended, met, key=lambda c: (-c[0], -c[1].stamp))
    taken = {ex.stamp for _, ex in recommended}
    rest = [c for c in candidates if c[1].stamp not in taken]
    inadvisable = heapq.nsmallest(cfg.k_inadvisable, rest, key=inadvisable_key)
    return ExampleSet(
        recommended=tuple(ex for _, ex in recommended),
        inadvisable=tuple(ex for _, ex in inadvisable),
    )


def _violations_first(c: Scored) -> tuple:
    return (c[1].constraint_ok, c[0], -c[1].stamp)


def _lowest_score(c: Scored) -> tuple:
    return (c[0], -c[1].stamp)


def select_discrete(pool: ExperiencePool, s_target: State, cfg: SelectionConfig) -> ExampleSet:
    """State-based selection: only examples whose state equals s_target are relevant."""
    relevant = [(ex.reward, ex) for ex in pool.scan() if ex.state == s_target]
    return _split(relevant, cfg, _violations_first)


def rank_continuous(pool: ExperiencePool, s_target: State, cfg: SelectionConfig) -> ExampleSet:
    """Ranking-based selection by L(E, s_target) = r - tau * ||s - s_target||."""
    scored = [(ranking_metric(ex, s_target, cfg.tau), ex) for ex in pool.scan()]
    return _split(scored, cfg, _lowest_score)


def ranking_metric(example: Example, s_target: State, tau: float) -> float:
    return example.reward - tau * state_distance(example.state, s_target)


def select_random(pool: ExperiencePool, cfg: SelectionConfig, rng: np.random.Generator) -> ExampleSet:
    """Uniformly drawn examples, split by the same recommended/inadvisable rules."""
    examples = list(pool.scan())
    size = min(len(examples), cfg.k_recommended + cfg.k_inadvisable)
    if size == 0:
        return ExampleSet()
    picked = sorted(rng.choice(len(examples), size=size, replace=False))
    return _split([(examples[i].reward, examples[i]) for i in picked], cfg, _violations_first)
