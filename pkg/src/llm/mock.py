"""Deterministic stand-in for an LLM.

It reads the example sections back through the canonical grammar and copies the
action of the closest good example. Without good examples it picks a random
level that no bad example at the query state has already tried.
"""
import time

import numpy as np

from src.errors import MockLlmError, ParseError
from src.llm.base import CompletionResult, LlmClient, timed
from src.prompting import NUM_LEVELS, PromptBundle, parse_examples


def mock_decide(prompt: PromptBundle, seed: int) -> str:
    try:
        good, bad = parse_examples(prompt.text)
        target = float(prompt.state)
    except (ParseError, ValueError) as e:
        raise MockLlmError(f"Prompt for BS {prompt.bs} does not follow the example grammar: {e}") from e

    if good:
        best = min(good, key=lambda ex: (round(abs(ex.state - target), 9), -ex.reward, ex.level))
        return f"level {best.level}"

    excluded = {ex.level for ex in bad if ex.state == target}
    allowed = [level for level in range(1, NUM_LEVELS + 1) if level not in excluded]
    if not allowed:
        allowed = list(range(1, NUM_LEVELS + 1))
    rng = np.random.default_rng(seed)
    return f"level {allowed[int(rng.integers(len(allowed)))]}"


class MockLlm(LlmClient):
    name = "mock"

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.calls = 0

    def complete(self, prompt: PromptBundle, *, attempt: int = 1) -> CompletionResult:
        started = time.perf_counter()
        seed = int(self.rng.integers(2**32))
        self.calls += 1
        return CompletionResult(text=mock_decide(prompt, seed), latency_ms=timed(started), attempt=attempt)
