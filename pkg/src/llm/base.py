import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal

from src.errors import ConfigError, LlmRetryExhausted, ParseError
from src.prompting import ParsedAction, PromptBundle, parse_action

logger = logging.getLogger(__name__)

Provider = Literal["mock", "openai", "replay"]
PROVIDERS: tuple[str, ...] = ("mock", "openai", "replay")


@dataclass(frozen=True)
class LlmConfig:
    provider: Provider = "mock"
    endpoint: str = "https://api.openai.com"
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_tokens: int = 64
    timeout_s: float = 30.0
    max_retries: int = 2  # parse retries after the first attempt
    api_key_env: str = "OPENAI_API_KEY"
    replay_path: str | None = None
    record_path: str | None = None

    def __post_init__(self) -> None:
        errors = []
        if self.provider not in PROVIDERS:
            errors.append(f"provider must be one of {PROVIDERS}, got {self.provider!r}")
        if self.temperature < 0:
            errors.append(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            errors.append(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.timeout_s <= 0:
            errors.append(f"timeout_s must be > 0, got {self.timeout_s}")
        if self.max_retries < 0:
            errors.append(f"max_retries must be >= 0, got {self.max_retries}")
        if self.provider == "replay" and not self.replay_path:
            errors.append("replay provider needs replay_path")
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    latency_ms: float
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    attempt: int = 1


class LlmClient(ABC):
    """Base class for everything that turns a prompt into a reply."""

    name: str

    @abstractmethod
    def complete(self, prompt: PromptBundle, *, attempt: int = 1) -> CompletionResult:
        """
        Send one prompt and return the raw reply.

        Args:
            prompt: Prompt to send
            attempt: 1-based attempt index within the current decision

        Returns:
            Reply text plus latency and token usage

        Raises:
            LlmError: If no reply could be produced
        """


def timed(started: float) -> float:
    return max(0.0, (time.perf_counter() - started) * 1000)


def chat_complete(client: LlmClient, prompt: PromptBundle, cfg: LlmConfig) -> CompletionResult:
    """Single chat completion, no parsing."""
    logger.debug("Prompt for BS %d, %d examples, %d chars", prompt.bs, prompt.example_count, len(prompt.text))
    return client.complete(prompt, attempt=1)


def complete_with_retries(
    client: LlmClient, prompt: PromptBundle, cfg: LlmConfig
) -> tuple[ParsedAction, CompletionResult]:
    """Ask until the reply names a power level or the retry budget runs out.

    Retries send the same prompt with the clarification line appended.

    Raises:
        LlmRetryExhausted: If 1 + max_retries replies could not be parsed
        LlmError: Transport and status errors are not retried
    """
    result = chat_complete(client, prompt, cfg)
    for attempt in range(1, cfg.max_retries + 2):
        if attempt > 1:
            result = client.complete(prompt.with_clarification(), attempt=attempt)
        try:
            return parse_action(result.text), result
        except ParseError:
            logger.debug("Unparseable reply on attempt %d: %r", attempt, result.text)
    raise LlmRetryExhausted(cfg.max_retries + 1, result.text)
