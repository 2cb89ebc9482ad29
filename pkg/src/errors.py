class PowerControlError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PowerControlError, ValueError):
    """Invalid configuration. Holds every problem found, not just the first."""

    def __init__(self, messages: str | list[str]) -> None:
        self.messages = [messages] if isinstance(messages, str) else list(messages)
        super().__init__("; ".join(self.messages))


class DomainError(PowerControlError, ValueError):
    """A physical-layer precondition does not hold."""


class AllocationError(PowerControlError, ValueError):
    """Resource blocks cannot be allocated (a cell without users)."""


class TemplateError(PowerControlError, ValueError):
    """Prompt template is missing a placeholder or repeats one."""


class ParseError(PowerControlError, ValueError):
    """Text does not follow the expected grammar."""


class LlmError(PowerControlError, RuntimeError):
    """Anything that stops an LLM call from producing a usable action."""


class LlmTransportError(LlmError):
    """Endpoint unreachable or the request timed out."""


class LlmStatusError(LlmError):
    def __init__(self, status_code: int, message: str) -> None:
        self.status_code = status_code
        super().__init__(f"HTTP {status_code}: {message}")


class LlmRetryExhausted(LlmError):
    def __init__(self, attempts: int, last_reply: str) -> None:
        self.attempts = attempts
        self.last_reply = last_reply
        super().__init__(f"No power level found after {attempts} attempts, last reply: {last_reply!r}")


class MockLlmError(LlmError):
    """Prompt handed to the mock does not follow the canonical grammar."""


class ExportError(PowerControlError, OSError):
    """Results could not be written."""
