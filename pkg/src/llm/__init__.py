import numpy as np

from src.llm.base import CompletionResult, LlmClient, LlmConfig, chat_complete, complete_with_retries
from src.llm.mock import MockLlm, mock_decide
from src.llm.transcripts import ReplayLlm, TranscriptRecorder


def make_llm(
    cfg: LlmConfig, rng: np.random.Generator, recorder: TranscriptRecorder | None = None
) -> LlmClient:
    """Build the client named by `cfg.provider`."""
    match cfg.provider:
        case "mock":
            return MockLlm(rng)
        case "replay":
            return ReplayLlm(cfg.replay_path)  # type: ignore[arg-type]
        case "openai":
            from src.llm.client import OpenAiChatClient

            if recorder is None and cfg.record_path:
                recorder = TranscriptRecorder(cfg.record_path)
            return OpenAiChatClient(cfg, recorder=recorder)
        case _:
            raise ValueError(f"Unknown provider: {cfg.provider}")


__all__ = [
    "CompletionResult",
    "LlmClient",
    "LlmConfig",
    "MockLlm",
    "ReplayLlm",
    "TranscriptRecorder",
    "chat_complete",
    "complete_with_retries",
    "make_llm",
    "mock_decide",
]
