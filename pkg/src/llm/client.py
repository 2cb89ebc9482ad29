import logging
import os
import time

import httpx
import openai
from dotenv import load_dotenv
from openai import OpenAI
from openai.types.chat import ChatCompletion

from src.errors import LlmError, LlmStatusError, LlmTransportError
from src.llm.base import CompletionResult, LlmClient, LlmConfig, timed
from src.llm.transcripts import TranscriptRecorder
from src.prompting import PromptBundle

load_dotenv()

logger = logging.getLogger(__name__)


class OpenAiChatClient(LlmClient):
    """Client for any endpoint speaking the OpenAI chat-completions protocol."""

    name = "openai"

    def __init__(
        self,
        cfg: LlmConfig,
        recorder: TranscriptRecorder | None = None,
        http_client: httpx.Client | None = None,
    ) -> None:
        api_key = os.environ.get(cfg.api_key_env)
        if not api_key:
            logger.warning("Environment variable %s is not set, sending no credentials", cfg.api_key_env)
        self.cfg = cfg
        self.recorder = recorder
        self.client = OpenAI(
            api_key=api_key or "unset",
            base_url=f"{cfg.endpoint.rstrip('/')}/v1",
            timeout=cfg.timeout_s,
            max_retries=0,
            http_client=http_client,
        )

    def complete(self, prompt: PromptBundle, *, attempt: int = 1) -> CompletionResult:
        started = time.perf_counter()
        try:
            response: ChatCompletion = self.client.chat.completions.create(
                model=self.cfg.model,
                messages=[{"role": "user", "content": prompt.text}],
                temperature=self.cfg.temperature,
                max_tokens=self.cfg.max_tokens,
            )
        except openai.APITimeoutError as e:
            raise LlmTransportError(f"Request to {self.cfg.endpoint} timed out") from e
        except openai.APIConnectionError as e:
            raise LlmTransportError(f"Cannot reach {self.cfg.endpoint}: {e}") from e
        except openai.APIStatusError as e:
            raise LlmStatusError(e.status_code, str(e.message)) from e

        if not response.choices:
            raise LlmError(f"{self.cfg.endpoint} returned no choices")
        usage = response.usage
        result = CompletionResult(
            text=response.choices[0].message.content or "",
            latency_ms=timed(started),
            prompt_tokens=usage.prompt_tokens if usage else None,
            completion_tokens=usage.completion_tokens if usage else None,
            attempt=attempt,
        )
        if self.recorder is not None:
            self.recorder.record(prompt, result, model=self.cfg.model)
        return result
