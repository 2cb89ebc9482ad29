"""Record real LLM exchanges as NDJSON and replay them offline."""
import hashlib
import json
import logging
import threading
from collections import defaultdict, deque
from pathlib import Path
from typing import Any, TypedDict

from src.errors import LlmError, ParseError
from src.llm.base import CompletionResult, LlmClient
from src.prompting import PromptBundle

logger = logging.getLogger(__name__)


class Transcript(TypedDict):
    prompt_sha256: str
    prompt: str
    reply: str
    model: str
    latency_ms: float
    attempt: int
    bs: int
    tokens: dict[str, int | None]


def prompt_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class TranscriptRecorder:
    """Appends one record per completion; safe to share between threads."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, prompt: PromptBundle, result: CompletionResult, model: str) -> Transcript:
        transcript: Transcript = {
            "prompt_sha256": prompt_digest(prompt.text),
            "prompt": prompt.text,
            "reply": result.text,
            "model": model,
            "latency_ms": result.latency_ms,
            "attempt": result.attempt,
            "bs": prompt.bs,
            "tokens": {"prompt": result.prompt_tokens, "completion": result.completion_tokens},
        }
        line = json.dumps(transcript, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock, self.path.open("a", encoding="utf-8") as f:
            f.write(line)
        return transcript


def read_transcripts(path: str | Path) -> list[Transcript]:
    transcripts = []
    with Path(path).open(encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record: dict[str, Any] = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}:{number}: invalid transcript record") from e
            missing = {"prompt_sha256", "reply"} - record.keys()
            if missing:
                raise ParseError(f"{path}:{number}: transcript record lacks {sorted(missing)}")
            transcripts.append(record)  # type: ignore[arg-type]
    return transcripts


class ReplayLlm(LlmClient):
    """Serves recorded replies by prompt hash, in the order they were recorded."""

    name = "replay"

    def __init__(self, path: str | Path) -> None:
        self.replies: dict[str, deque[Transcript]] = defaultdict(deque)
        for transcript in read_transcripts(path):
            self.replies[transcript["prompt_sha256"]].append(transcript)
        logger.info("Loaded %d recorded prompts from %s", len(self.replies), path)

    def complete(self, prompt: PromptBundle, *, attempt: int = 1) -> CompletionResult:
        queue = self.replies.get(prompt_digest(prompt.text))
        if not queue:
            raise LlmError(f"No recorded reply left for prompt of BS {prompt.bs}")
        transcript = queue.popleft()
        tokens = transcript.get("tokens") or {}
        return CompletionResult(
            text=transcript["reply"],
            latency_ms=float(transcript.get("latency_ms", 0.0)),
            prompt_tokens=tokens.get("prompt"),
            completion_tokens=tokens.get("completion"),
            attempt=attempt,
        )
