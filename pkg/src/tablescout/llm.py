"""Chat backends used by question parsing and NL2SQL.

Anything with ``id`` and ``complete(prompt) -> str`` works. The remote
backend speaks the common chat-completions JSON shape at temperature 0;
retries are exponential and a final failure raises LlmFailure so callers
can decide per question what to do.
"""

import logging
import time
from typing import Optional, Protocol

import httpx

from .errors import LlmFailure

log = logging.getLogger(__name__)


class ChatBackend(Protocol):
    id: str

    def complete(self, prompt: str) -> str: ...


class RemoteChatBackend:
    """Client for a chat-completions HTTP endpoint."""

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None,
                 temperature: float = 0.0, timeout: float = 60.0, max_retries: int = 3,
                 backoff: float = 1.0, client: Optional[httpx.Client] = None):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff = backoff
        self.id = f"remote:{model}@{endpoint}"
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        delay = self.backoff
        last_error: Optional[Exception] = None
        for attempt in range(1, self.max_retries + 1):
            try:
                resp = self._client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_error = exc
                log.warning("llm call attempt %d/%d failed: %s", attempt, self.max_retries, exc)
                if attempt < self.max_retries:
                    time.sleep(delay)
                    delay *= 2
        raise LlmFailure(f"chat call failed after {self.max_retries} attempts: {last_error}") from last_error
