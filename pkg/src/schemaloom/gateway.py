"""Client for OpenAI-compatible chat-completion endpoints.

One request shape covers hosted GPT endpoints and local runners alike:
POST {base_url}/chat/completions with system+user messages. On top of the
plain call sits a parse-repair loop that re-prompts the model with the parse
error whenever its reply does not contain a loadable schema document.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import requests

from schemaloom import SchemaloomError
from schemaloom.model import SchemaDoc, SchemaError, parse_schema
from schemaloom.prompts import PromptPair


class GatewayError(SchemaloomError):
    pass


class AuthFailure(GatewayError):
    pass


class EndpointUnreachable(GatewayError):
    pass


class ProtocolError(GatewayError):
    pass


class ResponseTruncated(GatewayError):
    def __init__(self, result: "CompletionResult"):
        super().__init__("completion stopped at the length limit")
        self.result = result


class NoJsonFound(GatewayError):
    pass


class RepairExhausted(GatewayError):
    def __init__(self, last_error: Exception, transcript: list["CompletionResult"]):
        super().__init__(
            f"no parseable schema after {len(transcript)} attempts: {last_error}"
        )
        self.last_error = last_error
        self.transcript = transcript


class FinishReason(Enum):
    STOP = "stop"
    LENGTH = "length"
    OTHER = "other"


@dataclass(frozen=True)
class ModelConfig:
    base_url: str
    api_key: str
    model_name: str
    temperature: float = 0.3
    context_limit: int = 128000
    completion_reserve: int = 8000
    max_repair_attempts: int = 3
    request_timeout: float = 120.0
    retry_base_delay: float = 1.0
    retry_max_tries: int = 5

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_repair_attempts < 1:
            raise ValueError("max_repair_attempts must be at least 1")
        if self.context_limit <= self.completion_reserve:
            raise ValueError("context_limit must exceed completion_reserve")


@dataclass(frozen=True)
class CompletionResult:
    raw_text: str
    finish_reason: FinishReason
    usage: Optional[tuple[int, int]] = None


_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def complete(
    p: PromptPair, cfg: ModelConfig, *, sleep: Callable[[float], None] = time.sleep
) -> CompletionResult:
    """Issue one chat completion request.

    Transient failures (transport errors, 429, 5xx) are retried with
    exponential backoff (factor 2, up to ``retry_max_tries`` attempts);
    auth failures are surfaced immediately.
    """
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    body = {
        "model": cfg.model_name,
        "messages": [
            {"role": "system", "content": p.system},
            {"role": "user", "content": p.user},
        ],
        "temperature": cfg.temperature,
        # Advisory field for context-aware runners; strict providers that
        # reject unknown arguments can proxy or strip it.
        "max_context_tokens": cfg.context_limit,
    }
    headers = {"Authorization": f"Bearer {cfg.api_key}"}

    last_failure: Exception | str | None = None
    for attempt in range(cfg.retry_max_tries):
        if attempt:
            sleep(cfg.retry_base_delay * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=cfg.request_timeout)
        except requests.RequestException as exc:
            last_failure = exc
            continue
        if resp.status_code in (401, 403):
            raise AuthFailure(f"endpoint rejected credentials (HTTP {resp.status_code})")
        if resp.status_code in _RETRYABLE_STATUS:
            last_failure = f"HTTP {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise ProtocolError(f"unexpected HTTP {resp.status_code}: {resp.text[:200]}")
        return _parse_response(resp)
    raise EndpointUnreachable(
        f"gave up after {cfg.retry_max_tries} tries; last failure: {last_failure}"
    )


def _parse_response(resp: requests.Response) -> CompletionResult:
    try:
        data = resp.json()
        choice = data["choices"][0]
        content = choice["message"]["content"]
        finish = choice.get("finish_reason")
    except (ValueError, LookupError, TypeError) as exc:
        raise ProtocolError(f"malformed completion response: {exc}") from exc
    if content is None:
        content = ""
    if not isinstance(content, str):
        raise ProtocolError("completion content is not text")
    reason = {"stop": FinishReason.STOP, "length": FinishReason.LENGTH}.get(
        finish, FinishReason.OTHER
    )
    usage = None
    u = data.get("usage")
    if isinstance(u, dict) and "prompt_tokens" in u and "completion_tokens" in u:
        usage = (u["prompt_tokens"], u["completion_tokens"])
    result = CompletionResult(raw_text=content, finish_reason=reason, usage=usage)
    if reason is FinishReason.LENGTH:
        raise ResponseTruncated(result)
    if not content and reason is FinishReason.STOP:
        raise ProtocolError("empty completion with finish_reason=stop")
    return result


# ---------------------------------------------------------------------------
# Schema extraction


def extract_schema_text(r: CompletionResult) -> str:
    """Pull the schema document out of a model reply.

    The first fenced code block wins when any fence is present; otherwise the
    substring from the first '{' to its balanced '}' is taken. Surrounding
    prose is discarded.
    """
    text = r.raw_text
    if not text:
        raise NoJsonFound("empty completion")
    fence = text.find("```")
    if fence >= 0:
        line_end = text.find("\n", fence)
        if line_end < 0:
            raise NoJsonFound("opening fence with no content")
        close = text.find("```", line_end)
        inner = text[line_end + 1:close] if close >= 0 else text[line_end + 1:]
        return inner.strip()
    return _first_balanced_object(text)


def _first_balanced_object(text: str) -> str:
    start = text.find("{")
    if start < 0:
        raise NoJsonFound("no '{' in completion")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    raise NoJsonFound("unbalanced braces in completion")


_REPAIR_SUFFIX = (
    "\n\nYour previous output failed to parse: {error}. "
    "Output only a corrected JSON schema.\nPrevious output:\n{offending}"
)


def complete_schema_with_repair(
    p: PromptPair, cfg: ModelConfig, *, sleep: Callable[[float], None] = time.sleep
) -> tuple[SchemaDoc, int, list[CompletionResult]]:
    """Call the model until its reply parses as a schema document.

    Each retry re-sends the original user prompt plus the parse error and the
    offending text; gives up after ``cfg.max_repair_attempts`` attempts.
    Returns (document, attempts, transcript).
    """
    transcript: list[CompletionResult] = []
    current = p
    last_error: Exception | None = None
    for attempt in range(1, cfg.max_repair_attempts + 1):
        result = complete(current, cfg, sleep=sleep)
        transcript.append(result)
        try:
            doc = parse_schema(extract_schema_text(result))
            return doc, attempt, transcript
        except (NoJsonFound, SchemaError) as exc:
            last_error = exc
            suffix = _REPAIR_SUFFIX.format(error=exc, offending=result.raw_text)
            current = replace(p, user=p.user + suffix)
    raise RepairExhausted(last_error, transcript)
