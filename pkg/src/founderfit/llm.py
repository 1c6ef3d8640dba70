"""Chat-completion gateway with remote, scripted and replay backends.

Every exchange passing through a ``Gateway`` can be appended to a session log
(JSON lines, one header line then one exchange per line). A session log can
be loaded back as a ``ReplayBackend`` to rerun an evaluation offline.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from . import __version__
from .errors import (BackendUnavailable, ConfigError, ReplayExhausted, ReplayMismatch, ResponseTooLong,
                     TransientBackendError)

log = logging.getLogger(__name__)

STAGE_TAGS = frozenset({
    "founder_features", "founder_rating", "founder_final",
    "idea_features", "idea_rating", "idea_final",
    "fit_rating", "fit_final", "summary",
})

SESSION_FORMAT = "founderfit-session"


@dataclass(frozen=True)
class SamplingParams:
    top_p: float = 1.0
    temperature: float = 1.0
    max_tokens: int = 2048

    def __post_init__(self):
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.temperature < 0.0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


# Stage-kind defaults; only the rating top_p is fixed by the method itself.
FEATURE_SAMPLING = SamplingParams(top_p=1.0, temperature=0.7)
RATING_SAMPLING = SamplingParams(top_p=0.3, temperature=1.0)
EXTRACTION_SAMPLING = SamplingParams(top_p=1.0, temperature=0.0)


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    sampling: SamplingParams
    tag: str

    def __post_init__(self):
        if not self.user_text.strip():
            raise ValueError("user_text must be non-empty")
        if self.tag not in STAGE_TAGS:
            raise ValueError(f"unknown stage tag {self.tag!r}")

    def fingerprint(self) -> str:
        payload = json.dumps({"system": self.system_text, "user": self.user_text,
                              "sampling": asdict(self.sampling), "tag": self.tag}, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatExchange:
    request: ChatRequest
    response_text: str
    latency: float
    backend_id: str

    def to_dict(self) -> dict:
        return {
            "kind": "exchange",
            "tag": self.request.tag,
            "system_text": self.request.system_text,
            "user_text": self.request.user_text,
            "sampling": asdict(self.request.sampling),
            "fingerprint": self.request.fingerprint(),
            "response_text": self.response_text,
            "latency": self.latency,
            "backend_id": self.backend_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChatExchange":
        req = ChatRequest(d["system_text"], d["user_text"], SamplingParams(**d["sampling"]), d["tag"])
        return cls(req, d["response_text"], float(d.get("latency", 0.0)), d.get("backend_id", ""))


@dataclass(frozen=True)
class BackendReply:
    text: str
    truncated: bool = False


class ChatBackend(Protocol):
    backend_id: str

    def send(self, request: ChatRequest) -> BackendReply: ...


@dataclass(frozen=True)
class LLMConfig:
    endpoint: str | None = None
    api_key: str | None = None
    model: str = "gpt-4"
    timeout: float = 120.0
    max_retries: int = 3
    feature_sampling: SamplingParams = FEATURE_SAMPLING
    rating_sampling: SamplingParams = RATING_SAMPLING
    extraction_sampling: SamplingParams = EXTRACTION_SAMPLING

    def __post_init__(self):
        if self.rating_sampling.top_p != RATING_SAMPLING.top_p:
            raise ConfigError(f"rating steps must use top_p={RATING_SAMPLING.top_p}")
        if self.extraction_sampling.temperature != 0.0:
            raise ConfigError("extraction steps must use temperature 0")

    @classmethod
    def from_env(cls, **overrides) -> "LLMConfig":
        env = {"endpoint": os.environ.get("LLM_ENDPOINT"), "api_key": os.environ.get("LLM_API_KEY")}
        if os.environ.get("LLM_MODEL"):
            env["model"] = os.environ["LLM_MODEL"]
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(env)

    @classmethod
    def from_dict(cls, d: dict) -> "LLMConfig":
        d = dict(d)
        for key in ("feature_sampling", "rating_sampling", "extraction_sampling"):
            if key in d and isinstance(d[key], dict):
                d[key] = SamplingParams(**d[key])
        return cls(**d)

    def public_dict(self) -> dict:
        return {"endpoint": self.endpoint, "model": self.model, "max_retries": self.max_retries,
                "feature_sampling": asdict(self.feature_sampling),
                "rating_sampling": asdict(self.rating_sampling),
                "extraction_sampling": asdict(self.extraction_sampling)}


class RemoteChatBackend:
    """OpenAI-style chat-completions JSON over HTTP."""

    def __init__(self, config: LLMConfig, client=None):
        import httpx

        if not config.endpoint:
            raise BackendUnavailable("no LLM endpoint configured (set LLM_ENDPOINT)")
        self.config = config
        self.backend_id = f"remote:{config.model}"
        headers = {"Authorization": f"Bearer {config.api_key}"} if config.api_key else {}
        self._client = client or httpx.Client(timeout=config.timeout, headers=headers)
        self._httpx = httpx

    def send(self, request: ChatRequest) -> BackendReply:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        body = {"model": self.config.model, "messages": messages, "top_p": request.sampling.top_p,
                "temperature": request.sampling.temperature, "max_tokens": request.sampling.max_tokens}
        try:
            resp = self._client.post(self.config.endpoint, json=body)
        except self._httpx.TransportError as exc:
            raise TransientBackendError(f"LLM transport error: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"LLM endpoint returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendUnavailable(f"LLM request rejected with HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            choice = resp.json()["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed LLM response: {exc}") from exc
        return BackendReply(text, truncated=choice.get("finish_reason") == "length")


class ScriptedBackend:
    """Serves canned replies.

    ``replies`` is either a list (served in order regardless of tag) or a
    mapping from stage tag to a list (served in order per tag).
    """

    backend_id = "scripted"

    def __init__(self, replies: list[str] | dict[str, list[str]]):
        self._lock = threading.Lock()
        if isinstance(replies, dict):
            self._by_tag = {tag: deque(v) for tag, v in replies.items()}
            self._queue = None
        else:
            self._by_tag = None
            self._queue = deque(replies)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text("utf-8"))
        if isinstance(data, dict) and "replies" in data:
            data = data["replies"]
        return cls(data)

    def send(self, request: ChatRequest) -> BackendReply:
        with self._lock:
            q = self._queue if self._by_tag is None else self._by_tag.get(request.tag)
            if not q:
                raise BackendUnavailable(f"scripted backend has no reply queued for stage {request.tag!r}")
            return BackendReply(q.popleft())


class ReplayBackend:
    """Replays a recorded session, per stage tag in recorded order."""

    def __init__(self, exchanges: list[ChatExchange], strict: bool = True, source: str = ""):
        self.strict = strict
        self.backend_id = f"replay:{source}" if source else "replay"
        self._lock = threading.Lock()
        self._by_tag: dict[str, deque[ChatExchange]] = defaultdict(deque)
        for ex in exchanges:
            self._by_tag[ex.request.tag].append(ex)

    def send(self, request: ChatRequest) -> BackendReply:
        with self._lock:
            q = self._by_tag.get(request.tag)
            if not q:
                raise ReplayExhausted(request.tag)
            recorded = q.popleft()
        if self.strict and recorded.request.fingerprint() != request.fingerprint():
            raise ReplayMismatch(request.tag, _diff_snippet(recorded.request, request))
        return BackendReply(recorded.response_text)


def _diff_snippet(recorded: ChatRequest, actual: ChatRequest, limit: int = 20) -> str:
    def lines(r: ChatRequest) -> list[str]:
        return ([f"sampling: {asdict(r.sampling)}", "system:"] + r.system_text.splitlines()
                + ["user:"] + r.user_text.splitlines())
    diff = list(difflib.unified_diff(lines(recorded), lines(actual), "recorded", "actual", lineterm="", n=1))
    if len(diff) > limit:
        diff = diff[:limit] + [f"... ({len(diff) - limit} more diff lines)"]
    return "\n".join(diff)


class SessionLog:
    """Append-only JSON-lines log of exchanges with a header line."""

    def __init__(self, path: str | Path, config_hash: str = ""):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        header = {"kind": "header", "format": SESSION_FORMAT, "pipeline_version": __version__,
                  "config_hash": config_hash}
        self.path.write_text(json.dumps(header, sort_keys=True) + "\n", encoding="utf-8")

    def append(self, exchange: ChatExchange) -> None:
        line = json.dumps(exchange.to_dict(), sort_keys=True, ensure_ascii=False)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def record_session(path: str | Path, config_hash: str = "") -> SessionLog:
    return SessionLog(path, config_hash)


def read_session(path: str | Path) -> tuple[dict, list[ChatExchange]]:
    lines = [ln for ln in Path(path).read_text("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise BackendUnavailable(f"{path}: empty session file")
    header = json.loads(lines[0])
    if header.get("format") != SESSION_FORMAT:
        raise BackendUnavailable(f"{path}: not a session log")
    return header, [ChatExchange.from_dict(json.loads(ln)) for ln in lines[1:]]


def replay_session(path: str | Path, strict: bool = True) -> ReplayBackend:
    _header, exchanges = read_session(path)
    return ReplayBackend(exchanges, strict=strict, source=Path(path).name)


@dataclass
class Gateway:
    backend: ChatBackend
    max_retries: int = 3
    backoff: float = 0.5
    session: SessionLog | None = None
    sleep: Callable[[float], None] = time.sleep
    exchanges: list[ChatExchange] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatExchange:
        delay = self.backoff
        attempt = 0
        while True:
            start = time.perf_counter()
            try:
                reply = self.backend.send(request)
                break
            except TransientBackendError as exc:
                if attempt >= self.max_retries:
                    raise BackendUnavailable(
                        f"stage {request.tag}: backend failed after {attempt + 1} attempts: {exc}") from exc
                log.warning("stage %s: transient backend error (%s), retrying in %.1fs", request.tag, exc, delay)
                self.sleep(delay)
                delay *= 2
                attempt += 1
        exchange = ChatExchange(request, reply.text, time.perf_counter() - start, self.backend.backend_id)
        with self._lock:
            self.exchanges.append(exchange)
        if self.session is not None:
            self.session.append(exchange)
        if reply.truncated:
            raise ResponseTooLong(f"stage {request.tag}: response hit max_tokens={request.sampling.max_tokens}")
        return exchange
