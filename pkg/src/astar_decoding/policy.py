"""Policy backends: sources of candidate continuations for a text prefix.

A policy takes the full text so far (prompt plus accepted thoughts) and
proposes up to k continuations, each segmented at step granularity. Two
backends ship here: a deterministic table-driven one for tests and replay,
and an OpenAI-compatible HTTP client. Toy and synthetic policies elsewhere
implement the same interface.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, replace

import requests

from .errors import MalformedResponse, PolicyUnavailable

log = logging.getLogger(__name__)

# Completions end with this sentence; its presence marks a terminal thought.
TERMINAL_PHRASE = "I hope it is correct."
FINAL_ANSWER_MARKER = "Therefore, the final answer is:"
STEP_HEADER_RE = re.compile(r"## Step \d+:")

COT_PREAMBLE = """Solve the following math problem efficiently and clearly:

- For simple problems (2 steps or fewer):
Provide a concise solution with minimal explanation.

- For complex problems (3 steps or more):
Use this step-by-step format:

## Step 1: [Concise description]
[Brief explanation and calculations]

## Step 2: [Concise description]
[Brief explanation and calculations]

...

Regardless of the approach, always conclude with:

Therefore, the final answer is: boxed{answer}. I hope it is correct.

Where [answer] is just the final number or expression that solves the problem."""


def render_cot_prompt(problem: str) -> str:
    """Instruction block followed by the problem statement."""
    return COT_PREAMBLE + "\n\n" + problem.strip() + "\n\n"


def count_tokens(text: str) -> int:
    """Whitespace token count, floored at 1 for non-empty text."""
    if not text:
        return 0
    return max(1, len(text.split()))


def prefix_digest(prefix: str) -> str:
    return hashlib.sha256(prefix.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.8
    top_p: float = 1.0
    max_tokens_per_step: int = 256
    stop_markers: tuple[str, ...] = ("\n## Step",)
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens_per_step < 1:
            raise ValueError("max_tokens_per_step must be >= 1")


def greedy(params: SamplingParams) -> SamplingParams:
    """The same params with sampling turned off."""
    return replace(params, temperature=0.0, top_p=1.0)


@dataclass(frozen=True)
class Candidate:
    """One proposed continuation, step-sized unless the backend ran to EOS."""

    text: str
    token_count: int
    contains_eos: bool = False
    finish_reason: str = "stop_marker"  # stop_marker | eos | length

    def __post_init__(self) -> None:
        if not self.text:
            raise MalformedResponse("candidate text must be non-empty")
        if self.token_count < 1:
            raise MalformedResponse("candidate token_count must be >= 1")
        if self.finish_reason not in ("stop_marker", "eos", "length"):
            raise MalformedResponse(f"unknown finish_reason {self.finish_reason!r}")
        if self.contains_eos and self.finish_reason != "eos":
            raise MalformedResponse("contains_eos requires finish_reason == 'eos'")


@dataclass(frozen=True)
class Thought:
    """A candidate that was accepted onto a trajectory."""

    text: str
    token_count: int
    contains_eos: bool = False


def make_candidate(text: str, *, eos: bool | None = None, finish_reason: str | None = None) -> Candidate:
    """Build a candidate with whitespace token counting and EOS detection."""
    terminal = TERMINAL_PHRASE in text if eos is None else eos
    if terminal:
        reason = "eos"
    else:
        reason = finish_reason or "stop_marker"
    return Candidate(text=text, token_count=count_tokens(text), contains_eos=terminal, finish_reason=reason)


def segment(text: str) -> list[Thought]:
    """Split completion text into step-level thoughts.

    Boundaries open at every step header and at the final-answer sentence.
    Joining the pieces reproduces the input byte for byte.
    """
    if not text:
        return []
    bounds = {0}
    for m in STEP_HEADER_RE.finditer(text):
        bounds.add(m.start())
    at = text.find(FINAL_ANSWER_MARKER)
    while at != -1:
        bounds.add(at)
        at = text.find(FINAL_ANSWER_MARKER, at + 1)
    ordered = sorted(bounds)
    thoughts = []
    for start, end in zip(ordered, ordered[1:] + [len(text)]):
        piece = text[start:end]
        if not piece:
            continue
        thoughts.append(Thought(piece, count_tokens(piece), TERMINAL_PHRASE in piece))
    return thoughts


class Policy:
    """Interface: propose up to k candidate continuations of a prefix."""

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        raise NotImplementedError


class ScriptedPolicy(Policy):
    """Deterministic policy backed by a prefix -> continuations table.

    Table keys are sha256 hex digests of the full prefix string; values are
    lists of {"text": ..., "eos": ...} entries in proposal order. Sampling
    params are ignored apart from k truncation, so the backend is pure:
    the same (prefix, k) always yields the same candidates. Unknown prefixes
    yield no candidates.
    """

    def __init__(self, entries: dict[str, list[dict]] | None = None):
        self._entries = dict(entries or {})

    @classmethod
    def from_texts(cls, table: dict[str, list[str]]) -> "ScriptedPolicy":
        entries = {
            prefix_digest(prefix): [{"text": t} for t in texts]
            for prefix, texts in table.items()
        }
        return cls(entries)

    @classmethod
    def load(cls, path: str) -> "ScriptedPolicy":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("hash") not in (None, "sha256"):
            raise MalformedResponse(f"unsupported table hash {doc.get('hash')!r}")
        entries = doc.get("entries")
        if not isinstance(entries, dict):
            raise MalformedResponse("scripted table needs an 'entries' mapping")
        return cls(entries)

    def dump(self, path: str) -> None:
        doc = {"schema": 1, "hash": "sha256", "entries": self._entries}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        rows = self._entries.get(prefix_digest(prefix), [])
        out = []
        for row in rows[:k]:
            eos = row.get("eos")
            out.append(make_candidate(row["text"], eos=bool(eos) if eos is not None else None))
        return out


def _split_usage(total: int, texts: list[str]) -> list[int]:
    """Distribute a completion-token total over choices, keeping the sum.

    The per-choice share follows a whitespace estimate; each non-empty choice
    gets at least one token when the total allows it.
    """
    if not texts:
        return []
    estimates = [max(1, count_tokens(t)) for t in texts]
    total = max(total, 0)
    est_sum = sum(estimates)
    shares = [max(1, (total * e) // est_sum) for e in estimates]
    # Fix up rounding drift one token at a time, largest estimates first.
    order = sorted(range(len(texts)), key=lambda i: -estimates[i])
    i = 0
    while sum(shares) < total:
        shares[order[i % len(order)]] += 1
        i += 1
    while sum(shares) > total and any(s > 1 for s in shares):
        j = order[i % len(order)]
        if shares[j] > 1:
            shares[j] -= 1
        i += 1
    return shares


class HttpPolicy(Policy):
    """OpenAI-compatible completions or chat backend.

    One request with n=k by default; set parallel_requests for k independent
    calls (exact per-candidate usage, more round trips). Retries transient
    failures (connection errors, 429, 5xx) up to max_attempts with exponential
    backoff, then raises PolicyUnavailable.
    """

    RETRYABLE_STATUS = {429, 500, 502, 503, 504}

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_mode: str = "completions",
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
        parallel_requests: bool = False,
        session: requests.Session | None = None,
    ):
        if api_mode not in ("completions", "chat"):
            raise ValueError(f"unknown api_mode {api_mode!r}")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_mode = api_mode
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.parallel_requests = parallel_requests
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _endpoint(self) -> str:
        if self.api_mode == "chat":
            return f"{self.base_url}/chat/completions"
        return f"{self.base_url}/completions"

    def build_request(self, prefix: str, n: int, params: SamplingParams) -> dict:
        body: dict = {
            "model": self.model,
            "n": n,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens_per_step,
        }
        if params.stop_markers:
            body["stop"] = list(params.stop_markers)
        if params.seed is not None:
            body["seed"] = params.seed
        if self.api_mode == "chat":
            body["messages"] = [{"role": "user", "content": prefix}]
        else:
            body["prompt"] = prefix
        return body

    def _post(self, body: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(
                    self._endpoint(), json=body, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                log.warning("policy request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = PolicyUnavailable(f"HTTP {resp.status_code}")
                log.warning("policy returned %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise MalformedResponse(f"policy returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"policy returned non-JSON body: {exc}") from exc
        raise PolicyUnavailable(f"policy unreachable after {self.max_attempts} attempts: {last_error}")

    def _choice_text(self, choice: dict) -> str:
        if self.api_mode == "chat":
            return (choice.get("message") or {}).get("content") or ""
        return choice.get("text") or ""

    def _to_candidates(self, payload: dict, params: SamplingParams) -> list[Candidate]:
        choices = payload.get("choices")
        if not isinstance(choices, list) or not choices:
            raise MalformedResponse("policy response has no choices")
        texts, reasons = [], []
        for choice in choices:
            text = self._choice_text(choice)
            if not text:
                raise MalformedResponse("policy choice has empty text")
            texts.append(text)
            reasons.append(choice.get("finish_reason") or "stop")
        usage = payload.get("usage") or {}
        total = usage.get("completion_tokens")
        counts = _split_usage(int(total), texts) if total is not None else [count_tokens(t) for t in texts]
        out = []
        for text, reason, tokens in zip(texts, reasons, counts):
            tokens = min(tokens, params.max_tokens_per_step)
            if TERMINAL_PHRASE in text:
                eos, finish = True, "eos"
            elif reason == "length":
                eos, finish = False, "length"
            elif params.stop_markers:
                # "stop" is ambiguous when stop sequences were sent; assume the marker fired.
                eos, finish = False, "stop_marker"
            else:
                eos, finish = True, "eos"
            out.append(Candidate(text=text, token_count=max(1, tokens), contains_eos=eos, finish_reason=finish))
        return out

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        if self.parallel_requests and k > 1:
            out: list[Candidate] = []
            for i in range(k):
                sub = params if params.seed is None else replace(params, seed=params.seed + i)
                payload = self._post(self.build_request(prefix, 1, sub))
                out.extend(self._to_candidates(payload, params))
            return out[:k]
        payload = self._post(self.build_request(prefix, k, params))
        return self._to_candidates(payload, params)[:k]
