"""Process-reward backends and the heuristic they induce.

A reward backend maps a step trace to a scalar in [0, 1]; search runs on
h = 1 - reward. The cache wrapper guarantees each distinct trace is scored
at most once per run and charges the budget ledger accordingly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass

import requests

from .budget import BudgetLedger
from .errors import MalformedResponse, RewardUnavailable

log = logging.getLogger(__name__)

AGGREGATE_TAG = "<aggregate_reward>"
STEP_SEPARATOR = "\n\n"


@dataclass(frozen=True)
class StepTrace:
    """A problem statement plus the step texts produced so far."""

    problem: str
    steps: tuple[str, ...] = ()

    def key(self) -> str:
        blob = json.dumps([self.problem, *self.steps], ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def format_reward_request(trace: StepTrace) -> str:
    """Render a trace for scoring: problem, steps, aggregate slot last.

    Byte-stable for a fixed trace; step texts are kept verbatim.
    """
    parts = [trace.problem, *trace.steps, AGGREGATE_TAG]
    return STEP_SEPARATOR.join(parts)


def heuristic_from_reward(reward: float) -> float:
    """h = 1 - r. Expects the reward already clamped to [0, 1]."""
    return 1.0 - reward


class RewardModel:
    """Interface: score a step trace in [0, 1]."""

    def score(self, trace: StepTrace) -> float:
        raise NotImplementedError


class ConstantReward(RewardModel):
    """Fixed score regardless of the trace; turns search into uniform-cost."""

    def __init__(self, value: float = 0.5):
        self.value = value

    def score(self, trace: StepTrace) -> float:
        return self.value


class CallableReward(RewardModel):
    def __init__(self, fn):
        self._fn = fn

    def score(self, trace: StepTrace) -> float:
        return self._fn(trace)


class HttpProcessReward(RewardModel):
    """Process reward model behind an HTTP endpoint.

    POSTs {"prompt": <formatted trace>} and reads {"rewards": [...]}; only
    the final entry is consumed. Retries transient failures, then raises
    RewardUnavailable.
    """

    RETRYABLE_STATUS = {429, 500, 502, 503, 504}

    def __init__(
        self,
        base_url: str,
        *,
        path: str = "/score",
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.path = path
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._session = session or requests.Session()

    def build_request(self, trace: StepTrace) -> dict:
        return {"prompt": format_reward_request(trace)}

    def score(self, trace: StepTrace) -> float:
        body = self.build_request(trace)
        url = self.base_url + self.path
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                log.warning("reward request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = RewardUnavailable(f"HTTP {resp.status_code}")
                log.warning("reward returned %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise MalformedResponse(f"reward returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"reward returned non-JSON body: {exc}") from exc
            rewards = payload.get("rewards")
            if not isinstance(rewards, list) or not rewards:
                raise MalformedResponse("reward response needs a non-empty 'rewards' list")
            return float(rewards[-1])
        raise RewardUnavailable(f"reward unreachable after {self.max_attempts} attempts: {last_error}")


class ScoreCache:
    """Per-run scorer: caches by trace identity, charges one pass per miss.

    Out-of-range backend values are clamped to [0, 1] with a warning before
    they enter the cache, so downstream h values always land in [0, 1].
    """

    def __init__(self, backend: RewardModel, ledger: BudgetLedger | None = None):
        self._backend = backend
        self._ledger = ledger
        self._cache: dict[str, float] = {}
        self._lock = threading.Lock()

    def reward(self, trace: StepTrace) -> float:
        key = trace.key()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = float(self._backend.score(trace))
        if not 0.0 <= value <= 1.0:
            log.warning("reward %r out of range; clamping to [0, 1]", value)
            value = min(1.0, max(0.0, value))
        with self._lock:
            if key not in self._cache:
                self._cache[key] = value
                if self._ledger is not None:
                    self._ledger.charge_prm_pass()
            return self._cache[key]

    @property
    def distinct_scored(self) -> int:
        with self._lock:
            return len(self._cache)
