"""Monotone spend counters shared by search, baselines, and the harness."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass
class BudgetLedger:
    """Tracks generation and scoring spend for one run.

    Counters only ever increase. Completion tokens are counted; prompt tokens
    are not. Safe to share between threads.
    """

    generated_tokens: int = 0
    policy_calls: int = 0
    prm_passes: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge_tokens(self, n: int) -> None:
        if n < 0:
            raise ValueError("token charge must be non-negative")
        with self._lock:
            self.generated_tokens += n

    def charge_policy_call(self) -> None:
        with self._lock:
            self.policy_calls += 1

    def charge_prm_pass(self) -> None:
        with self._lock:
            self.prm_passes += 1

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return {
                "generated_tokens": self.generated_tokens,
                "policy_calls": self.policy_calls,
                "prm_passes": self.prm_passes,
            }
