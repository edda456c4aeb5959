"""Seeded synthetic decoding tasks for tests, fixtures, and demos.

Everything here is pure in (seed, prefix): hashing replaces stored tables,
so arbitrarily large trees stay cheap while behaving exactly like scripted
backends. Two families ship: featureless random trees for stress-testing
search invariants, and hidden-code problems whose exact progress reward
(plus bounded noise) exercises the search-versus-resampling tradeoff.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from random import Random

from .policy import Candidate, Policy, SamplingParams, count_tokens
from .records import Problem
from .reward import RewardModel, StepTrace

log = logging.getLogger(__name__)


def stable_hash(*parts) -> int:
    """Process-independent 64-bit hash of the stringified parts."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "big")


def stable_rng(*parts) -> Random:
    return Random(stable_hash(*parts))


def derive_seed(*parts) -> int:
    """Stable sub-seed for fanning one run seed out to many samplers."""
    return stable_hash("seed", *parts) % (2**31)


class RandomTreePolicy(Policy):
    """Featureless pseudo-random tree with configurable EOS arrivals.

    Each prefix deterministically yields k one-line step texts; a step is
    terminal with probability eos_prob once the trajectory is at least
    min_eos_depth steps deep. Steps are one line each, so depth equals the
    newline count past the prompt.
    """

    def __init__(
        self,
        seed: int,
        prompt: str,
        *,
        min_eos_depth: int = 2,
        eos_prob: float = 0.15,
        max_words: int = 5,
    ):
        self.seed = seed
        self.prompt = prompt
        self.min_eos_depth = min_eos_depth
        self.eos_prob = eos_prob
        self.max_words = max_words

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        depth = prefix[len(self.prompt):].count("\n")
        rng = stable_rng(self.seed, params.seed, prefix)
        out: list[Candidate] = []
        for i in range(k):
            words = [f"w{rng.randrange(1000)}" for _ in range(rng.randint(1, self.max_words))]
            eos = depth + 1 >= self.min_eos_depth and rng.random() < self.eos_prob
            if eos:
                text = f"Therefore, the final answer is: boxed{{{rng.randrange(100)}}}. I hope it is correct.\n"
            else:
                text = f"step {depth + 1}.{i} {' '.join(words)}\n"
            out.append(
                Candidate(
                    text=text,
                    token_count=count_tokens(text),
                    contains_eos=eos,
                    finish_reason="eos" if eos else "stop_marker",
                )
            )
        return out


class RandomTreeReward(RewardModel):
    """Uniform pseudo-random reward per distinct trace."""

    def __init__(self, seed: int):
        self.seed = seed

    def score(self, trace: StepTrace) -> float:
        return stable_rng(self.seed, "reward", trace.key()).random()


# ---------------------------------------------------------------------------
# Hidden-code family


@dataclass(frozen=True)
class CodeTaskFamily:
    """Problems that hide a fixed-length code over a small digit alphabet.

    The policy proposes one digit per step with an imperfect prior: the
    correct digit appears with probability sample_accuracy when sampling
    and greedy_accuracy when decoding greedily. The exact reward is the
    fraction of leading digits matching the hidden code, so progress is
    observable but individual scores can be blurred with noise.
    """

    # Defaults calibrated so best-of-64 lands mid-range and guided search
    # at k=16 beats it while spending well under half the tokens.
    seed: int = 0
    length: int = 4
    alphabet: str = "12"
    sample_accuracy: float = 0.35
    greedy_accuracy: float = 0.35

    def code(self, instance: int) -> str:
        rng = stable_rng(self.seed, "code", instance)
        return "".join(rng.choice(self.alphabet) for _ in range(self.length))

    def statement(self, instance: int) -> str:
        return (
            f"Recover the hidden {self.length}-digit code over digits "
            f"{{{','.join(self.alphabet)}}}. instance {instance}\n"
        )

    def problems(self, count: int) -> list[Problem]:
        return [
            Problem(id=f"code-{i:04d}", statement=self.statement(i), reference_answer=self.code(i))
            for i in range(count)
        ]

    def policy(self) -> "CodeTaskPolicy":
        return CodeTaskPolicy(self)

    def oracle(self, noise_scale: float = 0.0) -> "CodeOracleReward":
        return CodeOracleReward(self, noise_scale)

    def true_reward(self, instance: int, digits: str) -> float:
        code = self.code(instance)
        matched = 0
        for got, want in zip(digits, code):
            if got != want:
                break
            matched += 1
        return matched / self.length


def _parse_instance(text: str) -> int:
    at = text.find("instance ")
    if at == -1:
        raise ValueError("not a hidden-code prompt")
    tail = text[at + len("instance "):]
    digits = []
    for ch in tail:
        if ch.isdigit():
            digits.append(ch)
        else:
            break
    return int("".join(digits))


def _parse_digits(text: str) -> str:
    out = []
    for line in text.splitlines():
        at = line.find("choose ")
        if at != -1:
            out.append(line[at + len("choose "):].strip())
    return "".join(out)


class CodeTaskPolicy(Policy):
    """One digit-choice step per depth, then a boxed final answer."""

    def __init__(self, family: CodeTaskFamily):
        self.family = family

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        fam = self.family
        instance = _parse_instance(prefix)
        digits = _parse_digits(prefix)
        depth = len(digits)
        if depth >= fam.length:
            text = f"Therefore, the final answer is: boxed{{{digits}}}. I hope it is correct.\n"
            return [Candidate(text, count_tokens(text), True, "eos")]
        correct = fam.code(instance)[depth]
        others = [d for d in fam.alphabet if d != correct]
        greedy_rng = stable_rng(fam.seed, "greedy", instance, digits)
        preferred = correct if greedy_rng.random() < fam.greedy_accuracy else greedy_rng.choice(others)
        if params.temperature == 0:
            text = f"## Step {depth + 1}: choose {preferred}\n"
            return [Candidate(text, count_tokens(text), False, "stop_marker")]
        rng = stable_rng(fam.seed, "sample", instance, digits, params.seed)
        out = []
        for _ in range(k):
            digit = correct if rng.random() < fam.sample_accuracy else rng.choice(others)
            text = f"## Step {depth + 1}: choose {digit}\n"
            out.append(Candidate(text, count_tokens(text), False, "stop_marker"))
        return out


class CodeOracleReward(RewardModel):
    """Leading-match reward with optional bounded per-state noise.

    Noise is uniform on [-noise_scale, noise_scale], drawn deterministically
    per trace, and the sum is clipped back into [0, 1].
    """

    def __init__(self, family: CodeTaskFamily, noise_scale: float = 0.0):
        self.family = family
        self.noise_scale = noise_scale

    def score(self, trace: StepTrace) -> float:
        instance = _parse_instance(trace.problem)
        digits = _parse_digits("".join(trace.steps))
        value = self.family.true_reward(instance, digits)
        if self.noise_scale:
            wiggle = stable_rng(self.family.seed, "noise", trace.key()).uniform(
                -self.noise_scale, self.noise_scale
            )
            value = min(1.0, max(0.0, value + wiggle))
        return value
