"""Reference decoding strategies: greedy, best-of-n, voting, particle filter.

All baselines share the policy/reward interfaces with the search core and
charge the same budget ledger, so token and scoring spend are comparable
across methods. Full completions are built by stepwise sampling until a
terminal thought or the token limit.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .answers import extract_answer, normalize_answer
from .budget import BudgetLedger
from .policy import Policy, SamplingParams, Thought, greedy
from .records import Problem, RunRecord, build_record
from .reward import RewardModel, ScoreCache, StepTrace
from .synthetic import derive_seed

log = logging.getLogger(__name__)

DEFAULT_TOKEN_LIMIT = 2048
MAX_STEPS = 128  # hard stop for stepwise completion of one trajectory


@dataclass(frozen=True)
class Completion:
    thoughts: tuple[Thought, ...]
    token_limit_hit: bool = False

    @property
    def text(self) -> str:
        return "".join(t.text for t in self.thoughts)

    @property
    def steps(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.thoughts)


def complete_trajectory(
    policy: Policy,
    prompt: str,
    params: SamplingParams,
    ledger: BudgetLedger,
    *,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
) -> Completion:
    """Extend one trajectory step by step until EOS or the token limit."""
    thoughts: list[Thought] = []
    tokens = 0
    for _ in range(MAX_STEPS):
        if tokens >= token_limit:
            return Completion(tuple(thoughts), token_limit_hit=True)
        step = policy.sample(prompt + "".join(t.text for t in thoughts), 1, params)
        ledger.charge_policy_call()
        if not step:
            break
        cand = step[0]
        ledger.charge_tokens(cand.token_count)
        tokens += cand.token_count
        thoughts.append(Thought(cand.text, cand.token_count, cand.contains_eos))
        if cand.contains_eos:
            break
    return Completion(tuple(thoughts), token_limit_hit=tokens >= token_limit and not (thoughts and thoughts[-1].contains_eos))


def pass_at_1(
    problem: Problem,
    policy: Policy,
    *,
    params: SamplingParams | None = None,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
    ledger: BudgetLedger | None = None,
    prompt: str | None = None,
) -> RunRecord:
    """Single greedy chain-of-thought completion."""
    params = greedy(params or SamplingParams())
    ledger = ledger or BudgetLedger()
    prompt = problem.statement if prompt is None else prompt
    completion = complete_trajectory(policy, prompt, params, ledger, token_limit=token_limit)
    flags = {}
    if completion.token_limit_hit:
        flags["token_limit_hit"] = True
    return build_record(
        problem,
        "pass_at_1",
        {"temperature": params.temperature, "token_limit": token_limit},
        completion.text,
        ledger.snapshot(),
        flags=flags,
    )


def best_of_n(
    problem: Problem,
    policy: Policy,
    reward: RewardModel,
    *,
    n: int = 64,
    params: SamplingParams | None = None,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
    ledger: BudgetLedger | None = None,
    seed: int = 0,
    prompt: str | None = None,
) -> RunRecord:
    """Sample n full completions, keep the one the reward model ranks best.

    Each full trace is scored once; ties go to the lowest sample index.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params or SamplingParams()
    ledger = ledger or BudgetLedger()
    scorer = ScoreCache(reward, ledger)
    prompt = problem.statement if prompt is None else prompt
    completions: list[Completion] = []
    rewards: list[float] = []
    for i in range(n):
        sub = replace(params, seed=derive_seed(seed, "best_of_n", i))
        completion = complete_trajectory(policy, prompt, sub, ledger, token_limit=token_limit)
        completions.append(completion)
        rewards.append(scorer.reward(StepTrace(problem.statement, completion.steps)))
    best = max(range(n), key=lambda i: (rewards[i], -i))
    flags = {"best_index": best, "best_reward": rewards[best]}
    if completions[best].token_limit_hit:
        flags["token_limit_hit"] = True
    return build_record(
        problem,
        "best_of_n",
        {"n": n, "temperature": params.temperature, "token_limit": token_limit},
        completions[best].text,
        ledger.snapshot(),
        flags=flags,
    )


def self_consistency(
    problem: Problem,
    policy: Policy,
    *,
    n: int = 64,
    params: SamplingParams | None = None,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
    ledger: BudgetLedger | None = None,
    seed: int = 0,
    prompt: str | None = None,
) -> RunRecord:
    """Majority vote over normalized extracted answers.

    Completions with no extractable answer are excluded from the vote (and
    logged); ties break toward the answer that appeared first. If nothing is
    extractable the first completion is returned flagged unanswered.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params or SamplingParams()
    ledger = ledger or BudgetLedger()
    prompt = problem.statement if prompt is None else prompt
    completions: list[Completion] = []
    votes: list[str | None] = []
    for i in range(n):
        sub = replace(params, seed=derive_seed(seed, "self_consistency", i))
        completion = complete_trajectory(policy, prompt, sub, ledger, token_limit=token_limit)
        completions.append(completion)
        raw = extract_answer(completion.text)
        votes.append(normalize_answer(raw) if raw is not None else None)
    counted = [v for v in votes if v is not None]
    dropped = len(votes) - len(counted)
    if dropped:
        log.info("self_consistency: %d of %d completions had no extractable answer", dropped, n)
    controls = {"n": n, "temperature": params.temperature, "token_limit": token_limit}
    if not counted:
        return build_record(
            problem,
            "self_consistency",
            controls,
            completions[0].text,
            ledger.snapshot(),
            flags={"unanswered": True, "excluded": dropped},
        )
    tally = Counter(counted)
    first_seen = {v: i for i, v in reversed(list(enumerate(votes))) if v is not None}
    winner = max(tally, key=lambda v: (tally[v], -first_seen[v]))
    chosen = votes.index(winner)
    return build_record(
        problem,
        "self_consistency",
        controls,
        completions[chosen].text,
        ledger.snapshot(),
        flags={"votes": tally[winner], "excluded": dropped},
    )


@dataclass(frozen=True)
class _Particle:
    thoughts: tuple[Thought, ...]
    token_total: int = 0
    terminal: bool = False
    token_limit_hit: bool = False

    @property
    def steps(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.thoughts)

    @property
    def text(self) -> str:
        return "".join(t.text for t in self.thoughts)


def particle_filter(
    problem: Problem,
    policy: Policy,
    reward: RewardModel,
    *,
    num_particles: int = 16,
    max_steps: int = 40,
    params: SamplingParams | None = None,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
    ledger: BudgetLedger | None = None,
    seed: int = 0,
    prompt: str | None = None,
) -> RunRecord:
    """Sequential resampling over partial trajectories.

    Each iteration extends every non-terminal particle by one step, scores
    all particles on their partial traces, normalizes the scores into
    weights, and resamples the population multinomially. Terminal particles
    keep their frozen traces but stay in the pool. All-zero rewards fall
    back to uniform weights. Returns the best-reward terminal particle.
    """
    if num_particles < 1:
        raise ValueError("num_particles must be >= 1")
    params = params or SamplingParams()
    ledger = ledger or BudgetLedger()
    scorer = ScoreCache(reward, ledger)
    prompt = problem.statement if prompt is None else prompt
    rng = np.random.default_rng(seed)
    particles = [_Particle(()) for _ in range(num_particles)]

    def extend(particle: _Particle, iteration: int, slot: int) -> _Particle:
        sub = replace(params, seed=derive_seed(seed, "particle", iteration, slot))
        step = policy.sample(prompt + particle.text, 1, sub)
        ledger.charge_policy_call()
        if not step:
            return replace(particle, terminal=True)
        cand = step[0]
        ledger.charge_tokens(cand.token_count)
        total = particle.token_total + cand.token_count
        capped = total >= token_limit and not cand.contains_eos
        return _Particle(
            thoughts=particle.thoughts + (Thought(cand.text, cand.token_count, cand.contains_eos),),
            token_total=total,
            terminal=cand.contains_eos or capped,
            token_limit_hit=capped,
        )

    rewards = [0.0] * num_particles
    for iteration in range(max_steps):
        if all(p.terminal for p in particles):
            break
        particles = [
            extend(p, iteration, slot) if not p.terminal else p
            for slot, p in enumerate(particles)
        ]
        rewards = [scorer.reward(StepTrace(problem.statement, p.steps)) for p in particles]
        total = sum(rewards)
        if total <= 0.0:
            log.info("particle_filter: all rewards zero at iteration %d; uniform weights", iteration)
            weights = [1.0 / num_particles] * num_particles
        else:
            weights = [r / total for r in rewards]
        assert abs(sum(weights) - 1.0) < 1e-9
        counts = rng.multinomial(num_particles, weights)
        resampled: list[_Particle] = []
        for idx, copies in enumerate(counts):
            resampled.extend([particles[idx]] * int(copies))
        particles = resampled
        rewards = [scorer.reward(StepTrace(problem.statement, p.steps)) for p in particles]

    terminal = [(r, p) for r, p in zip(rewards, particles) if p.terminal]
    flags: dict = {}
    if terminal:
        best_reward = max(r for r, _ in terminal)
        chosen = next(p for r, p in terminal if r == best_reward)
    else:
        log.warning("particle_filter: no terminal particle after %d iterations", max_steps)
        best_reward = max(rewards) if rewards else 0.0
        chosen = particles[rewards.index(best_reward)] if particles else _Particle(())
        flags["unanswered"] = True
    if chosen.token_limit_hit:
        flags["token_limit_hit"] = True
    flags["best_reward"] = best_reward
    return build_record(
        problem,
        "particle_filtering",
        {
            "num_particles": num_particles,
            "max_steps": max_steps,
            "temperature": params.temperature,
            "token_limit": token_limit,
        },
        chosen.text,
        ledger.snapshot(),
        flags=flags,
    )
