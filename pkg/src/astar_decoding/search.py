"""Best-first decoding: A* over partial step-by-step continuations.

States are trajectories of thoughts. The open set orders them by
f = g + h with h = 1 - reward and edge cost max(0, h(parent) - h(child)),
so f never decreases along a path and stays flat while the heuristic
improves. Expansion samples k candidates, scores each once, and inserts
survivors subject to a per-depth breadth cap and a heuristic threshold.
States that reach max_depth are finished with a greedy rollout.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field

from .budget import BudgetLedger
from .errors import InvariantViolation, RewardUnavailable
from .policy import Candidate, Policy, SamplingParams, Thought, greedy
from .reward import RewardModel, ScoreCache, StepTrace, heuristic_from_reward
from .trace import TraceWriter

log = logging.getLogger(__name__)

# Slack for push-time sanity checks; see trace.EPS.
EPS = 1e-9

GOAL_POPPED = "goal_popped"
BUDGET_EXHAUSTED = "budget_exhausted"
OPEN_SET_EXHAUSTED = "open_set_exhausted"
ROLLOUT_AT_DMAX = "rollout_at_dmax"


def total_cost(g: float, h: float) -> float:
    """f = g + h."""
    return g + h


def cost_increment(h_parent: float, h_child: float) -> float:
    """Edge cost: the heuristic improvement, zero when the child does not improve."""
    return max(0.0, h_parent - h_child)


@dataclass(frozen=True)
class ScaleControls:
    """Knobs that bound how much work one search may do."""

    k: int = 16  # candidate continuations per expansion
    max_depth: int = 40
    breadth_cap: int = 5  # states admitted per depth across the whole search
    prune_threshold: float = 1.0  # discard candidates with h above this; 1.0 disables
    token_limit: int = 2048  # generated tokens per trajectory
    global_token_budget: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.breadth_cap < 1:
            raise ValueError("breadth_cap must be >= 1")
        if not 0.0 <= self.prune_threshold <= 1.0:
            raise ValueError("prune_threshold must be in [0, 1]")
        if self.token_limit < 1:
            raise ValueError("token_limit must be >= 1")
        if self.global_token_budget is not None and self.global_token_budget < 1:
            raise ValueError("global_token_budget must be >= 1 when set")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "max_depth": self.max_depth,
            "breadth_cap": self.breadth_cap,
            "prune_threshold": self.prune_threshold,
            "token_limit": self.token_limit,
            "global_token_budget": self.global_token_budget,
        }


@dataclass(frozen=True)
class SearchState:
    """One partial trajectory: the prompt plus an ordered tuple of thoughts."""

    state_id: int
    thoughts: tuple[Thought, ...]
    depth: int
    g: float
    h: float
    f: float
    parent_id: int | None = None
    token_total: int = 0

    @property
    def is_goal(self) -> bool:
        return bool(self.thoughts) and self.thoughts[-1].contains_eos

    def completion_text(self) -> str:
        return "".join(t.text for t in self.thoughts)


class OpenSet:
    """Min-heap keyed by (f, h, insertion order)."""

    def __init__(self):
        self._heap: list[tuple[float, float, int, SearchState]] = []
        self._seq = itertools.count()

    def push(self, state: SearchState) -> None:
        heapq.heappush(self._heap, (state.f, state.h, next(self._seq), state))

    def pop(self) -> SearchState:
        return heapq.heappop(self._heap)[3]

    def __len__(self) -> int:
        return len(self._heap)


class DepthLedger:
    """Counts insertions per depth and enforces the per-depth cap."""

    def __init__(self, cap: int):
        self.cap = cap
        self._counts: dict[int, int] = {}

    def count(self, depth: int) -> int:
        return self._counts.get(depth, 0)

    def try_admit(self, depth: int) -> bool:
        if self._counts.get(depth, 0) >= self.cap:
            return False
        self._counts[depth] = self._counts.get(depth, 0) + 1
        return True


def prune(state: SearchState, controls: ScaleControls, depth_ledger: DepthLedger) -> bool:
    """True when the candidate must be discarded instead of inserted.

    Threshold first: a candidate over the heuristic bar never consumes a
    breadth slot. Admission increments the depth ledger as a side effect.
    """
    if state.h > controls.prune_threshold:
        return True
    return not depth_ledger.try_admit(state.depth)


@dataclass(frozen=True)
class Expansion:
    """Replay row: which state was expanded, what got inserted, what got cut."""

    state_id: int
    child_ids: tuple[int, ...]
    pruned: int


@dataclass
class SearchResult:
    final_state: SearchState
    completion_text: str
    termination_reason: str
    expanded_count: int
    inserted_count: int
    expansions: list[Expansion] = field(default_factory=list)
    token_limit_hit: bool = False
    fallback_used: bool = False


def expand(
    state: SearchState,
    policy: Policy,
    controls: ScaleControls,
    ledger: BudgetLedger,
    *,
    prefix: str,
    params: SamplingParams,
) -> tuple[list[Candidate], bool]:
    """Sample up to k continuations of `state`, charge the ledger, dedup.

    Every candidate consumed from the policy is charged, duplicates included;
    duplicates are then collapsed (first occurrence wins) so identical states
    are never scored twice. Consumption stops once the global token budget is
    crossed; the partial list is returned with budget_hit set.
    """
    raw = policy.sample(prefix, controls.k, params)
    ledger.charge_policy_call()
    if len(raw) > controls.k:
        raw = raw[: controls.k]
    kept: list[Candidate] = []
    seen: set[str] = set()
    budget_hit = False
    for cand in raw:
        ledger.charge_tokens(cand.token_count)
        if cand.text not in seen:
            seen.add(cand.text)
            kept.append(cand)
        if (
            controls.global_token_budget is not None
            and ledger.generated_tokens >= controls.global_token_budget
        ):
            budget_hit = True
            break
    return kept, budget_hit


def _check_edge(parent: SearchState, child: SearchState) -> None:
    if child.f < parent.f - EPS:
        raise InvariantViolation(
            f"f decreased along edge: {parent.f} -> {child.f} (state {child.state_id})"
        )
    if parent.h > cost_increment(parent.h, child.h) + child.h + EPS:
        raise InvariantViolation(f"consistency violated at state {child.state_id}")


def rollout(
    state: SearchState,
    policy: Policy,
    controls: ScaleControls,
    ledger: BudgetLedger,
    *,
    prompt: str,
    params: SamplingParams,
    next_id,
    trace_writer: TraceWriter | None = None,
) -> tuple[SearchState, bool, bool]:
    """Greedily extend `state` until EOS, the token limit, or the budget.

    Single continuation, no branching, temperature 0. Rollout states inherit
    the last scored heuristic; no reward passes are spent here. Returns
    (final state, token_limit_hit, budget_hit).
    """
    sampling = greedy(params)
    current = state
    token_limit_hit = False
    budget_hit = False
    while not current.is_goal:
        if current.token_total >= controls.token_limit:
            token_limit_hit = True
            break
        if (
            controls.global_token_budget is not None
            and ledger.generated_tokens >= controls.global_token_budget
        ):
            budget_hit = True
            break
        step = policy.sample(prompt + current.completion_text(), 1, sampling)
        ledger.charge_policy_call()
        if not step:
            log.warning("rollout stalled: policy returned no continuation")
            break
        cand = step[0]
        ledger.charge_tokens(cand.token_count)
        child = SearchState(
            state_id=next(next_id),
            thoughts=current.thoughts + (Thought(cand.text, cand.token_count, cand.contains_eos),),
            depth=current.depth + 1,
            g=current.g,
            h=current.h,
            f=current.f,
            parent_id=current.state_id,
            token_total=current.token_total + cand.token_count,
        )
        if trace_writer:
            trace_writer.rollout(child, current.state_id)
        current = child
    if not current.is_goal and current.token_total >= controls.token_limit:
        token_limit_hit = True
    return current, token_limit_hit, budget_hit


class _Best:
    """Tracks the best (f, h, first-seen) state among everything scored."""

    def __init__(self):
        self.state: SearchState | None = None

    def offer(self, state: SearchState) -> None:
        if self.state is None or (state.f, state.h) < (self.state.f, self.state.h):
            self.state = state


def astar_decode(
    prompt: str,
    policy: Policy,
    reward: RewardModel,
    controls: ScaleControls = ScaleControls(),
    *,
    params: SamplingParams | None = None,
    problem: str | None = None,
    ledger: BudgetLedger | None = None,
    trace_writer: TraceWriter | None = None,
) -> SearchResult:
    """Run best-first decoding from `prompt` and return the chosen trajectory.

    `problem` is what reward backends see as the task statement; it defaults
    to the prompt. The goal test happens at pop time, so the first goal
    returned is minimal under (f, h, insertion order). On exhaustion (budget
    or open set) the best-f goal seen is returned if any, else the best-f
    state overall, with fallback_used set.
    """
    params = params or SamplingParams()
    ledger = ledger or BudgetLedger()
    scorer = ScoreCache(reward, ledger)
    problem = prompt if problem is None else problem
    ids = itertools.count()

    try:
        root_h = heuristic_from_reward(scorer.reward(StepTrace(problem, ())))
    except RewardUnavailable:
        # Backends that cannot score a bare prompt start from the worst case.
        log.warning("reward backend cannot score the bare prompt; using h = 1.0")
        root_h = 1.0
    root = SearchState(
        state_id=next(ids), thoughts=(), depth=0, g=0.0, h=root_h, f=total_cost(0.0, root_h)
    )

    open_set = OpenSet()
    depth_ledger = DepthLedger(controls.breadth_cap)
    open_set.push(root)
    inserted = 1
    expanded = 0
    expansions: list[Expansion] = []
    best_seen = _Best()
    best_goal = _Best()
    best_seen.offer(root)

    if trace_writer:
        trace_writer.meta(controls.to_dict(), prompt, problem)
        trace_writer.push(root, None)

    def finish(
        reason: str,
        state: SearchState,
        *,
        token_limit_hit: bool = False,
        fallback_used: bool = False,
    ) -> SearchResult:
        if trace_writer:
            trace_writer.final(reason, state.state_id, expanded, inserted)
        return SearchResult(
            final_state=state,
            completion_text=state.completion_text(),
            termination_reason=reason,
            expanded_count=expanded,
            inserted_count=inserted,
            expansions=expansions,
            token_limit_hit=token_limit_hit,
            fallback_used=fallback_used,
        )

    def fallback() -> SearchState:
        if best_goal.state is not None:
            return best_goal.state
        return best_seen.state if best_seen.state is not None else root

    while len(open_set):
        state = open_set.pop()
        if trace_writer:
            trace_writer.pop(state)
        if state.is_goal:
            return finish(GOAL_POPPED, state)
        if state.depth >= controls.max_depth:
            final, token_limit_hit, budget_hit = rollout(
                state,
                policy,
                controls,
                ledger,
                prompt=prompt,
                params=params,
                next_id=ids,
                trace_writer=trace_writer,
            )
            reason = BUDGET_EXHAUSTED if budget_hit else ROLLOUT_AT_DMAX
            return finish(reason, final, token_limit_hit=token_limit_hit, fallback_used=budget_hit)
        if (
            controls.global_token_budget is not None
            and ledger.generated_tokens >= controls.global_token_budget
        ):
            return finish(BUDGET_EXHAUSTED, fallback(), fallback_used=True)

        candidates, budget_hit = expand(
            state,
            policy,
            controls,
            ledger,
            prefix=prompt + state.completion_text(),
            params=params,
        )
        expanded += 1
        child_ids: list[int] = []
        pruned_count = 0
        for cand in candidates:
            thoughts = state.thoughts + (Thought(cand.text, cand.token_count, cand.contains_eos),)
            r = scorer.reward(StepTrace(problem, tuple(t.text for t in thoughts)))
            h_child = heuristic_from_reward(r)
            g_child = state.g + cost_increment(state.h, h_child)
            child = SearchState(
                state_id=next(ids),
                thoughts=thoughts,
                depth=state.depth + 1,
                g=g_child,
                h=h_child,
                f=total_cost(g_child, h_child),
                parent_id=state.state_id,
                token_total=state.token_total + cand.token_count,
            )
            _check_edge(state, child)
            best_seen.offer(child)
            if child.is_goal:
                best_goal.offer(child)
            if not child.is_goal and child.token_total >= controls.token_limit:
                # Capped without EOS: not a graph node, kept only as fallback.
                pruned_count += 1
                if trace_writer:
                    trace_writer.prune(
                        state.state_id, child.depth, child.h, child.token_total, "token_limit"
                    )
                continue
            if prune(child, controls, depth_ledger):
                pruned_count += 1
                reason = "threshold" if child.h > controls.prune_threshold else "breadth"
                if trace_writer:
                    trace_writer.prune(state.state_id, child.depth, child.h, child.token_total, reason)
                continue
            open_set.push(child)
            inserted += 1
            child_ids.append(child.state_id)
            if trace_writer:
                trace_writer.push(child, state.state_id)
        expansions.append(Expansion(state.state_id, tuple(child_ids), pruned_count))
        if trace_writer:
            trace_writer.expand(state.state_id, tuple(child_ids), pruned_count)
        if budget_hit:
            return finish(BUDGET_EXHAUSTED, fallback(), fallback_used=True)

    return finish(OPEN_SET_EXHAUSTED, fallback(), fallback_used=True)
