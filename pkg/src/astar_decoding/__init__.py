"""Best-first (A*) decoding over step-structured trajectories.

Search, baselines, toy environments with exact oracles, and an eval
harness with budget accounting and replayable traces.
"""

from .answers import exact_match, extract_answer, normalize_answer
from .baselines import best_of_n, particle_filter, pass_at_1, self_consistency
from .budget import BudgetLedger
from .harness import BenchmarkSummary, export_frontier, run_benchmark, run_problem, summarize
from .policy import (
    Candidate,
    HttpPolicy,
    Policy,
    SamplingParams,
    ScriptedPolicy,
    Thought,
    render_cot_prompt,
    segment,
)
from .records import Problem, RunRecord, load_dataset
from .reward import (
    CallableReward,
    ConstantReward,
    HttpProcessReward,
    RewardModel,
    ScoreCache,
    StepTrace,
    format_reward_request,
    heuristic_from_reward,
)
from .search import (
    Expansion,
    OpenSet,
    ScaleControls,
    SearchResult,
    SearchState,
    astar_decode,
    cost_increment,
    total_cost,
)
from .trace import ReplayReport, TraceWriter, replay_trace

__all__ = [
    "BenchmarkSummary",
    "BudgetLedger",
    "CallableReward",
    "Candidate",
    "ConstantReward",
    "Expansion",
    "HttpPolicy",
    "HttpProcessReward",
    "OpenSet",
    "Policy",
    "Problem",
    "ReplayReport",
    "RewardModel",
    "RunRecord",
    "SamplingParams",
    "ScaleControls",
    "ScoreCache",
    "ScriptedPolicy",
    "SearchResult",
    "SearchState",
    "StepTrace",
    "Thought",
    "TraceWriter",
    "astar_decode",
    "best_of_n",
    "cost_increment",
    "exact_match",
    "export_frontier",
    "extract_answer",
    "format_reward_request",
    "heuristic_from_reward",
    "load_dataset",
    "normalize_answer",
    "particle_filter",
    "pass_at_1",
    "render_cot_prompt",
    "run_benchmark",
    "run_problem",
    "segment",
    "self_consistency",
    "summarize",
    "total_cost",
]
