"""Dataset-level benchmark runner, summary aggregation, frontier export.

Runs one method over a problem list, persists one record per problem as it
completes, and writes a deterministic summary (wall times live only in the
records, so a summary reruns byte-identically with scripted backends).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from . import baselines
from .budget import BudgetLedger
from .errors import MalformedResponse, PolicyUnavailable, RewardUnavailable
from .policy import Policy, SamplingParams, render_cot_prompt
from .records import SUMMARY_SCHEMA, Problem, RunRecord, build_record, read_records
from .reward import RewardModel
from .search import ScaleControls, astar_decode
from .synthetic import derive_seed
from .trace import TraceWriter

log = logging.getLogger(__name__)


@dataclass
class BenchmarkSummary:
    method: str
    n_problems: int
    n_correct: int
    accuracy: float
    total_generated_tokens: int
    total_policy_calls: int
    total_prm_passes: int
    mean_tokens: float
    mean_policy_calls: float
    mean_prm_passes: float
    budget_parameter: int
    controls: dict
    seed: int
    per_problem: dict[str, bool] = field(default_factory=dict)
    schema: int = SUMMARY_SCHEMA

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False, indent=2)


def summarize(
    records: list[RunRecord], *, method: str, budget_parameter: int, controls: dict, seed: int
) -> BenchmarkSummary:
    n = len(records)
    correct = sum(1 for r in records if r.correct)
    tokens = sum(r.budget.get("generated_tokens", 0) for r in records)
    calls = sum(r.budget.get("policy_calls", 0) for r in records)
    passes = sum(r.budget.get("prm_passes", 0) for r in records)
    return BenchmarkSummary(
        method=method,
        n_problems=n,
        n_correct=correct,
        accuracy=correct / n if n else 0.0,
        total_generated_tokens=tokens,
        total_policy_calls=calls,
        total_prm_passes=passes,
        mean_tokens=tokens / n if n else 0.0,
        mean_policy_calls=calls / n if n else 0.0,
        mean_prm_passes=passes / n if n else 0.0,
        budget_parameter=budget_parameter,
        controls=controls,
        seed=seed,
        per_problem={r.problem_id: r.correct for r in sorted(records, key=lambda r: r.problem_id)},
    )


def _failure_record(problem: Problem, method: str, controls: dict, ledger: BudgetLedger, exc: Exception) -> RunRecord:
    log.error("problem %s failed: %s", problem.id, exc)
    return build_record(
        problem,
        method,
        controls,
        "",
        ledger.snapshot(),
        flags={"failure": f"{type(exc).__name__}: {exc}"},
    )


def run_problem(
    problem: Problem,
    method: str,
    *,
    policy: Policy,
    reward: RewardModel | None = None,
    controls: ScaleControls = ScaleControls(),
    params: SamplingParams | None = None,
    n: int = 64,
    num_particles: int = 16,
    seed: int = 0,
    prompt_style: str = "plain",
    trace_path: str | None = None,
) -> RunRecord:
    """Run one method on one problem; backend failures become failed records."""
    params = params or SamplingParams()
    ledger = BudgetLedger()
    prompt = render_cot_prompt(problem.statement) if prompt_style == "cot" else problem.statement
    problem_seed = derive_seed(seed, problem.id)
    started = time.perf_counter()
    method_controls: dict = dict(controls.to_dict()) if method == "astar" else {}
    try:
        if method == "astar":
            if reward is None:
                raise ValueError("astar needs a reward backend")
            writer_fh = open(trace_path, "w", encoding="utf-8") if trace_path else None
            try:
                result = astar_decode(
                    prompt,
                    policy,
                    reward,
                    controls,
                    params=replace(params, seed=problem_seed),
                    problem=problem.statement,
                    ledger=ledger,
                    trace_writer=TraceWriter(writer_fh) if writer_fh else None,
                )
            finally:
                if writer_fh:
                    writer_fh.close()
            flags = {"termination_reason": result.termination_reason}
            if result.fallback_used:
                flags["fallback_used"] = True
            if result.token_limit_hit:
                flags["token_limit_hit"] = True
            record = build_record(
                problem,
                "astar",
                method_controls,
                result.completion_text,
                ledger.snapshot(),
                flags=flags,
                trace_path=trace_path,
            )
        elif method == "pass_at_1":
            record = baselines.pass_at_1(
                problem, policy, params=params, token_limit=controls.token_limit,
                ledger=ledger, prompt=prompt,
            )
        elif method == "best_of_n":
            if reward is None:
                raise ValueError("best_of_n needs a reward backend")
            record = baselines.best_of_n(
                problem, policy, reward, n=n, params=params, token_limit=controls.token_limit,
                ledger=ledger, seed=problem_seed, prompt=prompt,
            )
        elif method == "self_consistency":
            record = baselines.self_consistency(
                problem, policy, n=n, params=params, token_limit=controls.token_limit,
                ledger=ledger, seed=problem_seed, prompt=prompt,
            )
        elif method == "particle_filtering":
            if reward is None:
                raise ValueError("particle_filtering needs a reward backend")
            record = baselines.particle_filter(
                problem, policy, reward, num_particles=num_particles,
                max_steps=controls.max_depth, params=params,
                token_limit=controls.token_limit, ledger=ledger,
                seed=problem_seed, prompt=prompt,
            )
        else:
            raise ValueError(f"unknown method {method!r}")
    except (PolicyUnavailable, RewardUnavailable, MalformedResponse) as exc:
        record = _failure_record(problem, method, method_controls, ledger, exc)
    record.wall_time = time.perf_counter() - started
    return record


def run_benchmark(
    problems: list[Problem],
    method: str,
    *,
    policy: Policy,
    reward: RewardModel | None = None,
    controls: ScaleControls = ScaleControls(),
    params: SamplingParams | None = None,
    n: int = 64,
    num_particles: int = 16,
    seed: int = 0,
    prompt_style: str = "plain",
    output_dir: str | None = None,
    resume: bool = False,
    workers: int = 1,
    write_traces: bool = False,
) -> BenchmarkSummary:
    """Run a method over a dataset, persisting records and a summary.

    With resume=True, problems whose ids already appear in the records file
    are skipped and their stored records count toward the summary. Records
    append in dataset order regardless of worker count.
    """
    records_path = summary_path = traces_dir = None
    existing: list[RunRecord] = []
    done_ids: set[str] = set()
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        records_path = os.path.join(output_dir, "records.jsonl")
        summary_path = os.path.join(output_dir, "summary.json")
        if write_traces:
            traces_dir = os.path.join(output_dir, "traces")
            os.makedirs(traces_dir, exist_ok=True)
        if resume and os.path.exists(records_path):
            existing = read_records(records_path)
            done_ids = {r.problem_id for r in existing}
            log.info("resuming: %d of %d problems already done", len(done_ids), len(problems))
        elif os.path.exists(records_path):
            os.remove(records_path)

    todo = [p for p in problems if p.id not in done_ids]

    def job(problem: Problem) -> RunRecord:
        trace_path = (
            os.path.join(traces_dir, f"{problem.id}.jsonl")
            if traces_dir and method == "astar"
            else None
        )
        return run_problem(
            problem,
            method,
            policy=policy,
            reward=reward,
            controls=controls,
            params=params,
            n=n,
            num_particles=num_particles,
            seed=seed,
            prompt_style=prompt_style,
            trace_path=trace_path,
        )

    fresh: list[RunRecord] = []
    sink = open(records_path, "a", encoding="utf-8") if records_path else None
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(job, p) for p in todo]
                for future in futures:  # submission order keeps the file deterministic
                    record = future.result()
                    fresh.append(record)
                    if sink:
                        sink.write(record.to_json() + "\n")
                        sink.flush()
        else:
            for problem in todo:
                record = job(problem)
                fresh.append(record)
                if sink:
                    sink.write(record.to_json() + "\n")
                    sink.flush()
    finally:
        if sink:
            sink.close()

    all_records = existing + fresh
    if method == "astar":
        budget_parameter = controls.k
        summary_controls = controls.to_dict()
    elif method == "particle_filtering":
        budget_parameter = num_particles
        summary_controls = {"num_particles": num_particles, "token_limit": controls.token_limit}
    else:
        budget_parameter = n
        summary_controls = {"n": n, "token_limit": controls.token_limit}
    summary = summarize(
        all_records,
        method=method,
        budget_parameter=budget_parameter,
        controls=summary_controls,
        seed=seed,
    )
    if summary_path:
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write(summary.to_json() + "\n")
    return summary


FRONTIER_FIELDS = ("method", "budget", "accuracy", "mean_tokens", "mean_prm_passes")


def export_frontier(summaries: list[dict | BenchmarkSummary]) -> str:
    """CSV of accuracy-versus-budget points, sorted by method then budget."""
    rows = []
    for summary in summaries:
        doc = asdict(summary) if isinstance(summary, BenchmarkSummary) else summary
        if doc.get("schema") != SUMMARY_SCHEMA:
            raise ValueError(f"unsupported summary schema {doc.get('schema')!r}")
        rows.append(
            {
                "method": doc["method"],
                "budget": doc["budget_parameter"],
                "accuracy": doc["accuracy"],
                "mean_tokens": doc["mean_tokens"],
                "mean_prm_passes": doc["mean_prm_passes"],
            }
        )
    rows.sort(key=lambda r: (r["method"], r["budget"]))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FRONTIER_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def load_summary(run_dir: str) -> dict:
    path = os.path.join(run_dir, "summary.json")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
