"""Acceptance gate: one test per shipping criterion.

Run `pytest tests/test_acceptance.py -v` to get one pass/fail line per
criterion. Each test prints its measured numbers; use -s or -rA to see them.
The live endpoint check (criterion 9) is skipped unless ASTAR_SMOKE_BASE_URL
is set, and does not gate the rest.
"""

import json
import os
from statistics import mean
from time import perf_counter

import numpy as np
import pytest

from astar_decoding import BudgetLedger, ScaleControls, astar_decode, baselines
from astar_decoding.answers import exact_match
from astar_decoding.policy import HttpPolicy, SamplingParams
from astar_decoding.records import Problem
from astar_decoding.harness import run_benchmark, run_problem
from astar_decoding.search import GOAL_POPPED
from astar_decoding.synthetic import CodeTaskFamily, RandomTreePolicy, RandomTreeReward
from astar_decoding.toyenv import (
    MazeOracleReward,
    MazePolicy,
    brute_force_shortest,
    maze_prompt,
    random_maze,
)
from astar_decoding.trace import TraceWriter, replay_trace
from _support import MenuPolicy, RecordingPolicy, RecordingReward, reward_by_steps

DATA = os.path.join(os.path.dirname(__file__), "data")

# Full fan-out over the four moves, pruning disabled: the exact-oracle runs
# must recover shortest paths, so nothing may be cut away.
MAZE_CONTROLS = ScaleControls(
    k=4, max_depth=400, breadth_cap=10**9, prune_threshold=1.0, token_limit=10**6
)


@pytest.fixture(scope="session")
def maze_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("maze-traces")
    runs = []
    started = perf_counter()
    for seed in range(100):
        spec = random_maze(seed, max_side=15)
        path = str(out / f"maze-{seed:03d}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            result = astar_decode(
                maze_prompt(spec), MazePolicy(spec), MazeOracleReward(spec),
                MAZE_CONTROLS, trace_writer=TraceWriter(fh),
            )
        runs.append((spec, result, path))
    return runs, perf_counter() - started


def test_criterion_1_maze_search_is_optimal_and_fast(maze_runs):
    runs, elapsed = maze_runs
    optimal = 0
    for spec, result, _ in runs:
        assert result.termination_reason == GOAL_POPPED
        if result.completion_text.count("move ") == brute_force_shortest(spec).length:
            optimal += 1
    print(f"criterion 1: {optimal}/100 shortest paths in {elapsed:.2f}s")
    assert optimal == 100
    assert elapsed < 10.0


def test_criterion_2_replay_finds_no_violations(maze_runs, tmp_path):
    runs, _ = maze_runs
    paths = [path for _, _, path in runs]
    caps = (2, 3, 5)
    depths = (3, 4, 6)
    limits = (24, 48, 4096)
    taus = (0.6, 0.9, 1.0)
    for i in range(1000):
        controls = ScaleControls(
            k=2 + i % 3,
            max_depth=depths[i % len(depths)],
            breadth_cap=caps[i % len(caps)],
            prune_threshold=taus[i % len(taus)],
            token_limit=limits[i % len(limits)],
            global_token_budget=40 if i % 5 == 0 else None,
        )
        prompt = f"problem {i}\n"
        path = str(tmp_path / f"random-{i:04d}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            astar_decode(
                prompt, RandomTreePolicy(i, prompt), RandomTreeReward(i),
                controls, trace_writer=TraceWriter(fh),
            )
        paths.append(path)
    violations = 0
    for path in paths:
        violations += len(replay_trace(path).violations)
    print(f"criterion 2: {violations} violations over {len(paths)} traces")
    assert violations == 0


def test_criterion_3_insertion_stays_under_the_breadth_bound():
    worst = 0.0
    for i in range(50):
        cap = (5, 10, 20)[i % 3]
        controls = ScaleControls(
            k=6, max_depth=10, breadth_cap=cap, prune_threshold=1.0, token_limit=4096
        )
        prompt = f"bound {i}\n"
        policy = RandomTreePolicy(1000 + i, prompt, eos_prob=0.05)
        result = astar_decode(prompt, policy, RandomTreeReward(1000 + i), controls)
        bound = 1 + cap * controls.max_depth
        assert result.inserted_count <= bound
        worst = max(worst, result.inserted_count / bound)
    print(f"criterion 3: 50/50 runs within 1 + b*d; tightest margin {worst:.2f} of bound")


def test_criterion_4_ledger_matches_observed_traffic_exactly():
    checked = 0
    for i in range(100):
        prompt = f"ledger {i}\n"
        policy = RecordingPolicy(RandomTreePolicy(2000 + i, prompt))
        reward = RecordingReward(RandomTreeReward(2000 + i))
        ledger = BudgetLedger()
        controls = ScaleControls(k=3, max_depth=4, breadth_cap=3, token_limit=64)
        astar_decode(prompt, policy, reward, controls, ledger=ledger)
        snap = ledger.snapshot()
        assert snap["generated_tokens"] == policy.tokens_served
        assert snap["policy_calls"] == policy.calls
        assert snap["prm_passes"] == len(reward.keys)
        checked += 1
    print(f"criterion 4: {checked}/100 runs with exact token and scoring counts")


def test_criterion_5_guided_search_beats_best_of_64_within_budget():
    controls = ScaleControls(k=16, max_depth=10, breadth_cap=5, token_limit=512)
    astar_acc, bon_acc = [], []
    astar_tokens = bon_tokens = 0
    for seed in range(5):
        family = CodeTaskFamily(seed=seed)
        problems = family.problems(200)
        a = run_benchmark(
            problems, "astar", policy=family.policy(), reward=family.oracle(0.2),
            controls=controls, seed=seed,
        )
        b = run_benchmark(
            problems, "best_of_n", policy=family.policy(), reward=family.oracle(0.2),
            n=64, controls=controls, seed=seed,
        )
        astar_acc.append(a.accuracy)
        bon_acc.append(b.accuracy)
        astar_tokens += a.total_generated_tokens
        bon_tokens += b.total_generated_tokens
    ratio = astar_tokens / bon_tokens
    print(
        f"criterion 5: astar {mean(astar_acc):.3f} acc / {astar_tokens} tok, "
        f"best-of-64 {mean(bon_acc):.3f} acc / {bon_tokens} tok, token ratio {ratio:.3f}"
    )
    assert mean(astar_acc) >= mean(bon_acc)
    assert ratio <= 0.6


def test_criterion_6_baseline_selection_rules_hold():
    from random import Random

    # best-of-n picks the argmax reward, earliest on ties
    for seed in range(20):
        rng = Random(seed)
        menu = [f"boxed{{{i}}}. I hope it is correct.\n" for i in range(8)]
        rewards = [rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]) for _ in menu]
        expected = max(range(8), key=lambda i: (rewards[i], -i))
        problem = Problem("p", "p", "none")
        record = baselines.best_of_n(
            problem, MenuPolicy("p", menu),
            reward_by_steps({(menu[i],): rewards[i] for i in range(8)}),
            n=8, token_limit=4096,
        )
        assert record.completion_text == menu[expected]

    # self-consistency votes over normalized answers
    menu = [
        "boxed{1/2}. I hope it is correct.\n",
        "boxed{0.5}. I hope it is correct.\n",
        "boxed{3}. I hope it is correct.\n",
    ]
    record = baselines.self_consistency(
        Problem("p", "p", "2/4"), MenuPolicy("p", menu), n=3, token_limit=4096
    )
    assert record.normalized_answer == "1/2"
    assert record.correct

    # resampling weights are normalized to machine precision
    worst = 0.0
    for seed in range(50):
        rewards = np.random.default_rng(seed).uniform(0.01, 1.0, size=16)
        weights = rewards / rewards.sum()
        worst = max(worst, abs(weights.sum() - 1.0))
    assert worst < 1e-9
    prompt = "pf\n"
    record = baselines.particle_filter(  # internal normalization assert runs here
        Problem("p", prompt, "none"), RandomTreePolicy(9, prompt), RandomTreeReward(9),
        num_particles=8, max_steps=6, token_limit=64, prompt=prompt,
    )
    assert record.method == "particle_filtering"
    print(f"criterion 6: argmax 20/20, vote merge ok, worst |sum(w)-1| = {worst:.2e}")


def test_criterion_7_benchmark_runs_are_bit_reproducible(tmp_path):
    family = CodeTaskFamily(seed=0)
    problems = family.problems(5)
    controls = ScaleControls(k=16, max_depth=12, breadth_cap=5, token_limit=512)
    snapshots = []
    for i in range(20):
        out = str(tmp_path / f"run-{i:02d}")
        run_benchmark(
            problems, "astar", policy=family.policy(), reward=family.oracle(0.2),
            controls=controls, seed=0, output_dir=out, write_traces=True,
        )
        summary = open(os.path.join(out, "summary.json"), "rb").read()
        traces = tuple(
            open(os.path.join(out, "traces", name), "rb").read()
            for name in sorted(os.listdir(os.path.join(out, "traces")))
        )
        records = []
        for line in open(os.path.join(out, "records.jsonl"), encoding="utf-8"):
            doc = json.loads(line)
            doc.pop("wall_time")
            doc["trace_path"] = os.path.basename(doc["trace_path"])
            records.append(doc)
        snapshots.append((summary, traces, tuple(json.dumps(r, sort_keys=True) for r in records)))
    identical = sum(1 for snap in snapshots if snap == snapshots[0])
    print(f"criterion 7: {identical}/20 runs byte-identical")
    assert identical == 20


def test_criterion_8_curated_answer_pairs_all_classified():
    doc = json.load(open(os.path.join(DATA, "answer_pairs.json"), encoding="utf-8"))
    pairs = doc["pairs"]
    assert len(pairs) >= 40
    assert any(not row["match"] for row in pairs)
    failures = [
        row for row in pairs
        if exact_match(row["candidate"], row["reference"]) != row["match"]
    ]
    print(f"criterion 8: {len(pairs) - len(failures)}/{len(pairs)} pairs classified correctly")
    assert not failures, failures


SMOKE_URL = os.environ.get("ASTAR_SMOKE_BASE_URL")


@pytest.mark.skipif(not SMOKE_URL, reason="set ASTAR_SMOKE_BASE_URL to exercise a live endpoint")
def test_criterion_9_live_endpoint_smoke():
    policy = HttpPolicy(
        SMOKE_URL,
        os.environ.get("ASTAR_SMOKE_MODEL", "default"),
        api_mode=os.environ.get("ASTAR_SMOKE_API_MODE", "completions"),
    )
    problem = Problem("smoke", "What is $2+2$?", "4")
    record = run_problem(
        problem, "pass_at_1", policy=policy,
        params=SamplingParams(max_tokens_per_step=64), prompt_style="cot",
    )
    print(f"criterion 9: generated {record.budget['generated_tokens']} tokens, "
          f"answer {record.extracted_answer!r}")
    assert "failure" not in record.flags
    assert record.budget["generated_tokens"] > 0
