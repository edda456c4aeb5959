"""Dataset loading and run-record serialization tests."""

import json

import pytest

from astar_decoding.errors import EmptyDataset
from astar_decoding.records import (
    METHODS,
    Problem,
    RunRecord,
    build_record,
    grade,
    load_dataset,
    read_records,
    write_dataset,
)

PROBLEM = Problem("p1", "What is $2+2$?", "4")


def _write_lines(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")


def test_load_dataset_round_trip(tmp_path):
    path = str(tmp_path / "problems.jsonl")
    problems = [PROBLEM, Problem("p2", "What is $1+1$?", "2")]
    write_dataset(path, problems)
    assert load_dataset(path) == problems


def test_load_dataset_skips_blank_lines(tmp_path):
    path = tmp_path / "problems.jsonl"
    row = {"id": "p1", "statement": "s", "reference_answer": "1"}
    path.write_text("\n" + json.dumps(row) + "\n\n", encoding="utf-8")
    assert load_dataset(str(path)) == [Problem("p1", "s", "1")]


def test_load_dataset_missing_field(tmp_path):
    path = tmp_path / "problems.jsonl"
    _write_lines(path, [{"id": "p1", "statement": "s"}])
    with pytest.raises(ValueError, match="reference_answer"):
        load_dataset(str(path))


def test_load_dataset_duplicate_id(tmp_path):
    path = tmp_path / "problems.jsonl"
    row = {"id": "p1", "statement": "s", "reference_answer": "1"}
    _write_lines(path, [row, row])
    with pytest.raises(ValueError, match="duplicate"):
        load_dataset(str(path))


def test_load_dataset_empty_file(tmp_path):
    path = tmp_path / "problems.jsonl"
    path.write_text("\n\n", encoding="utf-8")
    with pytest.raises(EmptyDataset):
        load_dataset(str(path))


def test_run_record_json_round_trip():
    record = build_record(
        PROBLEM,
        "astar",
        {"k": 4},
        "Therefore, the final answer is: boxed{4}. I hope it is correct.\n",
        {"generated_tokens": 12, "policy_calls": 1, "prm_passes": 2},
        flags={"token_limit_hit": False},
        trace_path="traces/p1.jsonl",
        wall_time=0.5,
    )
    again = RunRecord.from_json(record.to_json())
    assert again == record
    assert again.correct
    assert again.extracted_answer == "4"


def test_run_record_rejects_unknown_method():
    with pytest.raises(ValueError, match="unknown method"):
        RunRecord("p1", "beam", {}, "", None, None, False, {})


def test_run_record_rejects_unknown_schema():
    record = build_record(PROBLEM, "pass_at_1", {}, "boxed{4}", {})
    doc = json.loads(record.to_json())
    doc["schema"] = 99
    with pytest.raises(ValueError, match="schema"):
        RunRecord.from_json(json.dumps(doc))


def test_grade_paths():
    assert grade(PROBLEM, "the answer is boxed{4}.") == ("4", "4", True)
    assert grade(PROBLEM, "boxed{5}") == ("5", "5", False)
    assert grade(PROBLEM, "no marker here") == (None, None, False)
    # normalization runs on both sides before comparison
    assert grade(Problem("q", "s", "1/2"), "boxed{0.5}") == ("0.5", "1/2", True)


def test_read_records_skips_blank_lines(tmp_path):
    path = tmp_path / "records.jsonl"
    a = build_record(PROBLEM, "astar", {}, "boxed{4}", {})
    b = build_record(PROBLEM, "best_of_n", {}, "boxed{9}", {})
    path.write_text(a.to_json() + "\n\n" + b.to_json() + "\n", encoding="utf-8")
    assert read_records(str(path)) == [a, b]


def test_method_registry_is_fixed():
    assert METHODS == ("astar", "pass_at_1", "best_of_n", "self_consistency", "particle_filtering")
