"""Problems, per-run records, and their line-delimited serialization."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

from .answers import exact_match, extract_answer, normalize_answer
from .errors import EmptyDataset

log = logging.getLogger(__name__)

RECORD_SCHEMA = 1
SUMMARY_SCHEMA = 1

METHODS = ("astar", "pass_at_1", "best_of_n", "self_consistency", "particle_filtering")


@dataclass(frozen=True)
class Problem:
    id: str
    statement: str
    reference_answer: str


def load_dataset(path: str) -> list[Problem]:
    """Read a line-delimited problem file; every row needs all three fields."""
    problems: list[Problem] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            row = json.loads(raw)
            for key in ("id", "statement", "reference_answer"):
                if key not in row:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            pid = str(row["id"])
            if pid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate problem id {pid!r}")
            seen.add(pid)
            problems.append(Problem(pid, str(row["statement"]), str(row["reference_answer"])))
    if not problems:
        raise EmptyDataset(f"{path} contains no problems")
    return problems


def write_dataset(path: str, problems: list[Problem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in problems:
            fh.write(json.dumps(asdict(p), ensure_ascii=False) + "\n")


@dataclass
class RunRecord:
    """Outcome and spend of one method on one problem."""

    problem_id: str
    method: str
    controls: dict
    completion_text: str
    extracted_answer: str | None
    normalized_answer: str | None
    correct: bool
    budget: dict
    wall_time: float = 0.0
    trace_path: str | None = None
    flags: dict = field(default_factory=dict)
    schema: int = RECORD_SCHEMA

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, raw: str) -> "RunRecord":
        doc = json.loads(raw)
        if doc.get("schema") != RECORD_SCHEMA:
            raise ValueError(f"unsupported record schema {doc.get('schema')!r}")
        return cls(**doc)


def grade(problem: Problem, completion_text: str) -> tuple[str | None, str | None, bool]:
    """Extract, normalize, and exact-match a completion against the reference."""
    extracted = extract_answer(completion_text)
    normalized = normalize_answer(extracted) if extracted is not None else None
    return extracted, normalized, exact_match(extracted, problem.reference_answer)


def build_record(
    problem: Problem,
    method: str,
    controls: dict,
    completion_text: str,
    budget: dict,
    *,
    flags: dict | None = None,
    trace_path: str | None = None,
    wall_time: float = 0.0,
) -> RunRecord:
    extracted, normalized, correct = grade(problem, completion_text)
    return RunRecord(
        problem_id=problem.id,
        method=method,
        controls=controls,
        completion_text=completion_text,
        extracted_answer=extracted,
        normalized_answer=normalized,
        correct=correct,
        budget=budget,
        wall_time=wall_time,
        trace_path=trace_path,
        flags=flags or {},
    )


def read_records(path: str) -> list[RunRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                records.append(RunRecord.from_json(raw))
    return records
