"""Structured search traces: written during search, verified on replay.

One JSON object per line. Event kinds: meta, push, pop, prune, expand,
rollout, final. Replay re-checks the algebraic invariants (f = g + h,
heuristic consistency, f monotonicity along edges and across pops) and
re-derives the per-depth insertion bound from the recorded controls.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

TRACE_SCHEMA = 1

# Absolute slack for float comparisons; IEEE rounding in the cost update can
# undershoot the algebraic identities by roughly one ulp.
EPS = 1e-9


class TraceCorrupt(ValueError):
    """Trace file is unreadable or structurally broken."""


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class TraceWriter:
    """Serializes search events to a line-delimited JSON stream."""

    def __init__(self, fh):
        self._fh = fh

    def _emit(self, obj: dict) -> None:
        self._fh.write(_dumps(obj) + "\n")

    def meta(self, controls: dict, prompt: str, problem: str) -> None:
        self._emit(
            {
                "event": "meta",
                "schema": TRACE_SCHEMA,
                "controls": controls,
                "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                "problem_sha256": hashlib.sha256(problem.encode("utf-8")).hexdigest(),
            }
        )

    def push(self, state, parent_id: int | None) -> None:
        self._emit(
            {
                "event": "push",
                "id": state.state_id,
                "parent": parent_id,
                "depth": state.depth,
                "g": state.g,
                "h": state.h,
                "f": state.f,
                "tokens": state.token_total,
                "goal": state.is_goal,
            }
        )

    def pop(self, state) -> None:
        self._emit(
            {
                "event": "pop",
                "id": state.state_id,
                "depth": state.depth,
                "f": state.f,
                "h": state.h,
                "goal": state.is_goal,
            }
        )

    def prune(self, parent_id: int, depth: int, h: float, tokens: int, reason: str) -> None:
        self._emit(
            {
                "event": "prune",
                "parent": parent_id,
                "depth": depth,
                "h": h,
                "tokens": tokens,
                "reason": reason,
            }
        )

    def expand(self, state_id: int, child_ids: tuple[int, ...], pruned: int) -> None:
        self._emit(
            {
                "event": "expand",
                "id": state_id,
                "children": list(child_ids),
                "pruned": pruned,
            }
        )

    def rollout(self, state, from_id: int) -> None:
        self._emit(
            {
                "event": "rollout",
                "id": state.state_id,
                "from": from_id,
                "depth": state.depth,
                "g": state.g,
                "h": state.h,
                "f": state.f,
                "tokens": state.token_total,
                "goal": state.is_goal,
            }
        )

    def final(self, reason: str, state_id: int, expanded: int, inserted: int) -> None:
        self._emit(
            {
                "event": "final",
                "reason": reason,
                "id": state_id,
                "expanded": expanded,
                "inserted": inserted,
            }
        )


@dataclass
class ReplayReport:
    path: str
    events: int = 0
    pushes: int = 0
    pops: int = 0
    violations: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        head = f"{self.path}: {self.events} events, {self.pushes} pushes, {self.pops} pops"
        if self.ok:
            return head + ", 0 violations"
        lines = [head + f", {len(self.violations)} violations"]
        lines += [f"  line {line}: {msg}" for line, msg in self.violations]
        return "\n".join(lines)


def read_trace(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                records.append(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise TraceCorrupt(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return records


def replay_trace(path: str) -> ReplayReport:
    """Re-check a stored trace against the search invariants."""
    records = read_trace(path)
    report = ReplayReport(path=path, events=len(records))
    flag = report.violations.append

    controls: dict = {}
    states: dict[int, dict] = {}
    depth_counts: dict[int, int] = {}
    popped: set[int] = set()
    last_pop_f: float | None = None
    saw_final = False

    def check_node(rec: dict, lineno: int, parent: dict | None) -> None:
        g, h, f = rec["g"], rec["h"], rec["f"]
        if not 0.0 <= h <= 1.0:
            flag((lineno, f"h={h} outside [0, 1]"))
        if g < -EPS:
            flag((lineno, f"g={g} negative"))
        if f != g + h:
            flag((lineno, f"f != g + h ({f} vs {g + h})"))
        if parent is not None:
            if rec["depth"] != parent["depth"] + 1:
                flag((lineno, f"depth {rec['depth']} not parent depth + 1"))
            if g < parent["g"]:
                flag((lineno, f"g decreased along edge ({parent['g']} -> {g})"))
            increment = max(0.0, parent["h"] - h)
            if parent["h"] > increment + h + EPS:
                flag((lineno, "heuristic consistency violated along edge"))
            if f < parent["f"] - EPS:
                flag((lineno, f"f decreased along edge ({parent['f']} -> {f})"))

    for lineno, rec in enumerate(records, start=1):
        kind = rec.get("event")
        if kind == "meta":
            if rec.get("schema") != TRACE_SCHEMA:
                raise TraceCorrupt(f"{path}: unsupported trace schema {rec.get('schema')!r}")
            controls = rec.get("controls", {})
        elif kind == "push":
            parent = states.get(rec["parent"]) if rec.get("parent") is not None else None
            if rec.get("parent") is not None and parent is None:
                flag((lineno, f"push references unknown parent {rec['parent']}"))
            check_node(rec, lineno, parent)
            states[rec["id"]] = rec
            report.pushes += 1
            if rec["depth"] > 0:
                depth_counts[rec["depth"]] = depth_counts.get(rec["depth"], 0) + 1
                cap = controls.get("breadth_cap")
                if cap is not None and depth_counts[rec["depth"]] > cap:
                    flag((lineno, f"depth {rec['depth']} exceeded breadth cap {cap}"))
        elif kind == "pop":
            report.pops += 1
            node = states.get(rec["id"])
            if node is None:
                flag((lineno, f"pop of unknown state {rec['id']}"))
            elif rec["id"] in popped:
                flag((lineno, f"state {rec['id']} popped twice"))
            elif node["f"] != rec["f"]:
                flag((lineno, f"pop f {rec['f']} disagrees with push f {node['f']}"))
            popped.add(rec["id"])
            if last_pop_f is not None and rec["f"] < last_pop_f - EPS:
                flag((lineno, f"pop sequence decreased ({last_pop_f} -> {rec['f']})"))
            last_pop_f = rec["f"]
        elif kind == "prune":
            reason = rec.get("reason")
            if reason == "breadth":
                cap = controls.get("breadth_cap")
                if cap is not None and depth_counts.get(rec["depth"], 0) < cap:
                    flag((lineno, f"breadth prune at depth {rec['depth']} before cap was reached"))
            elif reason == "threshold":
                tau = controls.get("prune_threshold")
                if tau is not None and rec["h"] <= tau:
                    flag((lineno, f"threshold prune with h={rec['h']} <= {tau}"))
            elif reason == "token_limit":
                limit = controls.get("token_limit")
                if limit is not None and rec["tokens"] < limit:
                    flag((lineno, f"token_limit prune with tokens={rec['tokens']} < {limit}"))
            else:
                flag((lineno, f"unknown prune reason {reason!r}"))
        elif kind == "expand":
            for child in rec.get("children", []):
                if child not in states:
                    flag((lineno, f"expand lists unknown child {child}"))
        elif kind == "rollout":
            parent = states.get(rec["from"])
            if parent is None:
                flag((lineno, f"rollout from unknown state {rec['from']}"))
            # Rollout nodes live outside OPEN; check algebra but not the cap.
            check_node(rec, lineno, None)
            states[rec["id"]] = rec
        elif kind == "final":
            saw_final = True
            if rec.get("inserted") is not None and rec["inserted"] != report.pushes:
                flag((lineno, f"final reports {rec['inserted']} inserted, trace has {report.pushes}"))
        else:
            flag((lineno, f"unknown event {kind!r}"))

    if not records:
        return report
    if not controls:
        flag((0, "trace has no meta event"))
    if not saw_final:
        flag((0, "trace has no final event"))
    cap = controls.get("breadth_cap")
    max_depth = controls.get("max_depth")
    if cap is not None and max_depth is not None and report.pushes > 1 + cap * max_depth:
        flag((0, f"inserted {report.pushes} states, bound is {1 + cap * max_depth}"))
    return report
