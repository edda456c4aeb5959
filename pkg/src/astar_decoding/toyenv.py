"""Deterministic toy decoding environments with exact oracles.

Grid mazes and countdown arithmetic rendered as text trajectories, so the
search core runs on them through the ordinary policy and reward interfaces.
Reaching the goal cell (or the target number) maps to EOS. Oracles are
independent of the search: plain BFS for mazes, exhaustive enumeration for
countdown.
"""

from __future__ import annotations

import logging
import re
from collections import Counter, deque
from dataclasses import dataclass
from random import Random

from .errors import NoGoalReachable
from .policy import Candidate, Policy, SamplingParams, count_tokens
from .reward import RewardModel, StepTrace
from .search import cost_increment

log = logging.getLogger(__name__)

Cell = tuple[int, int]

# Fixed expansion order; (dx, dy) with y growing southward.
MOVES: tuple[tuple[str, tuple[int, int]], ...] = (
    ("N", (0, -1)),
    ("E", (1, 0)),
    ("S", (0, 1)),
    ("W", (-1, 0)),
)

_MOVE_RE = re.compile(r"move ([NESW])")


@dataclass(frozen=True)
class MazeSpec:
    width: int
    height: int
    walls: frozenset[Cell]
    start: Cell
    goal: Cell

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError("maze must be at least 2x2")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self.in_bounds(cell):
                raise ValueError(f"{name} {cell} out of bounds")
            if cell in self.walls:
                raise ValueError(f"{name} {cell} is a wall")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def open_cell(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls


def maze_prompt(spec: MazeSpec) -> str:
    walls = ";".join(f"{x},{y}" for x, y in sorted(spec.walls))
    return (
        f"maze {spec.width}x{spec.height} start {spec.start[0]},{spec.start[1]} "
        f"goal {spec.goal[0]},{spec.goal[1]} walls {walls}\n"
    )


def bfs_distances(spec: MazeSpec, source: Cell) -> dict[Cell, int]:
    """Shortest step counts from source to every reachable open cell."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x, y = queue.popleft()
        for _, (dx, dy) in MOVES:
            nxt = (x + dx, y + dy)
            if spec.open_cell(nxt) and nxt not in dist:
                dist[nxt] = dist[(x, y)] + 1
                queue.append(nxt)
    return dist


def _replay_moves(spec: MazeSpec, text: str) -> Cell:
    cell = spec.start
    table = dict(MOVES)
    for name in _MOVE_RE.findall(text):
        dx, dy = table[name]
        nxt = (cell[0] + dx, cell[1] + dy)
        if not spec.open_cell(nxt):
            raise ValueError(f"illegal move {name} from {cell}")
        cell = nxt
    return cell


class MazePolicy(Policy):
    """Enumerates legal moves from the cell the prefix walks to.

    Pure and exhaustive: candidates come in fixed N, E, S, W order, and the
    move that lands on the goal carries EOS.
    """

    def __init__(self, spec: MazeSpec):
        self.spec = spec

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        cell = _replay_moves(self.spec, prefix)
        out: list[Candidate] = []
        for name, (dx, dy) in MOVES:
            if len(out) == k:
                break
            nxt = (cell[0] + dx, cell[1] + dy)
            if not self.spec.open_cell(nxt):
                continue
            text = f"move {name}\n"
            eos = nxt == self.spec.goal
            out.append(
                Candidate(
                    text=text,
                    token_count=count_tokens(text),
                    contains_eos=eos,
                    finish_reason="eos" if eos else "stop_marker",
                )
            )
        return out


class MazeOracleReward(RewardModel):
    """Exact progress reward: 1 - d(cell, goal) / max distance on the grid.

    Admissible and consistent for the move set; adjacent cells differ by at
    most one BFS step, so h moves by at most 1 / max distance per edge. When
    the goal is unreachable from the start every state scores 0 (flagged).
    """

    def __init__(self, spec: MazeSpec):
        self.spec = spec
        self._dist = bfs_distances(spec, spec.goal)
        self.goal_reachable = spec.start in self._dist
        self.max_distance = max(self._dist.values()) if len(self._dist) > 1 else 1
        if not self.goal_reachable:
            log.warning("goal unreachable from start; oracle returns 0 everywhere")

    def score(self, trace: StepTrace) -> float:
        if not self.goal_reachable:
            return 0.0
        cell = _replay_moves(self.spec, "".join(trace.steps))
        if cell not in self._dist:
            return 0.0
        return 1.0 - self._dist[cell] / self.max_distance


@dataclass(frozen=True)
class ShortestPath:
    length: int
    path_cost: float
    moves: tuple[str, ...]


def brute_force_shortest(spec: MazeSpec) -> ShortestPath:
    """BFS-optimal route and its cost under the search's edge-cost rule.

    Independent of the A* implementation; used as the optimality oracle.
    Raises NoGoalReachable when no route exists.
    """
    dist_to_goal = bfs_distances(spec, spec.goal)
    if spec.start not in dist_to_goal:
        raise NoGoalReachable(f"goal {spec.goal} unreachable from {spec.start}")
    max_distance = max(dist_to_goal.values())
    moves: list[str] = []
    cell = spec.start
    cost = 0.0
    h_here = dist_to_goal[cell] / max_distance
    while cell != spec.goal:
        for name, (dx, dy) in MOVES:
            nxt = (cell[0] + dx, cell[1] + dy)
            if spec.open_cell(nxt) and dist_to_goal.get(nxt, -1) == dist_to_goal[cell] - 1:
                h_next = dist_to_goal[nxt] / max_distance
                cost += cost_increment(h_here, h_next)
                h_here = h_next
                moves.append(name)
                cell = nxt
                break
    return ShortestPath(length=len(moves), path_cost=cost, moves=tuple(moves))


def random_maze(seed: int, *, max_side: int = 15, wall_density: float = 0.25) -> MazeSpec:
    """Seeded random maze with a guaranteed route from start to goal."""
    rng = Random(seed)
    for _ in range(1000):
        width = rng.randint(4, max_side)
        height = rng.randint(4, max_side)
        cells = [(x, y) for x in range(width) for y in range(height)]
        start, goal = rng.sample(cells, 2)
        walls = frozenset(
            c for c in cells if c not in (start, goal) and rng.random() < wall_density
        )
        spec = MazeSpec(width, height, walls, start, goal)
        if spec.goal in bfs_distances(spec, spec.start):
            return spec
    raise RuntimeError(f"could not generate a solvable maze for seed {seed}")


# ---------------------------------------------------------------------------
# Countdown

_OP_RE = re.compile(r"^(\d+) ([+\-*/]) (\d+) = (\d+)$")


@dataclass(frozen=True)
class CountdownSpec:
    numbers: tuple[int, ...]
    target: int

    def __post_init__(self) -> None:
        if not self.numbers:
            raise ValueError("countdown needs at least one number")
        if any(n < 1 for n in self.numbers) or self.target < 1:
            raise ValueError("countdown works on positive integers")


def countdown_prompt(spec: CountdownSpec) -> str:
    return f"numbers: {' '.join(str(n) for n in spec.numbers)} target: {spec.target}\n"


def _available_numbers(spec: CountdownSpec, text: str) -> Counter:
    pool = Counter(spec.numbers)
    for line in text.splitlines():
        m = _OP_RE.match(line.strip())
        if not m:
            continue
        a, op, b, c = int(m.group(1)), m.group(2), int(m.group(3)), int(m.group(4))
        for used in (a, b):
            if pool[used] < 1:
                raise ValueError(f"step reuses unavailable number {used}")
            pool[used] -= 1
        pool[c] += 1
    return +pool


def _pair_results(a: int, b: int):
    """Legal op applications on an ordered pair, larger operand first."""
    hi, lo = max(a, b), min(a, b)
    yield hi, "+", lo, hi + lo
    if hi - lo >= 1:
        yield hi, "-", lo, hi - lo
    yield hi, "*", lo, hi * lo
    if lo >= 1 and hi % lo == 0:
        yield hi, "/", lo, hi // lo


class CountdownPolicy(Policy):
    """Enumerates one-operator applications over the available numbers.

    Pairs are taken from the pool sorted descending, ops in +, -, *, /
    order, truncated to k. Exact division only; a step that produces the
    target (or the target already being available) carries EOS.
    """

    def __init__(self, spec: CountdownSpec):
        self.spec = spec

    def sample(self, prefix: str, k: int, params: SamplingParams) -> list[Candidate]:
        text = prefix.split("\n", 1)[1] if "\n" in prefix else ""
        pool = _available_numbers(self.spec, text)
        out: list[Candidate] = []
        if self.spec.target in pool:
            done = f"{self.spec.target} available; done\n"
            out.append(Candidate(done, count_tokens(done), True, "eos"))
        values = sorted(pool.elements(), reverse=True)
        seen: set[str] = set()
        for i in range(len(values)):
            for j in range(i + 1, len(values)):
                for a, op, b, c in _pair_results(values[i], values[j]):
                    line = f"{a} {op} {b} = {c}\n"
                    if line in seen:
                        continue
                    seen.add(line)
                    if len(out) == k:
                        return out
                    eos = c == self.spec.target
                    out.append(Candidate(line, count_tokens(line), eos, "eos" if eos else "stop_marker"))
        return out[:k]


def countdown_solvable(spec: CountdownSpec) -> bool:
    """Exhaustive check that some op sequence reaches the target."""
    seen: set[tuple[tuple[int, int], ...]] = set()

    def explore(pool: Counter) -> bool:
        if spec.target in pool:
            return True
        key = tuple(sorted(pool.items()))
        if key in seen:
            return False
        seen.add(key)
        values = sorted(pool.elements(), reverse=True)
        for i in range(len(values)):
            for j in range(i + 1, len(values)):
                for _, _, _, c in _pair_results(values[i], values[j]):
                    nxt = pool.copy()
                    nxt[values[i]] -= 1
                    nxt[values[j]] -= 1
                    nxt[c] += 1
                    if explore(+nxt):
                        return True
        return False

    return explore(Counter(spec.numbers))
