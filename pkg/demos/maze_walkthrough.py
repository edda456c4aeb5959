"""Guided search on a grid maze, end to end.

Builds a seeded maze, runs the best-first decoder against the exact distance
oracle, draws the route, checks it against brute force, and then replays the
trace file to re-verify every logged invariant.

Run:  python3 demos/maze_walkthrough.py
"""

from astar_decoding import ScaleControls, astar_decode
from astar_decoding.toyenv import (
    MazeOracleReward,
    MazePolicy,
    brute_force_shortest,
    maze_prompt,
    random_maze,
)
from astar_decoding.trace import TraceWriter, replay_trace

MOVES = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}

# A reproducible maze. Any seed works; walls and endpoints come with it.
spec = random_maze(seed=7, max_side=11)
print(f"maze {spec.width}x{spec.height}, start {spec.start}, goal {spec.goal}, "
      f"{len(spec.walls)} walls")

# Full fan-out over the four moves with pruning effectively off: with an
# exact oracle the search must return a shortest path, so nothing may be cut.
controls = ScaleControls(k=4, max_depth=400, breadth_cap=10**9,
                         prune_threshold=1.0, token_limit=10**6)

trace_path = "maze_walkthrough_trace.jsonl"
with open(trace_path, "w", encoding="utf-8") as fh:
    result = astar_decode(
        maze_prompt(spec),
        MazePolicy(spec),
        MazeOracleReward(spec),
        controls,
        trace_writer=TraceWriter(fh),
    )

moves = [line.split()[1] for line in result.completion_text.splitlines() if line]
print(f"\nsearch finished: {result.termination_reason}, "
      f"{result.expanded_count} expansions, {result.inserted_count} insertions")
print(f"route ({len(moves)} moves): {' '.join(moves)}")

# Walk the route to collect the visited cells, then draw the grid.
route = [spec.start]
for move in moves:
    dx, dy = MOVES[move]
    x, y = route[-1]
    route.append((x + dx, y + dy))

cells = set(route)
for y in range(spec.height):
    row = ""
    for x in range(spec.width):
        if (x, y) == spec.start:
            row += "S"
        elif (x, y) == spec.goal:
            row += "G"
        elif (x, y) in spec.walls:
            row += "#"
        elif (x, y) in cells:
            row += "*"
        else:
            row += "."
    print(row)

# The exhaustive check: breadth-first search over the raw grid.
best = brute_force_shortest(spec)
print(f"\nbrute force shortest length: {best.length}")
assert len(moves) == best.length, "guided search returned a non-optimal route"
print("guided search matched the brute-force optimum")

# Every decision the search made is in the trace; replay re-derives the
# cost algebra, pop ordering, and pruning bounds from the file alone.
report = replay_trace(trace_path)
print(f"\nreplay: {report.describe()}")
assert report.ok
