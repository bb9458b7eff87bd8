"""
Prioritized space-time planning for several agents
==================================================

"""

# Three agents share one door. The planner routes them one after another;
# each finished plan reserves its cells and edges over time, so later agents
# must wait their turn instead of colliding.
from evopath import parse_map, astar_plan

grid = parse_map(
    "S.#.G\n"
    "S.#.G\n"
    "S...G\n"
    "..#..\n"
)
starts = sorted(grid.starts)
plan = astar_plan(grid, starts, horizon=16)

print("starts:", starts)
print("all reached a goal:", all(plan.success))
print("makespan:", plan.makespan, " nodes expanded:", plan.expanded)

# Replay the plan tick by tick. An agent that has arrived holds its cell.
horizon = max(len(p) for p in plan.paths)
for t in range(horizon):
    frame = [p[t] if t < len(p) else p[-1] for p in plan.paths]
    rows = [list(line) for line in grid.to_text().splitlines()]
    for i, (x, y) in enumerate(frame):
        rows[y][x] = str(i)
    print(f"t={t}")
    print("\n".join("".join(r) for r in rows))

# No two agents ever occupy one cell at the same tick, and no pair swaps
# cells between ticks. Check both by hand.
for t in range(horizon):
    frame = [p[t] if t < len(p) else p[-1] for p in plan.paths]
    assert len(set(frame)) == len(frame)
    if t:
        prev = [p[t - 1] if t - 1 < len(p) else p[-1] for p in plan.paths]
        for i in range(len(frame)):
            for j in range(i + 1, len(frame)):
                assert not (frame[i] == prev[j] and frame[j] == prev[i])
print("plan is conflict free")

# The text export round-trips through files; one line per (agent, timestep).
print(plan.to_text())
