"""
Training the counter learner on a small map
===========================================

"""

# Build a map from text. S marks a start cell, G a goal, # an obstacle,
# . a plain free cell. Rows top to bottom, x grows rightward.
from evopath import parse_map

grid = parse_map(
    "S....\n"
    ".....\n"
    ".##..\n"
    ".....\n"
    "....G\n"
)
print(grid.to_text())

# One agent, enough time to cross the board comfortably.
from evopath import WorldConfig, RewardConfig, EGTParams

world = WorldConfig(n_agents=1, horizon=20)
rewards = RewardConfig()

# Train. The learner keeps a counter per (cell, action); counters of actions
# on short successful walks are replicated, counters on failed walks decay and
# eventually go extinct. The policy is the normalized counter table with a
# small uniform exploration mix. Being an evolutionary method it wants a
# generous episode budget, but each episode touches few table entries.
import numpy as np
from evopath import train

rng = np.random.default_rng(0)
policy, table, stats = train(grid, world, EGTParams(episodes=100000), rewards, rng)
print("episodes:", stats.episodes_run, " counter updates:", stats.policy_updates)

# The greedy action per cell, drawn as arrows over the map.
from evopath import greedy_action_map

arrows = {0: "^", 1: "v", 2: "<", 3: ">", 4: "o"}
greedy = greedy_action_map(table)
for y in range(grid.height):
    row = ""
    for x in range(grid.width):
        if not grid.is_free((x, y)):
            row += "#"
        elif (x, y) in grid.goals:
            row += "G"
        else:
            row += arrows.get(int(greedy[(x, y)]), ".") if (x, y) in greedy else "."
    print(row)

# Roll the learned policy out a few hundred times and aggregate.
from evopath import rollout, aggregate

records = [rollout(grid, world, rewards, policy, rng) for _ in range(300)]
report = aggregate(records, stats=stats, horizon=world.horizon)
print("success rate:", report.success_rate)
print("mean path length:", report.mean_path_length)
print("mean return:", round(sum(r.cumulative_return for r in records) / 300, 2))
