"""
Invasion testing a trained population
=====================================

"""

# The counter table can be read as a population: each (cell, action) counter
# is the head count of a strategy. The invasion test trains an incumbent,
# mixes an invader policy into it at a given share, retrains for a fraction
# of the original budget, and asks two things: did the greedy action chart
# survive, and did fitness hold up.
import numpy as np
from evopath import EGTParams, Policy, RewardConfig, WorldConfig, ess_test, gen_map

grid = gen_map(8, 8, 0.15, None, 2, 27)
world = WorldConfig(n_agents=1, horizon=32)
rcfg = RewardConfig()
params = EGTParams(episodes=50000)

# Default invader is the uniform random policy at a 10% share.
report = ess_test(grid, world, params, rcfg, 0.1, 0.1, np.random.default_rng(0))
print("uniform invader, share 0.10")
print("  greedy agreement:", report.argmax_agreement)
print("  fitness:", round(report.fitness_before, 4), "->", round(report.fitness_after, 4))
print("  stable:", report.is_ess)

# A hostile invader that never moves, injected at a 45% share. Stay actions
# lengthen episodes, failed episodes punish their counters, and the invading
# mass dies off during the retraining phase.
stay = Policy.from_text(grid, "\n".join(
    f"{x} {y} 0 0 0 0 1" for (x, y) in grid.free_cells()))
report = ess_test(grid, world, params, rcfg, 0.45, 0.1,
                  np.random.default_rng(0), invader=stay)
print("always-stay invader, share 0.45")
print("  greedy agreement:", report.argmax_agreement)
print("  fitness:", round(report.fitness_before, 4), "->", round(report.fitness_after, 4))
print("  stable:", report.is_ess)

# Control: invading a population with itself changes nothing, so with no
# retraining the agreement is exactly 1.
from evopath import train

incumbent, _, _ = train(grid, world, params, rcfg, np.random.default_rng(5))
report = ess_test(grid, world, params, rcfg, 0.1, 0.0,
                  np.random.default_rng(5), invader=incumbent)
print("self invasion control")
print("  greedy agreement:", report.argmax_agreement)
print("  extra episodes:", report.extra_episodes)
