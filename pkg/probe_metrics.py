import sys
sys.path.insert(0, "tests")
import math

import numpy as np

from evopath.gridworld import GridMap, RewardConfig, WorldConfig, parse_map, Action
from evopath.egt import Policy, Trajectory
from evopath.metrics import EpisodeRecord, aggregate, min_obstacle_distance, rollout
from oracles import chain_success_probability, min_hazard_distance

# 1. chain oracle value
p = chain_success_probability(2, 2, [], {(0, 0)}, (1, 0), 3)
print("chain p =", p, float(p))

# 2. empirical frequency: map GS / .. one start (1,0), goal (0,0)
grid = parse_map("GS\n..\n")
print("starts:", grid.start_cells if hasattr(grid, "start_cells") else "?")
world = WorldConfig(n_agents=1, horizon=3)
rcfg = RewardConfig()
pol = Policy.uniform(grid)
n = 30000
for seed in [0, 1, 2, 3]:
    rng = np.random.default_rng(seed)
    wins = 0
    for _ in range(n):
        rec = rollout(grid, world, rcfg, pol, rng)
        wins += rec.trajectories[0].reached_goal
    freq = wins / n
    sigma = math.sqrt(float(p) * (1 - float(p)) / n)
    print(f"seed {seed}: freq={freq:.5f} |diff|={abs(freq-float(p)):.5f} 4sigma={4*sigma:.5f} ok={abs(freq-float(p)) <= 4*sigma}")

# 3. stationary clearance example
tau = Trajectory(steps=[], final=(2, 2), reached_goal=False)
g5 = parse_map("G....\n.....\n.....\n.....\n....S\n")
print("stationary (2,2) 5x5:", min_obstacle_distance(tau, g5))

# 4. sequential-vacate probe on SSG, point-mass Right
g = parse_map("SSG")
right = Policy.from_mapping(g, {c: (0.0, 0.0, 0.0, 1.0, 0.0) for c in g.free_cells()})
w1 = WorldConfig(n_agents=2, horizon=1)
for seed in range(8):
    rng = np.random.default_rng(seed)
    rec = rollout(g, w1, rcfg, right, rng)
    firsts = [t.steps[0][0] if t.steps else t.final for t in rec.trajectories]
    finals = [t.final for t in rec.trajectories]
    print(f"seed {seed}: firsts={firsts} finals={finals} reached={[t.reached_goal for t in rec.trajectories]} returns={rec.returns}")
