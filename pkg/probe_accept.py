import sys, time, math
sys.path.insert(0, "tests")

import numpy as np

from evopath.baselines import LearnParams, astar_plan, mc_train, q_train
from evopath.bench import default_horizon, gen_map
from evopath.egt import EGTParams, train
from evopath.gridworld import RewardConfig, WorldConfig
from oracles import bfs_distance, greedy_path_length, plan_conflicts

RCFG = RewardConfig()

# --- c1: 200 single-agent instances, sizes 10-30, density 0.2 ---
t0 = time.perf_counter()
bad = 0
for i in range(200):
    size = 10 + (i % 21)
    grid = gen_map(size, size, 0.2, 1, 1, seed=i)
    start = next(iter(grid.starts))
    horizon = default_horizon(size, size)
    plan = astar_plan(grid, [start], horizon)
    dist = bfs_distance(size, size, grid.obstacles, grid.goals)[start]
    if not plan.success[0] or len(plan.paths[0]) - 1 != dist:
        bad += 1
        print("c1 mismatch", i, size, plan.success[0], len(plan.paths[0]) - 1, dist)
print(f"c1: bad={bad} time={time.perf_counter()-t0:.2f}s")

# --- c2: 100 fuzzed 2-5 agent instances ---
t0 = time.perf_counter()
conflicts_found = 0
count = 0
seed = 0
while count < 100:
    size = 6 + (seed % 7)
    n_agents = 2 + (seed % 4)
    try:
        grid = gen_map(size, size, 0.2, n_agents, 2, seed=1000 + seed)
    except Exception:
        seed += 1
        continue
    starts = list(grid.starts)
    horizon = default_horizon(size, size)
    plan = astar_plan(grid, starts, horizon)
    cs = plan_conflicts(plan.paths, plan.success, horizon)
    if cs:
        conflicts_found += 1
        print("c2 conflict", seed, cs[:3])
    count += 1
    seed += 1
print(f"c2: conflicts={conflicts_found} time={time.perf_counter()-t0:.2f}s")

# --- c3: Q 10k and MC 10k on 5x5 empty ---
from evopath.gridworld import parse_map
GOAL_BR = "SSSSS\nSSSSS\nSSSSS\nSSSSS\nSSSSG\n"
grid5 = parse_map(GOAL_BR)
world5 = WorldConfig(n_agents=1, horizon=20)
dist5 = bfs_distance(5, 5, set(), {(4, 4)})
free_nongoal = [c for c in grid5.free_cells() if c != (4, 4)]

t0 = time.perf_counter()
qt, _, _ = q_train(grid5, world5, RCFG, LearnParams(episodes=10000), np.random.default_rng(0))
tq = time.perf_counter() - t0
q_ok = sum(
    greedy_path_length(5, 5, set(), {(4, 4)}, qt.greedy_action, c, 25) == dist5[c]
    for c in free_nongoal
)
print(f"c3 q: {q_ok}/{len(free_nongoal)} optimal, {tq:.2f}s")

for mseed in (0, 1, 2):
    t0 = time.perf_counter()
    mt, _, _ = mc_train(grid5, world5, RCFG, LearnParams(episodes=10000), np.random.default_rng(mseed))
    tm = time.perf_counter() - t0
    m_ok = sum(
        greedy_path_length(5, 5, set(), {(4, 4)}, mt.greedy_action, c, 25) == dist5[c]
        for c in free_nongoal
    )
    print(f"c3 mc seed {mseed}: {m_ok}/{len(free_nongoal)} optimal (need >= {math.ceil(0.95*len(free_nongoal))}), {tm:.2f}s")

# --- c5: 50x50, matched 10k budgets ---
grid50 = gen_map(50, 50, 0.2, None, 25, 7)
world50 = WorldConfig(n_agents=1, horizon=default_horizon(50, 50))
t0 = time.perf_counter()
_, _, es = train(grid50, world50, EGTParams(episodes=10000), RCFG, np.random.default_rng(3))
t_egt = time.perf_counter() - t0
t0 = time.perf_counter()
_, _, ms = mc_train(grid50, world50, RCFG, LearnParams(episodes=10000), np.random.default_rng(3))
t_mc = time.perf_counter() - t0
print(f"c5: egt updates={es.policy_updates} ({t_egt:.1f}s) mc updates={ms.policy_updates} ({t_mc:.1f}s) ratio={ms.policy_updates/max(es.policy_updates,1):.1f}")
