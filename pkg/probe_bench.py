import sys, time
sys.path.insert(0, "tests")

from evopath.bench import (
    GenerationError, SweepSpec, default_episode_budget, default_horizon,
    experiment_from_config, gen_map, parse_config_text, run_experiment, run_sweep,
)
from oracles import bfs_distance

# obstacle counts at 20x20 density 0.2, band 80 +/- 24
for seed in range(5):
    g = gen_map(20, 20, 0.2, None, 4, seed)
    n_obs = len(g.obstacles)
    print(f"seed {seed}: obstacles={n_obs} in_band={56 <= n_obs <= 104} starts={len(g.starts)} goals={len(g.goals)}")

g1 = gen_map(20, 20, 0.2, None, 4, 3)
g2 = gen_map(20, 20, 0.2, None, 4, 3)
print("deterministic:", g1.to_text() == g2.to_text())
print("differs across seeds:", gen_map(20, 20, 0.2, None, 4, 0).to_text() != g1.to_text())

# infeasible: 2x2, 4 goals
t0 = time.perf_counter()
try:
    gen_map(2, 2, 0.9, None, 4, 0)
except GenerationError as e:
    print("GenerationError ok", round(time.perf_counter() - t0, 3), "s")

# explicit starts
g = gen_map(5, 5, 0.0, 3, 2, 11)
print("explicit:", len(g.starts), len(g.goals), set(g.starts) & g.goals)

# connectivity oracle check
g = gen_map(10, 10, 0.3, None, 2, 5)
reach = bfs_distance(10, 10, g.obstacles, g.goals)
print("all starts reach:", all(s in reach for s in g.starts))

# tiny sweep
base = parse_config_text(
    "algorithm=egt\nseed=9\ntiming=off\nmap.density=0.1\nmap.goals=1\n"
    "world.horizon=12\negt.episodes=30\neval.episodes=2\nlearn.episodes=60\n"
)
spec = SweepSpec(axis="grid_size", values=(4, 6), algorithms=("astar", "egt"), reps=1)
t0 = time.perf_counter()
data, summary = run_sweep(spec, base)
print("sweep time:", round(time.perf_counter() - t0, 2), "s")
print(data)
print(summary)

# error-cell sweep: value 1 infeasible
spec_err = SweepSpec(axis="grid_size", values=(1, 4), algorithms=("egt",), reps=1)
t0 = time.perf_counter()
data_e, summary_e = run_sweep(spec_err, base)
print("err sweep time:", round(time.perf_counter() - t0, 2), "s")
print(data_e)
print(summary_e)
