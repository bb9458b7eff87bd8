import sys, time
sys.path.insert(0, "tests")

from evopath.bench import SweepSpec, parse_config_text, run_sweep

# grid trend: sizes {20,50,100}, goals fixed at 1
base_grid = parse_config_text(
    "algorithm=egt\nseed=11\ntiming=off\nmap.density=0.2\nmap.goals=1\n"
    "egt.episodes=auto\neval.episodes=25\n"
)
spec = SweepSpec(axis="grid_size", values=(20, 50, 100), algorithms=("astar", "egt"))
t0 = time.perf_counter()
data, summary = run_sweep(spec, base_grid)
print(f"grid trend sweep: {time.perf_counter()-t0:.1f}s")
print(summary)

# agent sweep: 100x100, values {2,10,50}
base_agents = parse_config_text(
    "algorithm=egt\nseed=11\ntiming=wall\nmap.width=100\nmap.height=100\n"
    "map.density=0.2\nmap.goals=100\negt.episodes=auto\neval.episodes=25\n"
)
spec_a = SweepSpec(axis="n_agents", values=(2, 10, 50), algorithms=("astar", "egt"))
t0 = time.perf_counter()
data_a, summary_a = run_sweep(spec_a, base_agents)
print(f"agent sweep: {time.perf_counter()-t0:.1f}s")
print(summary_a)

rows = {}
for line in summary_a.strip().splitlines()[1:]:
    parts = line.split(",")
    rows[(parts[0], int(parts[2]))] = float(parts[9]) + float(parts[10])
egt_ratio = rows[("egt", 50)] / rows[("egt", 2)]
astar_ratio = rows[("astar", 50)] / rows[("astar", 2)]
print(f"egt total-time ratio {egt_ratio:.2f} vs astar {astar_ratio:.2f} -> sublinear: {egt_ratio < astar_ratio}")
