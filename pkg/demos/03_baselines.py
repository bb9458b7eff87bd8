"""
Counter learner vs Q-learning vs Monte Carlo control
====================================================

"""

# One random 8x8 board, 15% obstacle density, two goals. Every free cell is a
# legal start, so evaluation averages over the whole board.
import numpy as np
from evopath import (
    EGTParams,
    LearnParams,
    RewardConfig,
    WorldConfig,
    aggregate,
    gen_map,
    mc_train,
    q_train,
    rollout,
    train,
)

grid = gen_map(8, 8, 0.15, None, 2, 27)
print(grid.to_text())

world = WorldConfig(n_agents=1, horizon=32)
rcfg = RewardConfig()


def evaluate(policy, stats, label):
    rng = np.random.default_rng(99)
    records = [rollout(grid, world, rcfg, policy, rng) for _ in range(500)]
    rep = aggregate(records, stats=stats, horizon=world.horizon)
    print(
        f"{label:<14} success={rep.success_rate:5.3f}"
        f"  mean_len={rep.mean_path_length:5.2f}"
        f"  updates={rep.policy_updates:>7}"
        f"  train_s={rep.train_time:.2f}"
    )


# Everyone gets the same 10000-episode budget. The step learners write their
# table on every transition; the counter learner touches at most a handful of
# entries per episode. Same success, slightly longer paths, and an order of
# magnitude fewer table writes.
print("matched budget, 10000 episodes:")
_, qpol, qstats = q_train(grid, world, rcfg, LearnParams(episodes=10000), np.random.default_rng(0))
evaluate(qpol, qstats, "qlearn")
_, mpol, mstats = mc_train(grid, world, rcfg, LearnParams(episodes=10000), np.random.default_rng(0))
evaluate(mpol, mstats, "mc")
epol, _, estats = train(grid, world, EGTParams(episodes=10000), rcfg, np.random.default_rng(0))
evaluate(epol, estats, "egt")

# Let the counter learner run ten times longer and the paths tighten, while
# its total writes only now reach what the baselines spent on a tenth of the
# episodes. Episodes are cheap for this method; table writes are where it
# saves.
print()
print("counter learner, 100000 episodes:")
epol, _, estats = train(grid, world, EGTParams(episodes=100000), rcfg, np.random.default_rng(0))
evaluate(epol, estats, "egt x10")
