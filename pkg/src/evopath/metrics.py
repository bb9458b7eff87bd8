"""Policy evaluation rollouts and the measurement suite.

rollout() simulates one multi-agent episode under a shared policy and records
trajectories, per-agent returns, and obstacle proximity. aggregate() folds many
episode records into a report: mean path length over successful agents,
success rates (overall and worst-start), expected minimum obstacle distance,
update counts, and timings.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .egt import Policy, TrainingStats, Trajectory
from .gridworld import (
    Action,
    Cell,
    GridMap,
    RewardConfig,
    WorldConfig,
    _sample_initial_ids,
    manhattan,
)


@dataclass(frozen=True)
class EpisodeRecord:
    """One simulated episode: per-agent trajectories and measurements.

    returns[i] is agent i's summed reward over its acting steps; the
    cumulative return is their sum. min_obstacle_distances[i] is the smallest
    distance agent i ever had to an obstacle, the boundary, or another agent.
    """

    trajectories: tuple[Trajectory, ...]
    returns: tuple[float, ...]
    cumulative_return: float
    min_obstacle_distances: tuple[int, ...]


def min_obstacle_distance(
    tau: Trajectory,
    grid: GridMap,
    others: Sequence[Sequence[Cell]] | None = None,
) -> int:
    """Smallest hazard distance over the trajectory's timesteps.

    At each tick t = 0 .. len(tau.steps) the hazard distance is the Manhattan
    distance to the nearest obstacle cell or out-of-bounds cell (the boundary
    ring counts), or to another agent's co-temporal cell when others[t] is
    given. Returns the minimum over ticks.
    """
    positions = [s for s, _ in tau.steps] + [tau.final]
    if others is not None and len(others) < len(positions):
        raise ValueError(
            f"others must cover {len(positions)} ticks, got {len(others)}"
        )
    best: int | None = None
    for t, cell in enumerate(positions):
        d = grid.obstacle_clearance(cell)
        if others is not None:
            for other in others[t]:
                dd = manhattan(cell, other)
                if dd < d:
                    d = dd
        if best is None or d < best:
            best = d
    return int(best)


def rollout(
    grid: GridMap,
    world: WorldConfig,
    reward_cfg: RewardConfig,
    policy: Policy,
    rng: np.random.Generator,
) -> EpisodeRecord:
    """Simulate one episode of N agents sharing one policy for up to T steps.

    Agents act in index order each tick with sequential conflict resolution;
    an agent that reaches a goal freezes there but keeps occupying its cell.
    Action noise is applied here (after the policy draw), so trajectories
    record the action actually executed.
    """
    T = world.horizon
    N = world.n_agents
    noise = world.action_noise
    d1, d2, d3 = reward_cfg.delta1, reward_cfg.delta2, reward_cfg.delta3
    perm = grid._perm_list
    target = grid._target_list
    goal = grid._goal_list
    padded, counts = grid._perm_choices
    padded_l = padded.tolist()
    counts_l = counts.tolist()
    cdf = policy._cdf.tolist()

    ids = [int(v) for v in _sample_initial_ids(grid, N, rng)]
    occupied = set(ids)
    active = [not goal[c] for c in ids]
    reached = [goal[c] for c in ids]
    s_tr: list[list[int]] = [[] for _ in range(N)]
    a_tr: list[list[int]] = [[] for _ in range(N)]
    ret = [0.0] * N
    history = [ids.copy()]
    n_active = sum(active)
    for _t in range(T):
        if n_active == 0:
            break
        for i in range(N):
            if not active[i]:
                continue
            cur = ids[i]
            u = rng.random()
            row = cdf[cur]
            a = (row[0] < u) + (row[1] < u) + (row[2] < u) + (row[3] < u)
            if noise > 0.0 and rng.random() < noise:
                a = padded_l[cur][int(rng.random() * counts_l[cur])]
            blocked_map = not perm[cur][a]
            nxt = cur
            if not blocked_map:
                tgt = target[cur][a]
                if tgt == cur or tgt not in occupied:
                    nxt = tgt
            if nxt != cur:
                occupied.discard(cur)
                occupied.add(nxt)
                ids[i] = nxt
            s_tr[i].append(cur)
            a_tr[i].append(a)
            if goal[nxt]:
                ret[i] += d3
                active[i] = False
                reached[i] = True
                n_active -= 1
            else:
                ret[i] += d2 if blocked_map else d1
        history.append(ids.copy())

    w = grid.width
    trajectories = []
    for i in range(N):
        steps = [
            (((s % w), (s // w)), Action(a)) for s, a in zip(s_tr[i], a_tr[i])
        ]
        trajectories.append(
            Trajectory(steps=steps, final=(ids[i] % w, ids[i] // w), reached_goal=reached[i])
        )

    clearance = grid._clearance
    distances = []
    for i in range(N):
        L = len(s_tr[i])
        best = None
        for t in range(L + 1):
            cid = (s_tr[i][t] if t < L else ids[i])
            d = int(clearance[cid])
            x, y = cid % w, cid // w
            row = history[t] if t < len(history) else history[-1]
            for j in range(N):
                if j == i:
                    continue
                oid = row[j]
                dd = abs(x - oid % w) + abs(y - oid // w)
                if dd < d:
                    d = dd
            if best is None or d < best:
                best = d
        distances.append(best)

    return EpisodeRecord(
        trajectories=tuple(trajectories),
        returns=tuple(ret),
        cumulative_return=float(sum(ret)),
        min_obstacle_distances=tuple(distances),
    )


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated evaluation measurements.

    mean_path_length averages moves over goal-reaching agent-episodes only;
    when no agent-episode succeeded it falls back to the horizon and
    mean_path_length_is_fallback is set. min_agent_success_rate is the worst
    per-start-cell success fraction.
    """

    mean_path_length: float
    mean_path_length_is_fallback: bool
    success_rate: float
    min_agent_success_rate: float
    expected_min_obstacle_distance: float
    policy_updates: int
    train_time: float
    run_time: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError("success_rate must lie in [0, 1]")
        if not 0.0 <= self.min_agent_success_rate <= 1.0:
            raise ValueError("min_agent_success_rate must lie in [0, 1]")


def aggregate(
    records: Sequence[EpisodeRecord],
    stats: TrainingStats | None = None,
    timers: Mapping[str, float] | None = None,
    *,
    horizon: int | None = None,
) -> MetricsReport:
    """Fold episode records into a MetricsReport.

    timers may carry "train_time" and "run_time" (train_time defaults to
    stats.wall_time). horizon feeds the no-success fallback path length; when
    omitted it falls back to the longest observed trajectory.
    """
    if not records:
        raise ValueError("aggregate requires at least one record")
    lengths = []
    successes = 0
    total = 0
    by_start: dict[Cell, list[int]] = {}
    dist_sum = 0.0
    max_len = 0
    for rec in records:
        for tau, dmin in zip(rec.trajectories, rec.min_obstacle_distances):
            total += 1
            L = len(tau.steps)
            max_len = max(max_len, L)
            start = tau.steps[0][0] if tau.steps else tau.final
            ok = tau.reached_goal
            if ok:
                successes += 1
                lengths.append(L)
            by_start.setdefault(start, []).append(1 if ok else 0)
            dist_sum += dmin
    if lengths:
        mean_len = sum(lengths) / len(lengths)
        fallback = False
    else:
        mean_len = float(horizon if horizon is not None else max_len)
        fallback = True
    timers = timers or {}
    train_time = timers.get("train_time", stats.wall_time if stats else 0.0)
    run_time = timers.get("run_time", 0.0)
    return MetricsReport(
        mean_path_length=mean_len,
        mean_path_length_is_fallback=fallback,
        success_rate=successes / total,
        min_agent_success_rate=min(sum(v) / len(v) for v in by_start.values()),
        expected_min_obstacle_distance=dist_sum / total,
        policy_updates=stats.policy_updates if stats else 0,
        train_time=float(train_time),
        run_time=float(run_time),
    )
