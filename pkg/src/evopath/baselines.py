"""Reference competitors: space-time A*, Q-learning, first-visit Monte Carlo.

All three consume the same gridworld and reward configuration as the counter
learner. The planner is prioritized: agents are routed one at a time in index
order over the (cell, timestep) graph, with reservations keeping later agents
off earlier agents' cells and traversed edges. The tabular learners share one
table across homogeneous agents and are single threaded per run.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .egt import Policy, TrainingStats
from .gridworld import (
    Action,
    Cell,
    GridMap,
    InvalidJointStateError,
    InvalidStateError,
    N_ACTIONS,
    RewardConfig,
    WorldConfig,
    _sample_initial_ids,
    action_from_name,
    action_name,
)


@dataclass(frozen=True)
class LearnParams:
    """Shared knobs for the tabular learners.

    Exploration decays linearly from explore to explore_end over
    explore_decay_episodes (the full run when left as None, immediate when 0).
    time_budget_s, when set, stops training after the episode during which the
    wall-clock budget is exceeded.
    """

    learning_rate: float = 0.5
    discount: float = 0.95
    explore: float = 1.0
    explore_end: float = 0.05
    explore_decay_episodes: int | None = None
    episodes: int = 10000
    time_budget_s: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if not 0.0 <= self.explore <= 1.0:
            raise ValueError("explore must lie in [0, 1]")
        if not 0.0 <= self.explore_end <= self.explore:
            raise ValueError("explore_end must lie in [0, explore]")
        if self.explore_decay_episodes is not None and self.explore_decay_episodes < 0:
            raise ValueError("explore_decay_episodes must be >= 0")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.time_budget_s is not None and not self.time_budget_s > 0:
            raise ValueError("time_budget_s must be positive")

    def epsilon_at(self, episode: int) -> float:
        """Exploration rate for a 0-indexed episode."""
        decay = self.explore_decay_episodes
        if decay is None:
            decay = self.episodes
        if decay <= 0:
            return self.explore_end
        frac = min(episode / decay, 1.0)
        return self.explore + (self.explore_end - self.explore) * frac


class QTable:
    """Dense action-value estimates per free (cell, action), default 0."""

    def __init__(self, grid: GridMap, values: np.ndarray | None = None) -> None:
        self.grid = grid
        if values is None:
            values = np.zeros((grid.n_cells, N_ACTIONS))
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n_cells, N_ACTIONS):
            raise ValueError(f"values must have shape ({grid.n_cells}, {N_ACTIONS})")
        if not np.isfinite(values[grid._free_mask]).all():
            raise ValueError("Q values must be finite")
        self._values = values.copy()

    def _checked_id(self, cell: Cell) -> int:
        if not self.grid.is_free(cell):
            raise InvalidStateError(f"cell {cell} is not a free in-bounds cell")
        return self.grid.cell_id(cell)

    def get(self, cell: Cell, action: Action) -> float:
        return float(self._values[self._checked_id(cell), int(action)])

    def set(self, cell: Cell, action: Action, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError("Q values must be finite")
        self._values[self._checked_id(cell), int(action)] = value

    def greedy_action(self, cell: Cell) -> Action:
        """Largest-estimate action; ties break toward the smaller action index."""
        return Action(int(np.argmax(self._values[self._checked_id(cell)])))

    def copy(self) -> "QTable":
        return QTable(self.grid, self._values)

    def to_text(self) -> str:
        """Snapshot lines "x y action value", every free cell, 6-decimal."""
        lines = []
        for cell in self.grid.free_cells():
            cid = self.grid.cell_id(cell)
            for a in range(N_ACTIONS):
                lines.append(
                    f"{cell[0]} {cell[1]} {action_name(Action(a))} "
                    f"{self._values[cid, a]:.6f}"
                )
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, grid: GridMap, text: str) -> "QTable":
        table = cls(grid)
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"Q snapshot line {lineno}: expected 4 fields")
            cell = (int(parts[0]), int(parts[1]))
            table.set(cell, action_from_name(parts[2]), float(parts[3]))
        return table


class ReturnsAccumulator:
    """First-visit return sums and visit counts per free (cell, action).

    The running estimate is the exact arithmetic mean sum/count.
    """

    def __init__(self, grid: GridMap) -> None:
        self.grid = grid
        self._sums = np.zeros((grid.n_cells, N_ACTIONS))
        self._counts = np.zeros((grid.n_cells, N_ACTIONS), dtype=np.int64)

    def _checked_id(self, cell: Cell) -> int:
        if not self.grid.is_free(cell):
            raise InvalidStateError(f"cell {cell} is not a free in-bounds cell")
        return self.grid.cell_id(cell)

    def add(self, cell: Cell, action: Action, value: float) -> float:
        """Record one first-visit return; returns the updated average."""
        cid = self._checked_id(cell)
        a = int(action)
        self._sums[cid, a] += value
        self._counts[cid, a] += 1
        return float(self._sums[cid, a] / self._counts[cid, a])

    def count(self, cell: Cell, action: Action) -> int:
        return int(self._counts[self._checked_id(cell), int(action)])

    def average(self, cell: Cell, action: Action) -> float | None:
        """Mean recorded return, or None when the pair was never visited."""
        cid = self._checked_id(cell)
        a = int(action)
        if self._counts[cid, a] == 0:
            return None
        return float(self._sums[cid, a] / self._counts[cid, a])

    def to_qtable(self) -> QTable:
        counts = np.maximum(self._counts, 1)
        return QTable(self.grid, self._sums / counts)


@dataclass(frozen=True)
class PlanResult:
    """Planned paths, one per agent, timestep-indexed from t=0 (waits included).

    A successful path ends on a goal cell; the agent is assumed to hold its
    final cell afterwards (the planner reserves that tail). A failed path may
    end before the horizon when earlier agents' reservations leave it no
    conflict-free continuation (a cornered agent); it is conflict-free over
    the timesteps it covers, and its last cell is still reserved onward so
    later agents keep clear. expanded counts search-node expansions summed
    over agents.
    """

    paths: tuple[tuple[Cell, ...], ...]
    success: tuple[bool, ...]
    expanded: int

    @property
    def makespan(self) -> int:
        """Largest arrival time over successful agents (0 when none)."""
        times = [len(p) - 1 for p, ok in zip(self.paths, self.success) if ok]
        return max(times) if times else 0

    def to_text(self) -> str:
        """Export lines "agent t x y" in agent order."""
        lines = []
        for i, path in enumerate(self.paths):
            for t, (x, y) in enumerate(path):
                lines.append(f"{i} {t} {x} {y}")
        return "\n".join(lines) + ("\n" if lines else "")


def _min_goal_distance(grid: GridMap) -> np.ndarray:
    """Per cell id, the Manhattan distance to the nearest goal cell."""
    ids = np.arange(grid.n_cells)
    xs = ids % grid.width
    ys = ids // grid.width
    gxs = np.array([g[0] for g in sorted(grid.goals)])
    gys = np.array([g[1] for g in sorted(grid.goals)])
    return (np.abs(xs[:, None] - gxs[None, :]) + np.abs(ys[:, None] - gys[None, :])).min(axis=1)


def _reconstruct(parents: dict[tuple[int, int], int], state: tuple[int, int]) -> list[int]:
    cid, t = state
    path = [cid]
    while t > 0:
        cid = parents[(cid, t)]
        t -= 1
        path.append(cid)
    path.reverse()
    return path


def _plan_one(
    grid: GridMap,
    start_id: int,
    horizon: int,
    h: np.ndarray,
    vres: set[tuple[int, int]],
    eres: set[tuple[int, int, int]],
) -> tuple[list[int], bool, int]:
    """Route one agent around existing reservations.

    Searches the time-layered graph for a minimum-time path to a goal cell at
    which the agent can park until the horizon without hitting a reservation.
    If no goal is reachable, falls back to the longest conflict-free survival
    path (success False). Returns (path of cell ids, success, expansions).
    """
    perm = grid._perm_list
    target = grid._target_list
    goal = grid._goal_list
    expanded = 0

    def can_park(cid: int, t: int) -> bool:
        return all((cid, tt) not in vres for tt in range(t + 1, horizon + 1))

    heap: list[tuple[int, int, int]] = [(int(h[start_id]), 0, start_id)]
    parents: dict[tuple[int, int], int] = {(start_id, 0): -1}
    closed: set[tuple[int, int]] = set()
    while heap:
        f, t, cid = heapq.heappop(heap)
        if (cid, t) in closed:
            continue
        closed.add((cid, t))
        expanded += 1
        if goal[cid] and can_park(cid, t):
            return _reconstruct(parents, (cid, t)), True, expanded
        if t == horizon:
            continue
        nt = t + 1
        for a in range(N_ACTIONS):
            if not perm[cid][a]:
                continue
            nxt = target[cid][a]
            if (nxt, nt) in parents:
                continue
            if (nxt, nt) in vres:
                continue
            if nxt != cid and (nxt, cid, t) in eres:
                continue
            parents[(nxt, nt)] = cid
            heapq.heappush(heap, (nt + int(h[nxt]), nt, nxt))

    # No parkable goal: survive as long as possible (breadth first by layer).
    parents = {(start_id, 0): -1}
    frontier = [start_id]
    best = (start_id, 0)
    for t in range(horizon):
        nt = t + 1
        nxt_frontier = []
        for cid in frontier:
            for a in range(N_ACTIONS):
                if not perm[cid][a]:
                    continue
                nxt = target[cid][a]
                if (nxt, nt) in parents:
                    continue
                if (nxt, nt) in vres:
                    continue
                if nxt != cid and (nxt, cid, t) in eres:
                    continue
                parents[(nxt, nt)] = cid
                nxt_frontier.append(nxt)
        expanded += len(frontier)
        if not nxt_frontier:
            break
        frontier = nxt_frontier
        best = (min(frontier), nt)
    return _reconstruct(parents, best), False, expanded


def astar_plan(grid: GridMap, starts: list[Cell], horizon: int) -> PlanResult:
    """Plan all agents with prioritized space-time A*.

    Agents are planned in ascending index order. Each finished plan reserves
    its vertices (cell, t), its traversed edges, and a parked tail on its
    final cell through the horizon, so later agents cannot collide or swap
    with earlier ones. h = Manhattan distance to the nearest goal cell.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if not starts:
        raise ValueError("at least one start is required")
    ids = []
    for cell in starts:
        if not grid.is_free(cell):
            raise InvalidStateError(f"start {cell} is not a free in-bounds cell")
        ids.append(grid.cell_id(cell))
    if len(set(ids)) != len(ids):
        raise InvalidJointStateError("agent starts must be distinct")

    h = _min_goal_distance(grid)
    vres: set[tuple[int, int]] = set()
    eres: set[tuple[int, int, int]] = set()
    paths = []
    success = []
    expanded = 0
    for start_id in ids:
        path, ok, n = _plan_one(grid, start_id, horizon, h, vres, eres)
        expanded += n
        for t, cid in enumerate(path):
            vres.add((cid, t))
        for t in range(len(path) - 1, horizon):
            vres.add((path[-1], t + 1))
        for t in range(len(path) - 1):
            eres.add((path[t], path[t + 1], t))
        paths.append(tuple(grid.id_to_cell(cid) for cid in path))
        success.append(ok)
    return PlanResult(paths=tuple(paths), success=tuple(success), expanded=expanded)


def epsilon_greedy_policy(q: QTable, epsilon: float) -> Policy:
    """Policy that plays the greedy action with probability 1 - epsilon."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    n = q.grid.n_cells
    probs = np.full((n, N_ACTIONS), epsilon / N_ACTIONS)
    best = np.argmax(q._values, axis=1)
    probs[np.arange(n), best] += 1.0 - epsilon
    return Policy(q.grid, probs)


def _greedy(row: list[float]) -> int:
    best = 0
    bv = row[0]
    for a in range(1, N_ACTIONS):
        if row[a] > bv:
            bv = row[a]
            best = a
    return best


def q_train(
    grid: GridMap,
    world: WorldConfig,
    reward_cfg: RewardConfig,
    params: LearnParams,
    rng: np.random.Generator,
) -> tuple[QTable, Policy, TrainingStats]:
    """Tabular Q-learning with epsilon-greedy behavior.

    One shared table; every active agent's transition applies one update in
    agent index order (policy_updates counts them). Goal states are absorbing
    and bootstrap as 0. The returned Policy is the epsilon-greedy extraction
    at explore_end. The update targets the executed action (after any action
    noise), matching what the trajectory records elsewhere in the package.
    """
    t0 = time.perf_counter()
    stats = TrainingStats()
    T = world.horizon
    N = world.n_agents
    noise = world.action_noise
    lr = params.learning_rate
    gamma = params.discount
    d1, d2, d3 = reward_cfg.delta1, reward_cfg.delta2, reward_cfg.delta3
    perm = grid._perm_list
    target = grid._target_list
    goal = grid._goal_list
    padded, counts = grid._perm_choices
    padded_l = padded.tolist()
    counts_l = counts.tolist()
    ql: list[list[float]] = [[0.0] * N_ACTIONS for _ in range(grid.n_cells)]

    for e in range(params.episodes):
        if params.time_budget_s is not None and time.perf_counter() - t0 > params.time_budget_s:
            break
        eps = params.epsilon_at(e)
        r = rng.spawn(1)[0]
        ids = [int(v) for v in _sample_initial_ids(grid, N, r)]
        occupied = set(ids)
        active = [not goal[c] for c in ids]
        reached = [goal[c] for c in ids]
        n_active = sum(active)
        for _t in range(T):
            if n_active == 0:
                break
            for i in range(N):
                if not active[i]:
                    continue
                cur = ids[i]
                if r.random() < eps:
                    a = min(int(r.random() * N_ACTIONS), N_ACTIONS - 1)
                else:
                    a = _greedy(ql[cur])
                if noise > 0.0 and r.random() < noise:
                    a = padded_l[cur][int(r.random() * counts_l[cur])]
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
                if goal[nxt]:
                    r_val = d3
                    boot = 0.0
                    active[i] = False
                    reached[i] = True
                    n_active -= 1
                else:
                    r_val = d2 if blocked_map else d1
                    row = ql[nxt]
                    boot = row[0]
                    for b in range(1, N_ACTIONS):
                        if row[b] > boot:
                            boot = row[b]
                cell_row = ql[cur]
                cell_row[a] += lr * (r_val + gamma * boot - cell_row[a])
                stats.policy_updates += 1
        stats.episodes_run += 1
        stats.goal_reach_count += sum(reached)

    table = QTable(grid, np.array(ql))
    policy = epsilon_greedy_policy(table, params.explore_end)
    stats.wall_time = time.perf_counter() - t0
    return table, policy, stats


def mc_train(
    grid: GridMap,
    world: WorldConfig,
    reward_cfg: RewardConfig,
    params: LearnParams,
    rng: np.random.Generator,
) -> tuple[QTable, Policy, TrainingStats]:
    """On-policy first-visit Monte Carlo control over (cell, action) pairs.

    Per episode, the discounted return following the first occurrence of each
    pair is folded into a running average; behavior is epsilon-greedy on the
    current averages. policy_updates counts accumulator writes. The returned
    QTable holds the averages; the Policy is the epsilon-greedy extraction at
    explore_end.
    """
    t0 = time.perf_counter()
    stats = TrainingStats()
    T = world.horizon
    N = world.n_agents
    noise = world.action_noise
    gamma = params.discount
    d1, d2, d3 = reward_cfg.delta1, reward_cfg.delta2, reward_cfg.delta3
    perm = grid._perm_list
    target = grid._target_list
    goal = grid._goal_list
    padded, counts = grid._perm_choices
    padded_l = padded.tolist()
    counts_l = counts.tolist()
    n = grid.n_cells
    sums: list[list[float]] = [[0.0] * N_ACTIONS for _ in range(n)]
    cnts: list[list[int]] = [[0] * N_ACTIONS for _ in range(n)]
    est: list[list[float]] = [[0.0] * N_ACTIONS for _ in range(n)]

    for e in range(params.episodes):
        if params.time_budget_s is not None and time.perf_counter() - t0 > params.time_budget_s:
            break
        eps = params.epsilon_at(e)
        r = rng.spawn(1)[0]
        ids = [int(v) for v in _sample_initial_ids(grid, N, r)]
        occupied = set(ids)
        active = [not goal[c] for c in ids]
        reached = [goal[c] for c in ids]
        s_tr: list[list[int]] = [[] for _ in range(N)]
        a_tr: list[list[int]] = [[] for _ in range(N)]
        r_tr: list[list[float]] = [[] for _ in range(N)]
        n_active = sum(active)
        for _t in range(T):
            if n_active == 0:
                break
            for i in range(N):
                if not active[i]:
                    continue
                cur = ids[i]
                if r.random() < eps:
                    a = min(int(r.random() * N_ACTIONS), N_ACTIONS - 1)
                else:
                    a = _greedy(est[cur])
                if noise > 0.0 and r.random() < noise:
                    a = padded_l[cur][int(r.random() * counts_l[cur])]
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
                if goal[nxt]:
                    r_val = d3
                    active[i] = False
                    reached[i] = True
                    n_active -= 1
                else:
                    r_val = d2 if blocked_map else d1
                s_tr[i].append(cur)
                a_tr[i].append(a)
                r_tr[i].append(r_val)
        for i in range(N):
            rewards = r_tr[i]
            if not rewards:
                continue
            L = len(rewards)
            returns = [0.0] * L
            G = 0.0
            for t in range(L - 1, -1, -1):
                G = rewards[t] + gamma * G
                returns[t] = G
            first: dict[int, int] = {}
            for t in range(L):
                key = s_tr[i][t] * N_ACTIONS + a_tr[i][t]
                if key not in first:
                    first[key] = t
            for key, t in first.items():
                s, a = divmod(key, N_ACTIONS)
                sums[s][a] += returns[t]
                cnts[s][a] += 1
                est[s][a] = sums[s][a] / cnts[s][a]
                stats.policy_updates += 1
        stats.episodes_run += 1
        stats.goal_reach_count += sum(reached)

    table = QTable(grid, np.array(est))
    policy = epsilon_greedy_policy(table, params.explore_end)
    stats.wall_time = time.perf_counter() - t0
    return table, policy, stats
