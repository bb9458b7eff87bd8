"""Evolutionary counter learning over (cell, action) pairs.

A population table holds an integer counter per (cell, action). Counters start
undefined; trajectories that reach a goal are probabilistically accepted and
increment every visited pair, while sufficiently bad failed trajectories
decrement them. Normalizing the positive counters per cell yields a policy.
Training can either keep a uniform random behavior policy throughout
("faithful" mode) or periodically rebuild the behavior policy from the
counters ("iterative" mode, the default).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .gridworld import (
    Action,
    Cell,
    GridMap,
    InvalidStateError,
    N_ACTIONS,
    RewardConfig,
    WorldConfig,
    _sample_initial_ids,
    action_from_name,
    action_name,
    manhattan,
)

WORST_FITNESS = math.inf


@dataclass
class Trajectory:
    """One agent-episode: visited (state, action) pairs, final state, goal flag."""

    steps: list[tuple[Cell, Action]]
    final: Cell
    reached_goal: bool


def _stretch(n_steps: int, displacement: int) -> float:
    if n_steps == 0:
        return 1.0
    if displacement == 0:
        return WORST_FITNESS
    return n_steps / displacement


def fitness(tau: Trajectory) -> float:
    """Stretch factor: steps taken over Manhattan displacement (lower is fitter).

    An empty trajectory scores 1.0. A non-empty trajectory that ends on its
    own first cell has no meaningful stretch and scores WORST_FITNESS, which
    compares as +inf everywhere.
    """
    if not tau.steps:
        return 1.0
    return _stretch(len(tau.steps), manhattan(tau.steps[0][0], tau.final))


def success_update_probability(u: float, eta: float, alpha: float) -> float:
    """Acceptance probability for a goal-reaching trajectory of stretch u.

    1 - (u - 1)^alpha while u <= eta, then 1/u. Requires u >= 1 (goal-reaching
    trajectories cannot beat the Manhattan distance).
    """
    if u < 1.0:
        raise ValueError(f"stretch factor must be >= 1, got {u}")
    if u <= eta:
        return 1.0 - (u - 1.0) ** alpha
    return 1.0 / u


class CounterTable:
    """Integer counters per (cell, action); never-updated entries are undefined.

    Undefined is distinct from zero: an entry becomes defined on its first
    add() and stays defined. Entries exist only for free in-bounds cells.
    """

    def __init__(self, grid: GridMap) -> None:
        self.grid = grid
        self._values = np.zeros((grid.n_cells, N_ACTIONS), dtype=np.int64)
        self._defined = np.zeros((grid.n_cells, N_ACTIONS), dtype=bool)

    def get(self, cell: Cell, action: Action) -> int | None:
        """Counter value, or None while the entry is undefined."""
        cid = self._checked_id(cell)
        if not self._defined[cid, int(action)]:
            return None
        return int(self._values[cid, int(action)])

    def add(self, cell: Cell, action: Action, delta: int) -> int:
        """Add delta to the entry (defining it if needed); returns the new value."""
        cid = self._checked_id(cell)
        a = int(action)
        self._defined[cid, a] = True
        self._values[cid, a] += int(delta)
        return int(self._values[cid, a])

    def _checked_id(self, cell: Cell) -> int:
        if not self.grid.is_free(cell):
            raise InvalidStateError(f"cell {cell} is not a free in-bounds cell")
        return self.grid.cell_id(cell)

    def n_defined(self) -> int:
        return int(self._defined.sum())

    def items(self) -> list[tuple[tuple[Cell, Action], int]]:
        """Defined entries sorted by (x, y, action)."""
        out = []
        for cid, a in zip(*np.nonzero(self._defined)):
            cell = self.grid.id_to_cell(int(cid))
            out.append(((cell, Action(int(a))), int(self._values[cid, a])))
        out.sort(key=lambda kv: (kv[0][0], int(kv[0][1])))
        return out

    def copy(self) -> "CounterTable":
        dup = CounterTable(self.grid)
        dup._values = self._values.copy()
        dup._defined = self._defined.copy()
        return dup

    def to_text(self) -> str:
        """Snapshot lines "x y action counter" sorted by (x, y, action)."""
        lines = [
            f"{cell[0]} {cell[1]} {action_name(a)} {v}"
            for (cell, a), v in self.items()
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, grid: GridMap, text: str) -> "CounterTable":
        table = cls(grid)
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"counter snapshot line {lineno}: expected 4 fields")
            x, y, name, value = parts
            cell = (int(x), int(y))
            cid = table._checked_id(cell)
            a = int(action_from_name(name))
            table._defined[cid, a] = True
            table._values[cid, a] = int(value)
        return table


class Policy:
    """Per-cell probability vectors over the five actions (canonical order)."""

    def __init__(self, grid: GridMap, probs: np.ndarray) -> None:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (grid.n_cells, N_ACTIONS):
            raise ValueError(f"policy array must have shape ({grid.n_cells}, {N_ACTIONS})")
        if (probs < 0).any():
            raise ValueError("policy probabilities must be non-negative")
        free = grid._free_mask
        sums = probs[free].sum(axis=1)
        if len(sums) and np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError("policy rows must sum to 1 within 1e-9")
        self.grid = grid
        self._probs = probs.copy()

    @classmethod
    def uniform(cls, grid: GridMap) -> "Policy":
        return cls(grid, np.full((grid.n_cells, N_ACTIONS), 1.0 / N_ACTIONS))

    @classmethod
    def from_mapping(
        cls, grid: GridMap, cell_probs: Mapping[Cell, Sequence[float]]
    ) -> "Policy":
        """Build from a cell -> vector mapping; unmentioned cells are uniform."""
        probs = np.full((grid.n_cells, N_ACTIONS), 1.0 / N_ACTIONS)
        for cell, vec in cell_probs.items():
            probs[grid.cell_id(cell)] = np.asarray(vec, dtype=np.float64)
        return cls(grid, probs)

    @cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(self._probs, axis=1)

    def probs_at(self, cell: Cell) -> np.ndarray:
        """Probability vector for a cell (uniform for cells never assigned)."""
        return self._probs[self.grid.cell_id(cell)].copy()

    def sample(self, cell: Cell, rng: np.random.Generator) -> Action:
        return Action(self._sample_id(self.grid.cell_id(cell), rng.random()))

    def _sample_id(self, cid: int, u: float) -> int:
        # count of cumulative entries below u; identical rule in all samplers
        # (int() each term: numpy bool scalars OR under + instead of adding)
        row = self._cdf[cid]
        return int(row[0] < u) + int(row[1] < u) + int(row[2] < u) + int(row[3] < u)

    def to_text(self) -> str:
        """Snapshot lines "x y p_up p_down p_left p_right p_stay", free cells by (x, y)."""
        lines = []
        for cell in self.grid.free_cells():
            row = self._probs[self.grid.cell_id(cell)]
            vals = " ".join(f"{p:.6f}" for p in row)
            lines.append(f"{cell[0]} {cell[1]} {vals}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, grid: GridMap, text: str) -> "Policy":
        """Parse a snapshot; missing free cells become uniform, rows are renormalized."""
        probs = np.full((grid.n_cells, N_ACTIONS), 1.0 / N_ACTIONS)
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 + N_ACTIONS:
                raise ValueError(f"policy snapshot line {lineno}: expected 7 fields")
            cell = (int(parts[0]), int(parts[1]))
            if not grid.is_free(cell):
                raise InvalidStateError(f"policy snapshot line {lineno}: cell {cell} not free")
            vec = np.array([float(v) for v in parts[2:]])
            total = vec.sum()
            if not 0.999 <= total <= 1.001:
                raise ValueError(f"policy snapshot line {lineno}: row sums to {total}")
            probs[grid.cell_id(cell)] = vec / total
        return cls(grid, probs)


def construct_policy(table: CounterTable, epsilon: float, grid: GridMap) -> Policy:
    """Normalize strictly positive counters per cell, then mix in epsilon-uniform.

    Cells whose counters are all undefined or all non-positive act uniformly.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    v = table._values
    pos = table._defined & (v > 0)
    w = np.where(pos, v, 0).astype(np.float64)
    sums = w.sum(axis=1)
    has = sums > 0
    probs = np.full((grid.n_cells, N_ACTIONS), 1.0 / N_ACTIONS)
    probs[has] = w[has] / sums[has, None]
    probs = (1.0 - epsilon) * probs + epsilon / N_ACTIONS
    return Policy(grid, probs)


def greedy_action_map(table: CounterTable) -> dict[Cell, Action]:
    """Per cell with any defined counter: the largest-counter action.

    Ties break toward the smaller action index (Up < Down < Left < Right < Stay).
    Cells with no defined counters are omitted.
    """
    vals = np.where(table._defined, table._values.astype(np.float64), -np.inf)
    rows = np.flatnonzero(table._defined.any(axis=1))
    best = np.argmax(vals[rows], axis=1)
    return {
        table.grid.id_to_cell(int(cid)): Action(int(a))
        for cid, a in zip(rows, best)
    }


@dataclass(frozen=True)
class EGTParams:
    """Evolution parameters; defaults follow the workbench-wide conventions."""

    eta: float = 1.5
    alpha: float = 2.0
    beta: float = 2.0
    nu: int = 1
    mu: int = 1
    epsilon: float = 0.05
    episodes: int = 2000
    reconstruct_interval: int = 100
    behavior_mode: str = "iterative"

    def __post_init__(self) -> None:
        if not 1.0 <= self.eta <= 2.0:
            raise ValueError("eta must lie in [1, 2]")
        if not self.alpha > 1.0:
            raise ValueError("alpha must be > 1")
        if not self.beta >= 1.0:
            raise ValueError("beta must be >= 1")
        if self.nu < 1 or self.mu < 1:
            raise ValueError("nu and mu must be positive integers")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.reconstruct_interval < 1:
            raise ValueError("reconstruct_interval must be >= 1")
        if self.behavior_mode not in ("faithful", "iterative"):
            raise ValueError("behavior_mode must be 'faithful' or 'iterative'")


@dataclass
class TrainingStats:
    """Counters produced by a training run."""

    episodes_run: int = 0
    policy_updates: int = 0
    goal_reach_count: int = 0
    wall_time: float = 0.0


def _apply_update_ids(
    table: CounterTable,
    s_ids: Sequence[int],
    a_ids: Sequence[int],
    final_id: int,
    reached: bool,
    params: EGTParams,
    rng: np.random.Generator,
    stats: TrainingStats,
) -> int:
    """Core update on integer ids; returns the number of distinct pairs touched."""
    n_steps = len(s_ids)
    w = table.grid.width
    if n_steps:
        first = int(s_ids[0])
        d = abs(first % w - final_id % w) + abs(first // w - final_id // w)
    else:
        d = 0
    u = _stretch(n_steps, d)
    if reached:
        p = success_update_probability(u, params.eta, params.alpha)
        if not rng.random() < p:
            return 0
        delta = params.nu
    else:
        if not u >= params.beta:
            return 0
        delta = -params.mu
    if n_steps == 0:
        return 0
    s = np.asarray(s_ids, dtype=np.int64)
    a = np.asarray(a_ids, dtype=np.int64)
    flat = np.unique(s * N_ACTIONS + a)
    table._values[flat // N_ACTIONS, flat % N_ACTIONS] += delta
    table._defined[flat // N_ACTIONS, flat % N_ACTIONS] = True
    stats.policy_updates += 1
    return int(flat.size)


def apply_update(
    table: CounterTable,
    tau: Trajectory,
    params: EGTParams,
    rng: np.random.Generator,
) -> tuple[bool, int]:
    """Submit one trajectory to the table.

    Goal-reaching trajectories increment every visited (state, action) pair by
    nu when an acceptance draw passes (probability from
    success_update_probability); failed trajectories with stretch >= beta
    decrement by mu. Returns (modified, distinct pairs touched). Each distinct
    pair moves once per submission no matter how often the trajectory repeats
    it.
    """
    s_ids = []
    a_ids = []
    for cell, action in tau.steps:
        s_ids.append(table._checked_id(cell))
        a_ids.append(int(action))
    stats = TrainingStats()
    touched = _apply_update_ids(
        table, s_ids, a_ids, table.grid.cell_id(tau.final),
        tau.reached_goal, params, rng, stats,
    )
    return touched > 0, touched


# -- training ----------------------------------------------------------------

_BATCH = 512


def _run_episodes_batched(
    grid: GridMap,
    world: WorldConfig,
    params: EGTParams,
    table: CounterTable,
    behavior: Policy,
    rng: np.random.Generator,
    n_episodes: int,
    stats: TrainingStats,
) -> None:
    """Single-agent episodes stepped in lockstep across a batch.

    Episode randomness comes from per-episode child generators (drawn in
    episode order), so the result is bit-identical to running the episodes
    one at a time with the same behavior policy.
    """
    T = world.horizon
    noise = world.action_noise
    perm, target = grid._perm_target
    padded, counts = grid._perm_choices
    goal = grid._goal_mask
    cdf4 = behavior._cdf[:, :4]
    done = 0
    while done < n_episodes:
        B = min(_BATCH, n_episodes - done)
        children = rng.spawn(B)
        init = np.empty(B, dtype=np.int64)
        U = np.empty((B, T))
        UN = UP = None
        if noise > 0.0:
            UN = np.empty((B, T))
            UP = np.empty((B, T))
        for j, r in enumerate(children):
            init[j] = _sample_initial_ids(grid, 1, r)[0]
            U[j] = r.random((T, 1)).reshape(-1)
            if noise > 0.0:
                UN[j] = r.random((T, 1)).reshape(-1)
                UP[j] = r.random((T, 1)).reshape(-1)
        cells = init.copy()
        S = np.zeros((B, T), dtype=np.int32)
        A = np.zeros((B, T), dtype=np.int8)
        steps = np.zeros(B, dtype=np.int64)
        reached = goal[cells].copy()
        live = np.flatnonzero(~reached)
        for t in range(T):
            if live.size == 0:
                break
            c = cells[live]
            u = U[live, t]
            a = (cdf4[c] < u[:, None]).sum(axis=1)
            if noise > 0.0:
                fire = UN[live, t] < noise
                if fire.any():
                    cf = c[fire]
                    k = (UP[live, t][fire] * counts[cf]).astype(np.int64)
                    a[fire] = padded[cf, k]
            ok = perm[c, a]
            nxt = np.where(ok, target[c, a], c)
            S[live, t] = c
            A[live, t] = a
            cells[live] = nxt
            steps[live] = t + 1
            arrived = goal[nxt]
            if arrived.any():
                reached[live[arrived]] = True
                live = live[~arrived]
        for j in range(B):
            L = int(steps[j])
            if L == 0:
                continue  # started on a goal: nothing to submit
            _apply_update_ids(
                table, S[j, :L], A[j, :L], int(cells[j]),
                bool(reached[j]), params, children[j], stats,
            )
        stats.episodes_run += B
        stats.goal_reach_count += int(reached.sum())
        done += B


def _run_episode(
    grid: GridMap,
    world: WorldConfig,
    params: EGTParams,
    table: CounterTable,
    behavior: Policy,
    rng: np.random.Generator,
    stats: TrainingStats,
) -> None:
    """One multi-agent training episode with sequential conflict resolution."""
    T = world.horizon
    N = world.n_agents
    noise = world.action_noise
    perm = grid._perm_list
    target = grid._target_list
    goal = grid._goal_list
    padded, counts = grid._perm_choices
    padded_l = padded.tolist()
    counts_l = counts.tolist()
    cdf = behavior._cdf.tolist()

    ids = [int(v) for v in _sample_initial_ids(grid, N, rng)]
    U = rng.random((T, N)).tolist()
    UN = UP = None
    if noise > 0.0:
        UN = rng.random((T, N)).tolist()
        UP = rng.random((T, N)).tolist()
    occupied = set(ids)
    active = [not goal[c] for c in ids]
    reached = [goal[c] for c in ids]
    s_tr: list[list[int]] = [[] for _ in range(N)]
    a_tr: list[list[int]] = [[] for _ in range(N)]
    n_active = sum(active)
    for t in range(T):
        if n_active == 0:
            break
        Ut = U[t]
        for i in range(N):
            if not active[i]:
                continue
            cur = ids[i]
            u = Ut[i]
            row = cdf[cur]
            a = (row[0] < u) + (row[1] < u) + (row[2] < u) + (row[3] < u)
            if noise > 0.0 and UN[t][i] < noise:
                a = padded_l[cur][int(UP[t][i] * counts_l[cur])]
            s_tr[i].append(cur)
            a_tr[i].append(a)
            if perm[cur][a]:
                tgt = target[cur][a]
                if tgt != cur and tgt not in occupied:
                    occupied.discard(cur)
                    occupied.add(tgt)
                    ids[i] = tgt
            if goal[ids[i]]:
                active[i] = False
                reached[i] = True
                n_active -= 1
                _apply_update_ids(table, s_tr[i], a_tr[i], ids[i], True, params, rng, stats)
    for i in range(N):
        if active[i]:
            _apply_update_ids(table, s_tr[i], a_tr[i], ids[i], False, params, rng, stats)
    stats.episodes_run += 1
    stats.goal_reach_count += sum(reached)


def _run_episodes_looped(
    grid: GridMap,
    world: WorldConfig,
    params: EGTParams,
    table: CounterTable,
    behavior: Policy,
    rng: np.random.Generator,
    n_episodes: int,
    stats: TrainingStats,
) -> None:
    done = 0
    while done < n_episodes:
        B = min(_BATCH, n_episodes - done)
        for r in rng.spawn(B):
            _run_episode(grid, world, params, table, behavior, r, stats)
        done += B


def _multi_batch_size(n_agents: int, horizon: int, n_cells: int) -> int:
    # bound the per-batch trajectory buffers to roughly 48 MB
    per_episode = n_agents * horizon * 5 + n_cells + 1
    return max(8, min(512, 48_000_000 // per_episode))


def _run_episodes_multi(
    grid: GridMap,
    world: WorldConfig,
    params: EGTParams,
    table: CounterTable,
    behavior: Policy,
    rng: np.random.Generator,
    n_episodes: int,
    stats: TrainingStats,
) -> None:
    """Noise-free multi-agent episodes stepped in lockstep across a batch.

    Each episode keeps its own child stream (initial draw, then one row of
    action uniforms per tick, then update draws), and within a tick agents
    resolve in ascending index order against a per-episode occupancy mask, so
    the outcome is bit-identical to running _run_episode per episode.
    """
    T = world.horizon
    N = world.n_agents
    perm, target = grid._perm_target
    goal = grid._goal_mask
    cdf4 = behavior._cdf[:, :4]
    n = grid.n_cells
    done = 0
    while done < n_episodes:
        B = min(_multi_batch_size(N, T, n), n_episodes - done)
        children = rng.spawn(B)
        cells = np.empty((B, N), dtype=np.int64)
        for j, r in enumerate(children):
            cells[j] = _sample_initial_ids(grid, N, r)
        occ = np.zeros((B, n), dtype=bool)
        occ[np.arange(B)[:, None], cells] = True
        reached = goal[cells].copy()
        active = ~reached
        S = np.zeros((B, N, T), dtype=np.int32)
        A = np.zeros((B, N, T), dtype=np.int8)
        steps = np.zeros((B, N), dtype=np.int64)
        arrival = np.full((B, N), T, dtype=np.int64)
        ticks_done = 0
        for t in range(T):
            if not active.any():
                break
            U = np.empty((B, N))
            for j, r in enumerate(children):
                U[j] = r.random(N)
            ticks_done = t + 1
            for i in range(N):
                idx = np.flatnonzero(active[:, i])
                if idx.size == 0:
                    continue
                c = cells[idx, i]
                u = U[idx, i]
                a = (cdf4[c] < u[:, None]).sum(axis=1)
                S[idx, i, t] = c
                A[idx, i, t] = a
                steps[idx, i] = t + 1
                ok = perm[c, a]
                tgt = np.where(ok, target[c, a], c)
                go = (tgt != c) & ~occ[idx, tgt]
                gi = idx[go]
                occ[gi, c[go]] = False
                occ[gi, tgt[go]] = True
                nxt = np.where(go, tgt, c)
                cells[idx, i] = nxt
                arr = goal[nxt]
                if arr.any():
                    ai = idx[arr]
                    reached[ai, i] = True
                    active[ai, i] = False
                    arrival[ai, i] = t
        if ticks_done < T:
            leftover = (T - ticks_done) * N
            for r in children:
                r.random(leftover)
        for j in range(B):
            order = [
                (int(arrival[j, i]), i, True)
                for i in range(N)
                if reached[j, i] and steps[j, i] > 0
            ]
            order.sort()
            order.extend((T, i, False) for i in range(N) if active[j, i])
            for _tick, i, ok_flag in order:
                L = int(steps[j, i])
                _apply_update_ids(
                    table, S[j, i, :L], A[j, i, :L], int(cells[j, i]),
                    ok_flag, params, children[j], stats,
                )
        stats.episodes_run += B
        stats.goal_reach_count += int(reached.sum())
        done += B


def train(
    grid: GridMap,
    world: WorldConfig,
    params: EGTParams,
    reward_cfg: RewardConfig,
    rng: np.random.Generator,
) -> tuple[Policy, CounterTable, TrainingStats]:
    """Evolve a counter table over episodes and return (policy, table, stats).

    The learner is reward-free; reward_cfg is accepted for interface parity
    with the tabular learners and is not consulted. Each episode owns a child
    generator spawned from rng in episode order, so a fixed seed reproduces
    the run exactly. Agents that reach a goal submit their trajectory
    immediately and freeze in place; the rest submit at the episode end.
    """
    del reward_cfg
    t0 = time.perf_counter()
    table = CounterTable(grid)
    stats = TrainingStats()
    uniform = Policy.uniform(grid)
    if world.n_agents == 1:
        run = _run_episodes_batched
    elif world.action_noise == 0.0:
        run = _run_episodes_multi
    else:
        run = _run_episodes_looped
    e = 0
    while e < params.episodes:
        if params.behavior_mode == "iterative":
            behavior = construct_policy(table, params.epsilon, grid)
            chunk = min(params.reconstruct_interval, params.episodes - e)
        else:
            behavior = uniform
            chunk = params.episodes - e
        run(grid, world, params, table, behavior, rng, chunk, stats)
        e += chunk
    policy = construct_policy(table, params.epsilon, grid)
    stats.wall_time = time.perf_counter() - t0
    return policy, table, stats


# -- invasion test ------------------------------------------------------------


def _evaluate_fitness(
    grid: GridMap,
    world: WorldConfig,
    policy: Policy,
    rng: np.random.Generator,
    episodes: int,
) -> float:
    """Mean signed fitness (negative stretch, higher is better) over rollouts.

    The WORST sentinel is clamped to the horizon, the largest finite stretch
    any trajectory can attain, so degenerate loops cannot drag the mean to
    -inf.
    """
    T = world.horizon
    N = world.n_agents
    noise = world.action_noise
    perm = grid._perm_list
    target = grid._target_list
    goal = grid._goal_list
    padded, counts = grid._perm_choices
    padded_l = padded.tolist()
    counts_l = counts.tolist()
    cdf = policy._cdf.tolist()
    total = 0.0
    count = 0
    for r in rng.spawn(episodes):
        ids = [int(v) for v in _sample_initial_ids(grid, N, r)]
        first = ids.copy()
        U = r.random((T, N)).tolist()
        UN = UP = None
        if noise > 0.0:
            UN = r.random((T, N)).tolist()
            UP = r.random((T, N)).tolist()
        occupied = set(ids)
        active = [not goal[c] for c in ids]
        n_steps = [0] * N
        n_active = sum(active)
        for t in range(T):
            if n_active == 0:
                break
            Ut = U[t]
            for i in range(N):
                if not active[i]:
                    continue
                cur = ids[i]
                u = Ut[i]
                row = cdf[cur]
                a = (row[0] < u) + (row[1] < u) + (row[2] < u) + (row[3] < u)
                if noise > 0.0 and UN[t][i] < noise:
                    a = padded_l[cur][int(UP[t][i] * counts_l[cur])]
                n_steps[i] += 1
                if perm[cur][a]:
                    tgt = target[cur][a]
                    if tgt != cur and tgt not in occupied:
                        occupied.discard(cur)
                        occupied.add(tgt)
                        ids[i] = tgt
                if goal[ids[i]]:
                    active[i] = False
                    n_active -= 1
        w = grid.width
        for i in range(N):
            d = abs(first[i] % w - ids[i] % w) + abs(first[i] // w - ids[i] // w)
            total += -min(_stretch(n_steps[i], d), float(T))
            count += 1
    return total / count if count else -1.0


@dataclass(frozen=True)
class ESSReport:
    """Invasion-test outcome.

    fitness_before/fitness_after are the negative mean stretch (higher is
    better, -1.0 is optimal). argmax_agreement is the fraction of states,
    among those with a greedy action both before and after the invasion,
    whose greedy action is unchanged.
    """

    p_new: float
    argmax_agreement: float
    fitness_before: float
    fitness_after: float
    is_ess: bool
    states_compared: int
    extra_episodes: int


def ess_test(
    grid: GridMap,
    world: WorldConfig,
    params: EGTParams,
    reward_cfg: RewardConfig,
    p_new: float,
    extra_episode_fraction: float,
    rng: np.random.Generator,
    *,
    eval_episodes: int = 200,
    agreement_threshold: float = 0.95,
    fitness_tolerance: float = 0.05,
    invader: Policy | None = None,
) -> ESSReport:
    """Train, then continue training under an invading behavior policy.

    During the extra episodes each episode's behavior is the invader
    (uniform random unless one is supplied) with probability p_new, else the
    trained policy; counter updates keep flowing. The trained policy is an
    equilibrium for the report when its greedy map barely changes and the
    re-evaluated fitness did not drop by more than fitness_tolerance.
    """
    if not 0.0 <= p_new <= 1.0:
        raise ValueError("p_new must lie in [0, 1]")
    if extra_episode_fraction < 0.0:
        raise ValueError("extra_episode_fraction must be >= 0")
    policy, table, _ = train(grid, world, params, reward_cfg, rng)
    before = greedy_action_map(table)
    fit_before = _evaluate_fitness(grid, world, policy, rng, eval_episodes)

    extra = int(round(extra_episode_fraction * params.episodes))
    stats = TrainingStats()
    inv = invader if invader is not None else Policy.uniform(grid)
    done = 0
    while done < extra:
        B = min(_BATCH, extra - done)
        for r in rng.spawn(B):
            behavior = inv if r.random() < p_new else policy
            _run_episode(grid, world, params, table, behavior, r, stats)
        done += B

    final_policy = construct_policy(table, params.epsilon, grid)
    after = greedy_action_map(table)
    fit_after = _evaluate_fitness(grid, world, final_policy, rng, eval_episodes)

    common = sorted(set(before) & set(after))
    if common:
        agreement = sum(before[c] == after[c] for c in common) / len(common)
    else:
        agreement = 1.0
    is_ess = bool(
        agreement >= agreement_threshold
        and fit_after >= fit_before - fitness_tolerance
    )
    return ESSReport(
        p_new=p_new,
        argmax_agreement=agreement,
        fitness_before=fit_before,
        fitness_after=fit_after,
        is_ess=is_ess,
        states_compared=len(common),
        extra_episodes=extra,
    )
