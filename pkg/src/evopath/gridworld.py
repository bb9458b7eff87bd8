"""Grid world for multi-agent path finding.

Cells are (x, y) tuples where x is the column (growing rightward) and y is
the row (growing downward), so Up decreases y and Down increases it. Agents
have five actions: the four grid moves plus Stay. A move whose target is
outside the grid or an obstacle is impermissible; taking it leaves the agent
in place. Multiple agents are resolved sequentially in ascending index order,
which makes same-cell and swap conflicts block the later (or both) movers.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum, IntFlag
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

Cell = tuple[int, int]


class Action(IntEnum):
    """The five actions in canonical order (also the tie-breaking order)."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


ACTIONS: tuple[Action, ...] = tuple(Action)
N_ACTIONS = len(ACTIONS)

_DELTAS: dict[Action, Cell] = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.STAY: (0, 0),
}


def action_delta(action: Action) -> Cell:
    """(dx, dy) displacement of an action."""
    return _DELTAS[Action(action)]


def action_name(action: Action) -> str:
    return Action(action).name.lower()


def action_from_name(name: str) -> Action:
    try:
        return Action[name.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown action name: {name!r}") from None


class StepEvent(IntFlag):
    """Per-agent outcome flags for one step."""

    MOVED = 1
    BLOCKED_BY_MAP = 2
    BLOCKED_BY_AGENT = 4
    REACHED_GOAL = 8


class MapError(ValueError):
    """Malformed map description."""


class NonRectangularMapError(MapError):
    """Grid rows do not all have the same width."""


class UnknownCharacterError(MapError):
    """Map text contains a character outside . # S G."""


class MissingEndpointError(MapError):
    """The start set or the goal set is empty."""


class DisconnectedMapError(MapError):
    """Some start cell cannot reach any goal cell."""


class InvalidStateError(ValueError):
    """A queried state is out of bounds or an obstacle."""


class InvalidJointStateError(ValueError):
    """A joint state places two agents on the same cell."""


class CapacityError(ValueError):
    """More agents requested than distinct start cells available."""


@dataclass(frozen=True)
class RewardConfig:
    """Reward levels: step penalty, impermissible-action penalty, goal bonus.

    Requires delta2 < delta1 < 0 < delta3 so that a positive reward is
    attainable only by entering a goal cell.
    """

    delta1: float = -1.0
    delta2: float = -5.0
    delta3: float = 100.0

    def __post_init__(self) -> None:
        if not (self.delta2 < self.delta1 < 0.0 < self.delta3):
            raise ValueError(
                "reward levels must satisfy delta2 < delta1 < 0 < delta3, "
                f"got {self.delta1}, {self.delta2}, {self.delta3}"
            )


@dataclass(frozen=True)
class WorldConfig:
    """Episode shape: how many agents, how many steps, action noise level."""

    n_agents: int = 1
    horizon: int = 1
    action_noise: float = 0.0

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0.0 <= self.action_noise <= 1.0:
            raise ValueError("action_noise must lie in [0, 1]")


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class GridMap:
    """Immutable rectangular grid with obstacles, goals and a start distribution.

    `starts` is either a mapping from cell to initial-state probability or an
    iterable of cells (uniform). Construction validates bounds, disjointness,
    that the probability mass sums to 1 within 1e-9, and that every start can
    reach at least one goal through free cells. Treat instances as immutable;
    derived lookup tables are cached on first use.
    """

    def __init__(
        self,
        width: int,
        height: int,
        obstacles: Iterable[Cell] = (),
        goals: Iterable[Cell] = (),
        starts: Mapping[Cell, float] | Iterable[Cell] = (),
    ) -> None:
        self.width = int(width)
        self.height = int(height)
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        self.obstacles = frozenset((int(x), int(y)) for x, y in obstacles)
        self.goals = frozenset((int(x), int(y)) for x, y in goals)
        if isinstance(starts, Mapping):
            start_items = {(int(x), int(y)): float(p) for (x, y), p in starts.items()}
        else:
            cells = [(int(x), int(y)) for x, y in starts]
            if len(set(cells)) != len(cells):
                raise MapError("duplicate start cells")
            start_items = {c: 1.0 / len(cells) for c in cells} if cells else {}
        self.starts: dict[Cell, float] = dict(sorted(start_items.items()))
        self._validate()

    def _validate(self) -> None:
        for label, cells in (("obstacle", self.obstacles), ("goal", self.goals),
                             ("start", self.starts)):
            for c in cells:
                if not self.in_bounds(c):
                    raise MapError(f"{label} cell {c} is out of bounds")
        if self.obstacles & self.goals:
            raise MapError("obstacles and goals overlap")
        if self.obstacles & set(self.starts):
            raise MapError("obstacles and starts overlap")
        if not self.goals:
            raise MissingEndpointError("goal set is empty")
        if not self.starts:
            raise MissingEndpointError("start set is empty")
        if any(p <= 0.0 for p in self.starts.values()):
            raise MapError("start probabilities must be positive")
        total = sum(self.starts.values())
        if abs(total - 1.0) > 1e-9:
            raise MapError(f"start probabilities sum to {total!r}, not 1")
        reach = self._cells_reaching_goals()
        for c in self.starts:
            if c not in reach:
                raise DisconnectedMapError(f"start {c} cannot reach any goal")

    def _cells_reaching_goals(self) -> set[Cell]:
        seen = set(self.goals)
        queue = deque(self.goals)
        while queue:
            x, y = queue.popleft()
            for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
                nxt = (x + dx, y + dy)
                if nxt not in seen and self.is_free(nxt):
                    seen.add(nxt)
                    queue.append(nxt)
        return seen

    # -- basic queries ------------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.obstacles

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_id(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def id_to_cell(self, cid: int) -> Cell:
        return (cid % self.width, cid // self.width)

    def free_cells(self) -> list[Cell]:
        """All non-obstacle cells, sorted by (x, y)."""
        return sorted(
            (x, y)
            for x in range(self.width)
            for y in range(self.height)
            if (x, y) not in self.obstacles
        )

    def obstacle_clearance(self, cell: Cell) -> int:
        """Manhattan distance to the nearest obstacle or out-of-bounds cell."""
        if not self.is_free(cell):
            raise InvalidStateError(f"cell {cell} is not a free in-bounds cell")
        return int(self._clearance[self.cell_id(cell)])

    # -- cached lookup tables -----------------------------------------------

    @cached_property
    def _free_mask(self) -> np.ndarray:
        mask = np.ones(self.n_cells, dtype=bool)
        for c in self.obstacles:
            mask[self.cell_id(c)] = False
        return mask

    @cached_property
    def _goal_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_cells, dtype=bool)
        for c in self.goals:
            mask[self.cell_id(c)] = True
        return mask

    @cached_property
    def _perm_target(self) -> tuple[np.ndarray, np.ndarray]:
        """(permissible (n,5) bool, target id (n,5) int32); Stay always allowed."""
        n = self.n_cells
        perm = np.zeros((n, N_ACTIONS), dtype=bool)
        target = np.empty((n, N_ACTIONS), dtype=np.int32)
        for cid in range(n):
            cell = self.id_to_cell(cid)
            for a in ACTIONS:
                dx, dy = _DELTAS[a]
                nxt = (cell[0] + dx, cell[1] + dy)
                if a is Action.STAY or self.is_free(nxt):
                    perm[cid, a] = True
                    target[cid, a] = self.cell_id(nxt)
                else:
                    target[cid, a] = cid
        return perm, target

    @cached_property
    def _perm_choices(self) -> tuple[np.ndarray, np.ndarray]:
        """Per cell: permissible actions padded to width 5, and their count."""
        perm, _ = self._perm_target
        counts = perm.sum(axis=1).astype(np.int64)
        padded = np.zeros((self.n_cells, N_ACTIONS), dtype=np.int8)
        for cid in range(self.n_cells):
            opts = np.flatnonzero(perm[cid])
            padded[cid, : len(opts)] = opts
        return padded, counts

    @cached_property
    def _clearance(self) -> np.ndarray:
        # pad with a boundary ring of obstacles, then exact taxicab transform
        occ = np.ones((self.height + 2, self.width + 2), dtype=np.uint8)
        occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = 0
        for x, y in self.obstacles:
            occ[y + 1, x + 1] = 0
        dist = ndimage.distance_transform_cdt(occ, metric="taxicab")
        return np.asarray(dist)[1:-1, 1:-1].reshape(-1).astype(np.int64)

    @cached_property
    def _start_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(start ids, probabilities, cumulative probabilities), sorted by cell."""
        ids = np.array([self.cell_id(c) for c in self.starts], dtype=np.int64)
        probs = np.array([self.starts[self.id_to_cell(i)] for i in ids])
        return ids, probs, np.cumsum(probs)

    # python-list mirrors for tight sequential loops
    @cached_property
    def _perm_list(self) -> list[list[bool]]:
        return self._perm_target[0].tolist()

    @cached_property
    def _target_list(self) -> list[list[int]]:
        return self._perm_target[1].tolist()

    @cached_property
    def _goal_list(self) -> list[bool]:
        return self._goal_mask.tolist()

    # -- text format ---------------------------------------------------------

    def to_text(self) -> str:
        """Map text: '#' obstacle, 'G' goal, 'S' start, '.' free. No trailing blanks.

        A cell that is both start and goal is written as 'G' (the text format
        cannot express the overlap, nor non-uniform start weights).
        """
        rows = []
        for y in range(self.height):
            chars = []
            for x in range(self.width):
                c = (x, y)
                if c in self.obstacles:
                    chars.append("#")
                elif c in self.goals:
                    chars.append("G")
                elif c in self.starts:
                    chars.append("S")
                else:
                    chars.append(".")
            rows.append("".join(chars))
        return "\n".join(rows) + "\n"


def parse_map(text: str) -> GridMap:
    """Parse map text: ';' comment lines, '.' free, '#' obstacle, 'S' start, 'G' goal.

    Start cells get a uniform initial distribution. Raises a distinct error for
    ragged rows, unknown characters, missing starts/goals, and starts that
    cannot reach any goal.
    """
    rows = [ln for ln in text.splitlines() if not ln.startswith(";")]
    rows = [ln for ln in rows if ln != ""]
    if not rows:
        raise MapError("map text contains no grid rows")
    width = len(rows[0])
    obstacles: list[Cell] = []
    goals: list[Cell] = []
    starts: list[Cell] = []
    for y, row in enumerate(rows):
        if len(row) != width:
            raise NonRectangularMapError(
                f"row {y} has width {len(row)}, expected {width}"
            )
        for x, ch in enumerate(row):
            if ch == "#":
                obstacles.append((x, y))
            elif ch == "G":
                goals.append((x, y))
            elif ch == "S":
                starts.append((x, y))
            elif ch != ".":
                raise UnknownCharacterError(
                    f"unknown character {ch!r} at column {x}, row {y}"
                )
    return GridMap(width, len(rows), obstacles, goals, starts)


def permissible_actions(grid: GridMap, cell: Cell) -> set[Action]:
    """Actions whose target cell is free (Stay is always included)."""
    if not grid.is_free(cell):
        raise InvalidStateError(f"cell {cell} is not a free in-bounds cell")
    perm, _ = grid._perm_target
    return {Action(a) for a in np.flatnonzero(perm[grid.cell_id(cell)])}


# -- stepping ---------------------------------------------------------------

_MOVED = int(StepEvent.MOVED)
_BLOCKED_MAP = int(StepEvent.BLOCKED_BY_MAP)
_BLOCKED_AGENT = int(StepEvent.BLOCKED_BY_AGENT)
_REACHED = int(StepEvent.REACHED_GOAL)


def _advance_ids(
    perm: Sequence[Sequence[bool]],
    target: Sequence[Sequence[int]],
    goal: Sequence[bool],
    ids: list[int],
    acts: Sequence[int],
    active: Sequence[bool] | None,
    occupied: set[int],
) -> list[int]:
    """Resolve one tick over integer cell ids, mutating ids and occupied.

    Agents resolve in ascending index order: a move into a cell still held by
    a not-yet-moved (or already settled) agent is blocked, which also blocks
    both ends of a swap. Returns per-agent StepEvent bit masks. Agents with
    active[i] false keep their cell (frozen) and report only REACHED_GOAL.
    """
    events = [0] * len(ids)
    for i in range(len(ids)):
        if active is not None and not active[i]:
            if goal[ids[i]]:
                events[i] = _REACHED
            continue
        cur = ids[i]
        a = acts[i]
        if not perm[cur][a]:
            ev = _BLOCKED_MAP
        else:
            tgt = target[cur][a]
            if tgt == cur:
                ev = 0
            elif tgt in occupied:
                ev = _BLOCKED_AGENT
            else:
                occupied.discard(cur)
                occupied.add(tgt)
                ids[i] = tgt
                ev = _MOVED
        if goal[ids[i]]:
            ev |= _REACHED
        events[i] = ev
    return events


@dataclass(frozen=True)
class StepOutcome:
    """Joint transition result: next cells and per-agent event flags."""

    next_cells: tuple[Cell, ...]
    events: tuple[StepEvent, ...]


def step(
    grid: GridMap,
    cells: Sequence[Cell],
    actions: Sequence[Action],
    rng: np.random.Generator | None = None,
    *,
    action_noise: float = 0.0,
    frozen: Sequence[bool] | None = None,
) -> StepOutcome:
    """Advance all agents one tick.

    With probability `action_noise` an agent's action is resampled uniformly
    from its permissible set (requires rng). Frozen agents keep their cell and
    consume no randomness. With action_noise 0 the result is a pure function
    of the inputs.
    """
    if len(actions) != len(cells):
        raise ValueError("cells and actions must have the same length")
    if action_noise > 0.0 and rng is None:
        raise ValueError("action_noise > 0 requires an rng")
    ids = []
    for c in cells:
        c = (int(c[0]), int(c[1]))
        if not grid.is_free(c):
            raise InvalidStateError(f"agent cell {c} is not a free in-bounds cell")
        ids.append(grid.cell_id(c))
    if len(set(ids)) != len(ids):
        raise InvalidJointStateError("two agents occupy the same cell")

    perm, target = grid._perm_target
    padded, counts = grid._perm_choices
    acts = [int(a) for a in actions]
    for i in range(len(acts)):
        if not 0 <= acts[i] < N_ACTIONS:
            raise ValueError(f"invalid action {acts[i]} for agent {i}")
        if frozen is not None and frozen[i]:
            continue
        if action_noise > 0.0 and rng.random() < action_noise:
            cid = ids[i]
            acts[i] = int(padded[cid, int(rng.random() * counts[cid])])

    occupied = set(ids)
    active = None if frozen is None else [not f for f in frozen]
    events = _advance_ids(
        grid._perm_list, grid._target_list, grid._goal_list,
        ids, acts, active, occupied,
    )
    return StepOutcome(
        next_cells=tuple(grid.id_to_cell(i) for i in ids),
        events=tuple(StepEvent(e) for e in events),
    )


def reward(
    s: Cell,
    a: Action,
    s_next: Cell,
    grid: GridMap,
    blocked_by_map: bool,
    cfg: RewardConfig,
) -> float:
    """Reward for one transition: goal bonus, else impermissible penalty, else step cost."""
    del s, a  # the level depends only on the outcome
    if s_next in grid.goals:
        return cfg.delta3
    if blocked_by_map:
        return cfg.delta2
    return cfg.delta1


def _sample_initial_ids(grid: GridMap, n_agents: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n distinct start cell ids weighted by the start distribution."""
    ids, probs, cdf = grid._start_arrays
    if n_agents < 1:
        raise ValueError("n_agents must be at least 1")
    if n_agents > len(ids):
        raise CapacityError(
            f"{n_agents} agents requested but only {len(ids)} start cells"
        )
    if n_agents <= len(ids) // 2:
        chosen: list[int] = []
        taken: set[int] = set()
        while len(chosen) < n_agents:
            k = int(np.searchsorted(cdf, rng.random(), side="right"))
            k = min(k, len(ids) - 1)
            if k not in taken:
                taken.add(k)
                chosen.append(int(ids[k]))
        return np.asarray(chosen, dtype=np.int64)
    # dense request: weighted order statistics (u ** (1/w) keys, largest first)
    keys = rng.random(len(ids)) ** (1.0 / probs)
    order = np.argsort(-keys, kind="stable")
    return ids[order[:n_agents]].astype(np.int64)


def sample_initial(grid: GridMap, n_agents: int, rng: np.random.Generator) -> list[Cell]:
    """Sample distinct start cells without replacement, weighted by the start distribution."""
    return [grid.id_to_cell(int(i)) for i in _sample_initial_ids(grid, n_agents, rng)]
