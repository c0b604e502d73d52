"""Deterministic macro-action cooking environment.

Three agents cook salads on a 7x7 grid. Each environment step applies one
primitive tick of every agent's current macro-action (agents resolve in
fixed priority order 1 > 2 > 3 on cell contention) and reports which
macros terminated so the caller can pick replacements.

Interaction model: moving against a non-floor cell interacts with it —
picking up the item there with an empty hand, placing the held item on an
empty counter, chopping when an unchopped vegetable sits on an adjacent
cutting board (three ticks to finish), merging chopped vegetables onto
plates, and delivering on the star cell. Navigation inside Get-*/Go-*
macros replans a breadth-first shortest path over floor cells every tick,
treating the other agents as obstacles.

Shared reward per tick: -0.1 step penalty, +10 per completed chop, +200
for delivering the ordered salad (ends the episode), and a configurable
penalty (default -5) for delivering anything else, which also teleports
the delivered item back to its spawn. Episodes end on a correct delivery
or after 200 steps.

Partial observability: each agent sees true positions/statuses only inside
the 5x5 window centered on itself and otherwise remembers the last seen
value, initialized to the spawn configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from collections import deque
from typing import Mapping, Optional

from ..obslayout import (
    CHOP_TICKS,
    ENTITY_SLOTS,
    GRID_NORM,
    OBS_SIZE,
    ORDER_SLOT_COUNT,
    ORDER_SLOT_START,
    RECIPE_SLOTS,
)
from .layout import GRID_SIZE, Layout, RECIPES, builtin_layout

VIEW_RADIUS = 2  # 5x5 window
STEP_PENALTY = -0.1
CHOP_REWARD = 10.0
CORRECT_DELIVERY_REWARD = 200.0
DEFAULT_WRONG_DELIVERY_PENALTY = -5.0
DEFAULT_MAX_STEPS = 200

VEGETABLES = ("tomato", "lettuce", "onion")
PLATES = ("plate1", "plate2")
ITEMS = VEGETABLES + PLATES
AGENTS = (1, 2, 3)

# observation entity order (positions resolved at runtime for the first five)
_ENTITY_ORDER = ("tomato", "lettuce", "onion", "plate1", "plate2")

_DIRS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
_BFS_ORDER = ((-1, 0), (1, 0), (0, -1), (0, 1))


class MacroAction(Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"
    STAY = "stay"
    CHOP = "chop"
    GET_LETTUCE = "get_lettuce"
    GET_TOMATO = "get_tomato"
    GET_ONION = "get_onion"
    GET_PLATE1 = "get_plate1"
    GET_PLATE2 = "get_plate2"
    GO_CUT_BOARD1 = "go_cut_board1"
    GO_CUT_BOARD2 = "go_cut_board2"
    GO_COUNTER = "go_counter"
    DELIVER = "deliver"

    @property
    def token(self) -> str:
        return self.value


MACRO_ORDER = tuple(MacroAction)

_ONE_STEP = {MacroAction.UP, MacroAction.DOWN, MacroAction.LEFT, MacroAction.RIGHT, MacroAction.STAY}
_GET_TARGET = {
    MacroAction.GET_LETTUCE: "lettuce",
    MacroAction.GET_TOMATO: "tomato",
    MacroAction.GET_ONION: "onion",
    MacroAction.GET_PLATE1: "plate1",
    MacroAction.GET_PLATE2: "plate2",
}
_GO_BOARD = {MacroAction.GO_CUT_BOARD1: 1, MacroAction.GO_CUT_BOARD2: 2}


class EnvError(ValueError):
    pass


# Item locations: ("cell", r, c) | ("hand", agent) | ("plate", plate_id)
Loc = tuple


@dataclass
class EnvState:
    layout: Layout
    recipe: str
    agent_pos: dict[int, tuple[int, int]]
    item_loc: dict[str, Loc]
    chop: dict[str, int]
    timestep: int
    seed: int
    delivered: bool
    memory: dict[int, dict[str, tuple[int, int, int]]]

    def copy(self) -> "EnvState":
        return EnvState(
            layout=self.layout,
            recipe=self.recipe,
            agent_pos=dict(self.agent_pos),
            item_loc=dict(self.item_loc),
            chop=dict(self.chop),
            timestep=self.timestep,
            seed=self.seed,
            delivered=self.delivered,
            memory={a: dict(m) for a, m in self.memory.items()},
        )

    # -- derived views -------------------------------------------------------

    def item_cell(self, item: str) -> tuple[int, int]:
        """Grid cell an item currently resolves to, following hands and plates."""
        loc = self.item_loc[item]
        while True:
            if loc[0] == "cell":
                return (loc[1], loc[2])
            if loc[0] == "hand":
                return self.agent_pos[loc[1]]
            loc = self.item_loc[loc[1]]  # on a plate: follow the plate

    def item_at_cell(self, cell: tuple[int, int]) -> Optional[str]:
        """The item lying directly on a cell (not held, not on a plate)."""
        for item in ITEMS:
            loc = self.item_loc[item]
            if loc[0] == "cell" and (loc[1], loc[2]) == cell:
                return item
        return None

    def held_item(self, agent: int) -> Optional[str]:
        for item in ITEMS:
            loc = self.item_loc[item]
            if loc[0] == "hand" and loc[1] == agent:
                return item
        return None

    def plate_contents(self, plate: str) -> frozenset[str]:
        return frozenset(
            veg for veg in VEGETABLES
            if self.item_loc[veg][0] == "plate" and self.item_loc[veg][1] == plate
        )

    def item_status(self, item: str) -> int:
        return self.chop.get(item, 0)

    def visible(self, observer: int, cell: tuple[int, int]) -> bool:
        r, c = self.agent_pos[observer]
        return abs(cell[0] - r) <= VIEW_RADIUS and abs(cell[1] - c) <= VIEW_RADIUS

    def snapshot(self) -> dict:
        """Plain-data view of the full state, for replays and event logs."""
        return {
            "timestep": self.timestep,
            "agents": {str(a): list(self.agent_pos[a]) for a in AGENTS},
            "items": {
                item: {
                    "loc": list(self.item_loc[item]),
                    "cell": list(self.item_cell(item)),
                    "status": self.chop.get(item, 0),
                }
                for item in ITEMS
            },
            "held": {str(a): self.held_item(a) for a in AGENTS},
            "plates": {p: sorted(self.plate_contents(p)) for p in PLATES},
            "delivered": self.delivered,
        }


class CookingEnv:
    """One kitchen instance. Strictly single-threaded; steps are pure."""

    def __init__(
        self,
        layout: Layout | str = "A",
        recipe: str = "lettuce-tomato",
        wrong_delivery_penalty: float = DEFAULT_WRONG_DELIVERY_PENALTY,
        max_steps: int = DEFAULT_MAX_STEPS,
    ) -> None:
        self.layout = builtin_layout(layout) if isinstance(layout, str) else layout
        if recipe not in RECIPES:
            raise EnvError(f"unknown recipe {recipe!r}; expected one of {sorted(RECIPES)}")
        self.recipe = recipe
        self.goal = RECIPES[recipe]
        self.wrong_delivery_penalty = wrong_delivery_penalty
        self.max_steps = max_steps

    # -- core operations ------------------------------------------------------

    def reset(self, seed: int = 0) -> EnvState:
        lay = self.layout
        item_loc = {item: ("cell", *lay.item_spawns[item]) for item in ITEMS}
        memory_row = {}
        for item in ITEMS:
            r, c = lay.item_spawns[item]
            memory_row[item] = (r, c, 0)
        for a in AGENTS:
            r, c = lay.agent_spawns[a]
            memory_row[f"agent{a}"] = (r, c, 0)
        return EnvState(
            layout=lay,
            recipe=self.recipe,
            agent_pos=dict(lay.agent_spawns),
            item_loc=item_loc,
            chop={veg: 0 for veg in VEGETABLES},
            timestep=0,
            seed=seed,
            delivered=False,
            memory={a: dict(memory_row) for a in AGENTS},
        )

    def legal_macro_actions(self, state: EnvState, agent: int) -> tuple[MacroAction, ...]:
        if agent not in AGENTS:
            raise EnvError(f"unknown agent {agent}")
        if state.layout.center is None:
            return tuple(m for m in MACRO_ORDER if m is not MacroAction.GO_COUNTER)
        return MACRO_ORDER

    def step(
        self, state: EnvState, macros: Mapping[int, MacroAction]
    ) -> tuple[EnvState, float, dict[int, bool], bool]:
        """Apply one primitive tick of every agent's macro.

        Returns (next state, shared reward, per-agent macro-terminated flags,
        episode done).
        """
        for a in AGENTS:
            if a not in macros:
                raise EnvError(f"agent {a} has no active macro-action")
        s = state.copy()
        events = {"chops": 0, "correct": 0, "wrong": 0}
        pre_positions = dict(s.agent_pos)
        terminated: dict[int, bool] = {}

        for agent in AGENTS:  # fixed priority 1 > 2 > 3
            terminated[agent] = self._tick_agent(s, agent, macros[agent], pre_positions, events)

        s.timestep += 1
        self._update_memories(s)

        reward = STEP_PENALTY
        reward += CHOP_REWARD * events["chops"]
        reward += CORRECT_DELIVERY_REWARD * events["correct"]
        reward += self.wrong_delivery_penalty * events["wrong"]

        done = s.delivered or s.timestep >= self.max_steps
        if done:
            for a in AGENTS:
                terminated[a] = True
        return s, reward, terminated, done

    def observe(self, state: EnvState, agent: int) -> list[float]:
        """32-entry observation for one agent (true inside the 5x5 view, remembered outside)."""
        if agent not in AGENTS:
            raise EnvError(f"unknown agent {agent}")
        obs = [0.0] * OBS_SIZE
        lay = state.layout

        def put(name: str, cell: tuple[int, int], status: int | None) -> None:
            slot = ENTITY_SLOTS[name]
            obs[slot.pos[0]] = cell[0] / GRID_NORM
            obs[slot.pos[1]] = cell[1] / GRID_NORM
            if slot.status is not None:
                obs[slot.status] = (status or 0) / CHOP_TICKS

        for item in _ENTITY_ORDER:
            cell = state.item_cell(item)
            if state.visible(agent, cell):
                put(item, cell, state.chop.get(item))
            else:
                r, c, st = state.memory[agent][item]
                put(item, (r, c), st)

        put("knife1", lay.boards[1], None)
        put("knife2", lay.boards[2], None)
        put("delivery", lay.delivery, None)

        for other in AGENTS:
            cell = state.agent_pos[other]
            if other == agent or state.visible(agent, cell):
                put(f"agent{other}", cell, None)
            else:
                r, c, _ = state.memory[agent][f"agent{other}"]
                put(f"agent{other}", (r, c), None)

        obs[ORDER_SLOT_START + RECIPE_SLOTS[state.recipe]] = 1.0
        return obs

    # -- per-agent macro ticks -------------------------------------------------

    def _tick_agent(
        self,
        s: EnvState,
        agent: int,
        macro: MacroAction,
        pre_positions: dict[int, tuple[int, int]],
        events: dict,
    ) -> bool:
        if macro in _ONE_STEP:
            if macro is not MacroAction.STAY:
                self._primitive_move(s, agent, _DIRS[macro.value], macro, events)
            return True

        if macro is MacroAction.CHOP:
            return self._tick_chop(s, agent, events)

        if macro in _GET_TARGET:
            return self._tick_get(s, agent, _GET_TARGET[macro], macro, pre_positions, events)

        if macro in _GO_BOARD:
            board_cell = s.layout.boards[_GO_BOARD[macro]]
            return self._tick_go(s, agent, board_cell, macro, pre_positions, events)

        if macro is MacroAction.GO_COUNTER:
            if s.layout.center is None:
                return True  # not part of this kitchen; nothing to do
            return self._tick_go(s, agent, s.layout.center, macro, pre_positions, events)

        if macro is MacroAction.DELIVER:
            return self._tick_go(s, agent, s.layout.delivery, macro, pre_positions, events)

        raise EnvError(f"unhandled macro {macro}")

    def _tick_chop(self, s: EnvState, agent: int, events: dict) -> bool:
        if s.held_item(agent) is not None:
            return True
        target = self._adjacent_board_with_unchopped(s, agent)
        if target is None:
            return True
        veg = s.item_at_cell(target)
        self._chop_tick(s, veg, events)
        return s.chop[veg] >= CHOP_TICKS

    def _tick_get(
        self,
        s: EnvState,
        agent: int,
        item: str,
        macro: MacroAction,
        pre_positions: dict[int, tuple[int, int]],
        events: dict,
    ) -> bool:
        if s.held_item(agent) is not None:
            return True  # holding something (possibly the target itself)

        loc = s.item_loc[item]
        true_cell = s.item_cell(item)
        if loc[0] == "hand" and s.visible(agent, true_cell):
            return True  # target observed in another agent's hand

        def pickable_at(cell: tuple[int, int]) -> bool:
            return s.item_at_cell(cell) == item

        target = tuple(s.memory[agent][item][:2])
        if s.visible(agent, target) and not pickable_at(target):
            target = s.layout.item_spawns[item]
            if s.visible(agent, target) and not pickable_at(target):
                return True  # not at the remembered spot nor the spawn

        if self._is_adjacent(s.agent_pos[agent], target):
            if pickable_at(target):
                s.item_loc[item] = ("hand", agent)
                return True  # picked up
            return True  # arrived and the item is not here
        return self._navigate(s, agent, target, macro, pre_positions, events)

    def _tick_go(
        self,
        s: EnvState,
        agent: int,
        target: tuple[int, int],
        macro: MacroAction,
        pre_positions: dict[int, tuple[int, int]],
        events: dict,
    ) -> bool:
        pos = s.agent_pos[agent]
        if self._is_adjacent(pos, target):
            self._interact(s, agent, target, macro, events)
            return True

        occupant = self._agent_adjacent_to(s, target, exclude=agent)
        if occupant is not None:
            if self._is_adjacent(pos, s.agent_pos[occupant]):
                return True  # stop next to the teammate using the target
            return self._navigate(s, agent, s.agent_pos[occupant], macro, pre_positions, events)

        return self._navigate(s, agent, target, macro, pre_positions, events)

    # -- movement and interaction ----------------------------------------------

    def _navigate(
        self,
        s: EnvState,
        agent: int,
        target: tuple[int, int],
        macro: MacroAction,
        pre_positions: dict[int, tuple[int, int]],
        events: dict,
    ) -> bool:
        """One path step toward a cell adjacent to `target`. Returns terminated."""
        step = self._bfs_step(s, agent, target, pre_positions)
        if step is None:
            return True  # no path: blocked by agents or unreachable
        occupied = set(s.agent_pos.values())
        if step in occupied:
            return True  # lost the cell to a higher-priority agent this tick
        s.agent_pos[agent] = step
        return False

    def _bfs_step(
        self,
        s: EnvState,
        agent: int,
        target: tuple[int, int],
        pre_positions: dict[int, tuple[int, int]],
    ) -> Optional[tuple[int, int]]:
        """First step of the shortest floor path to a cell adjacent to `target`.

        Planning uses the positions at the start of the tick so a cell taken
        this tick by a higher-priority agent surfaces as a contention loss,
        matching the macro termination conditions.
        """
        lay = s.layout
        start = s.agent_pos[agent]
        obstacles = {pos for a, pos in pre_positions.items() if a != agent}
        goals = {
            (target[0] + dr, target[1] + dc)
            for dr, dc in _BFS_ORDER
            if lay.is_walkable((target[0] + dr, target[1] + dc))
        }
        goals -= obstacles
        if not goals:
            return None
        if start in goals:
            return start
        parent: dict[tuple[int, int], tuple[int, int]] = {start: start}
        queue = deque([start])
        found = None
        while queue:
            cur = queue.popleft()
            if cur in goals:
                found = cur
                break
            for dr, dc in _BFS_ORDER:
                nxt = (cur[0] + dr, cur[1] + dc)
                if nxt in parent or not lay.is_walkable(nxt) or nxt in obstacles:
                    continue
                parent[nxt] = cur
                queue.append(nxt)
        if found is None:
            return None
        node = found
        while parent[node] != start:
            node = parent[node]
        return node

    def _primitive_move(
        self, s: EnvState, agent: int, delta: tuple[int, int], macro: MacroAction, events: dict
    ) -> None:
        pos = s.agent_pos[agent]
        target = (pos[0] + delta[0], pos[1] + delta[1])
        if not s.layout.in_bounds(target):
            return
        if s.layout.is_walkable(target):
            if target not in s.agent_pos.values():
                s.agent_pos[agent] = target
            return
        self._interact(s, agent, target, macro, events)

    def _interact(
        self, s: EnvState, agent: int, cell: tuple[int, int], macro: MacroAction, events: dict
    ) -> None:
        """Moving against a counter-like cell: pick/place/chop/merge/deliver."""
        lay = s.layout
        held = s.held_item(agent)
        item_here = s.item_at_cell(cell)
        board = lay.board_at(cell)

        if held is None:
            if item_here is None:
                return
            unchopped_veg = item_here in VEGETABLES and s.chop[item_here] < CHOP_TICKS
            if board is not None and unchopped_veg and macro not in _GET_TARGET:
                # chopping by moving against a loaded board; Get-* grabs instead
                self._chop_tick(s, item_here, events)
                return
            s.item_loc[item_here] = ("hand", agent)
            return

        if cell == lay.delivery:
            self._deliver(s, agent, held, events)
            return

        if item_here is None:
            s.item_loc[held] = ("cell", cell[0], cell[1])
            return

        if item_here in PLATES and held in VEGETABLES and s.chop[held] >= CHOP_TICKS:
            s.item_loc[held] = ("plate", item_here)
            return
        if held in PLATES and item_here in VEGETABLES and s.chop[item_here] >= CHOP_TICKS:
            s.item_loc[item_here] = ("plate", held)
            return
        # occupied cell and no merge applies: nothing happens

    def _chop_tick(self, s: EnvState, veg: str, events: dict) -> None:
        if s.chop[veg] >= CHOP_TICKS:
            return
        s.chop[veg] += 1
        if s.chop[veg] >= CHOP_TICKS:
            events["chops"] += 1

    def _deliver(self, s: EnvState, agent: int, held: str, events: dict) -> None:
        lay = s.layout
        correct = (
            held in PLATES
            and s.plate_contents(held) == self.goal
            and all(s.chop[v] >= CHOP_TICKS for v in self.goal)
        )
        s.item_loc[held] = ("cell", lay.delivery[0], lay.delivery[1])
        if correct:
            events["correct"] += 1
            s.delivered = True
            return
        events["wrong"] += 1
        reset_items = [held] + (sorted(s.plate_contents(held)) if held in PLATES else [])
        for item in reset_items:
            self._reset_item(s, item)

    def _reset_item(self, s: EnvState, item: str) -> None:
        spawn = s.layout.item_spawns[item]
        if s.item_at_cell(spawn) is None:
            s.item_loc[item] = ("cell", spawn[0], spawn[1])
            return
        # spawn occupied: first free plain counter in row-major order
        lay = s.layout
        reserved = set(lay.boards.values()) | {lay.delivery}
        if lay.center is not None:
            reserved.add(lay.center)
        for r in range(GRID_SIZE):
            for c in range(GRID_SIZE):
                cell = (r, c)
                if lay.is_walkable(cell) or cell in reserved:
                    continue
                if s.item_at_cell(cell) is None:
                    s.item_loc[item] = ("cell", r, c)
                    return
        raise EnvError("no free counter cell to reset an item onto")

    # -- small helpers -----------------------------------------------------------

    @staticmethod
    def _is_adjacent(a: tuple[int, int], b: tuple[int, int]) -> bool:
        return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1

    def _adjacent_board_with_unchopped(self, s: EnvState, agent: int) -> Optional[tuple[int, int]]:
        pos = s.agent_pos[agent]
        for b in (1, 2):
            cell = s.layout.boards[b]
            if self._is_adjacent(pos, cell):
                item = s.item_at_cell(cell)
                if item in VEGETABLES and s.chop[item] < CHOP_TICKS:
                    return cell
        return None

    def _agent_adjacent_to(self, s: EnvState, cell: tuple[int, int], exclude: int) -> Optional[int]:
        for a in AGENTS:
            if a != exclude and self._is_adjacent(s.agent_pos[a], cell):
                return a
        return None

    def _update_memories(self, s: EnvState) -> None:
        cells = {item: s.item_cell(item) for item in ITEMS}
        for observer in AGENTS:
            mem = s.memory[observer]
            for item in ITEMS:
                cell = cells[item]
                if s.visible(observer, cell):
                    mem[item] = (cell[0], cell[1], s.chop.get(item, 0))
            for other in AGENTS:
                cell = s.agent_pos[other]
                if other == observer or s.visible(observer, cell):
                    mem[f"agent{other}"] = (cell[0], cell[1], 0)


def reset(layout, recipe: str, seed: int = 0) -> EnvState:
    """Build an environment for (layout, recipe) and return its initial state."""
    return CookingEnv(layout=layout, recipe=recipe).reset(seed)
