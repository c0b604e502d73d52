"""Kitchen layouts loaded from plain-text grid files.

Legend (one character per cell, 7x7 grid)::

    #   counter
    .   floor
    T   tomato spawn (counter)
    L   lettuce spawn (counter)
    O   onion spawn (counter)
    P   plate 1 spawn (counter)
    Q   plate 2 spawn (counter)
    1   cutting board 1 (counter)
    2   cutting board 2 (counter)
    D   delivery cell (counter)
    C   center pass-through counter (layout B only)
    a b c   agent 1/2/3 start cells (floor)

Three layouts ship with the package: A (open kitchen), B (partitioned
kitchen whose halves can only exchange items over the center counter) and
C (open kitchen with a counter block shrinking the movable space).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

GRID_SIZE = 7

LAYOUT_FILES = {
    "A": "overcooked_a.txt",
    "B": "overcooked_b.txt",
    "C": "overcooked_c.txt",
}

RECIPES = {
    "lettuce-tomato": frozenset({"lettuce", "tomato"}),
    "lettuce-onion-tomato": frozenset({"lettuce", "onion", "tomato"}),
}

_ITEM_CHARS = {"T": "tomato", "L": "lettuce", "O": "onion", "P": "plate1", "Q": "plate2"}
_AGENT_CHARS = {"a": 1, "b": 2, "c": 3}


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    layout_id: str
    rows: tuple[str, ...]
    walkable: frozenset[tuple[int, int]]
    boards: dict[int, tuple[int, int]]
    delivery: tuple[int, int]
    center: tuple[int, int] | None
    item_spawns: dict[str, tuple[int, int]]
    agent_spawns: dict[int, tuple[int, int]]

    def is_walkable(self, cell: tuple[int, int]) -> bool:
        return cell in self.walkable

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < GRID_SIZE and 0 <= cell[1] < GRID_SIZE

    def board_at(self, cell: tuple[int, int]) -> int | None:
        for b, rc in self.boards.items():
            if rc == cell:
                return b
        return None


def parse_layout(text: str, layout_id: str) -> Layout:
    rows = tuple(line for line in text.splitlines() if line.strip())
    if len(rows) != GRID_SIZE or any(len(r) != GRID_SIZE for r in rows):
        raise LayoutError(f"layout {layout_id!r} must be a {GRID_SIZE}x{GRID_SIZE} grid")

    walkable: set[tuple[int, int]] = set()
    boards: dict[int, tuple[int, int]] = {}
    delivery: tuple[int, int] | None = None
    center: tuple[int, int] | None = None
    item_spawns: dict[str, tuple[int, int]] = {}
    agent_spawns: dict[int, tuple[int, int]] = {}

    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            cell = (r, c)
            if ch == ".":
                walkable.add(cell)
            elif ch == "#":
                pass
            elif ch in _ITEM_CHARS:
                item = _ITEM_CHARS[ch]
                if item in item_spawns:
                    raise LayoutError(f"duplicate spawn for {item}")
                item_spawns[item] = cell
            elif ch in _AGENT_CHARS:
                agent = _AGENT_CHARS[ch]
                if agent in agent_spawns:
                    raise LayoutError(f"duplicate start for agent {agent}")
                agent_spawns[agent] = cell
                walkable.add(cell)
            elif ch in "12":
                b = int(ch)
                if b in boards:
                    raise LayoutError(f"duplicate cutting board {b}")
                boards[b] = cell
            elif ch == "D":
                if delivery is not None:
                    raise LayoutError("more than one delivery cell")
                delivery = cell
            elif ch == "C":
                if center is not None:
                    raise LayoutError("more than one center counter")
                center = cell
            else:
                raise LayoutError(f"unknown cell character {ch!r} at {cell}")

    if delivery is None:
        raise LayoutError("layout needs a delivery cell")
    if set(boards) != {1, 2}:
        raise LayoutError("layout needs cutting boards 1 and 2")
    missing = set(_ITEM_CHARS.values()) - set(item_spawns)
    if missing:
        raise LayoutError(f"missing item spawns: {sorted(missing)}")
    if set(agent_spawns) != {1, 2, 3}:
        raise LayoutError("layout needs agent starts a, b, c")

    border = [(0, c) for c in range(GRID_SIZE)] + [(GRID_SIZE - 1, c) for c in range(GRID_SIZE)]
    border += [(r, 0) for r in range(GRID_SIZE)] + [(r, GRID_SIZE - 1) for r in range(GRID_SIZE)]
    if any(cell in walkable for cell in border):
        raise LayoutError("border cells must not be walkable")

    def has_floor_neighbor(cell: tuple[int, int]) -> bool:
        r, c = cell
        return any((r + dr, c + dc) in walkable for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)))

    interactable = list(item_spawns.values()) + list(boards.values()) + [delivery]
    if center is not None:
        interactable.append(center)
    for cell in interactable:
        if not has_floor_neighbor(cell):
            raise LayoutError(f"cell {cell} is unreachable (no adjacent floor)")

    return Layout(
        layout_id=layout_id,
        rows=rows,
        walkable=frozenset(walkable),
        boards=boards,
        delivery=delivery,
        center=center,
        item_spawns=item_spawns,
        agent_spawns=agent_spawns,
    )


def load_layout_file(path: str, layout_id: str) -> Layout:
    with open(path, encoding="utf-8") as fh:
        return parse_layout(fh.read(), layout_id)


def builtin_layout(layout_id: str) -> Layout:
    key = layout_id.upper()
    if key not in LAYOUT_FILES:
        raise LayoutError(f"unknown layout {layout_id!r}; expected one of {sorted(LAYOUT_FILES)}")
    text = resources.files(__package__).joinpath("layouts", LAYOUT_FILES[key]).read_text(encoding="utf-8")
    layout = parse_layout(text, key)
    if key == "B" and layout.center is None:
        raise LayoutError("layout B must define the center counter")
    if key != "B" and layout.center is not None:
        raise LayoutError(f"layout {key} must not define a center counter")
    return layout
