"""Shared layout of the 32-entry per-agent observation vector.

Both the environment (which writes observations) and the reward machinery
(which reads them) depend on this single table, so the index assignments
live here and nowhere else.

Index map::

    0-2    tomato    (row, col, chop status)
    3-5    lettuce   (row, col, chop status)
    6-8    onion     (row, col, chop status)
    9-10   plate 1   (row, col)
    11-12  plate 2   (row, col)
    13-14  knife 1   (row, col)          # cutting board 1
    15-16  knife 2   (row, col)          # cutting board 2
    17-18  delivery  (row, col)
    19-20  agent 1   (row, col)
    21-22  agent 2   (row, col)
    23-24  agent 3   (row, col)
    25-31  order one-hot over the 7 recipe slots

Positions are normalized by the grid size (row/6, col/6 on the 7x7 grid);
chop status is progress/3 so a fully chopped vegetable reads 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass

OBS_SIZE = 32
GRID_NORM = 6.0  # positions divide by (grid side - 1)
CHOP_TICKS = 3  # chop progress runs 0..3; obs encodes progress / CHOP_TICKS


@dataclass(frozen=True)
class EntitySlot:
    pos: tuple[int, int]
    status: int | None = None


ENTITY_SLOTS: dict[str, EntitySlot] = {
    "tomato": EntitySlot((0, 1), 2),
    "lettuce": EntitySlot((3, 4), 5),
    "onion": EntitySlot((6, 7), 8),
    "plate1": EntitySlot((9, 10)),
    "plate2": EntitySlot((11, 12)),
    "knife1": EntitySlot((13, 14)),
    "knife2": EntitySlot((15, 16)),
    "delivery": EntitySlot((17, 18)),
    "agent1": EntitySlot((19, 20)),
    "agent2": EntitySlot((21, 22)),
    "agent3": EntitySlot((23, 24)),
}

ORDER_SLOT_START = 25
ORDER_SLOT_COUNT = 7

# Recipe slots in the order one-hot; only the two salads are playable.
RECIPE_SLOTS = {
    "tomato": 0,
    "lettuce": 1,
    "onion": 2,
    "lettuce-tomato": 3,
    "onion-tomato": 4,
    "lettuce-onion": 5,
    "lettuce-onion-tomato": 6,
}

# Spoken/written aliases accepted by the feedback directive vocabulary.
ENTITY_ALIASES = {
    "tomato": "tomato",
    "lettuce": "lettuce",
    "onion": "onion",
    "plate1": "plate1",
    "plate 1": "plate1",
    "plate2": "plate2",
    "plate 2": "plate2",
    "knife1": "knife1",
    "knife 1": "knife1",
    "knife2": "knife2",
    "knife 2": "knife2",
    "cutting board 1": "knife1",
    "cutting board 2": "knife2",
    "board 1": "knife1",
    "board 2": "knife2",
    "delivery": "delivery",
    "star": "delivery",
    "agent1": "agent1",
    "agent 1": "agent1",
    "agent2": "agent2",
    "agent 2": "agent2",
    "agent3": "agent3",
    "agent 3": "agent3",
}


def resolve_entity(name: str) -> str:
    """Map an alias to its canonical entity key, or raise KeyError."""
    key = " ".join(name.strip().lower().split())
    if key in ENTITY_ALIASES:
        return ENTITY_ALIASES[key]
    raise KeyError(f"unknown entity {name!r}")


def agent_entity(agent: int) -> str:
    if agent not in (1, 2, 3):
        raise ValueError(f"agent id must be 1..3, got {agent}")
    return f"agent{agent}"
