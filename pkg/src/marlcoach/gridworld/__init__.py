"""Macro-action cooking gridworld: layouts, state, dynamics, observations."""

from .env import (
    AGENTS,
    CHOP_REWARD,
    CORRECT_DELIVERY_REWARD,
    CookingEnv,
    DEFAULT_MAX_STEPS,
    EnvError,
    EnvState,
    ITEMS,
    MACRO_ORDER,
    MacroAction,
    PLATES,
    STEP_PENALTY,
    VEGETABLES,
    VIEW_RADIUS,
    reset,
)
from .layout import GRID_SIZE, Layout, LayoutError, RECIPES, builtin_layout, load_layout_file, parse_layout

__all__ = [
    "AGENTS",
    "CHOP_REWARD",
    "CORRECT_DELIVERY_REWARD",
    "CookingEnv",
    "DEFAULT_MAX_STEPS",
    "EnvError",
    "EnvState",
    "ITEMS",
    "MACRO_ORDER",
    "MacroAction",
    "PLATES",
    "STEP_PENALTY",
    "VEGETABLES",
    "VIEW_RADIUS",
    "reset",
    "GRID_SIZE",
    "Layout",
    "LayoutError",
    "RECIPES",
    "builtin_layout",
    "load_layout_file",
    "parse_layout",
]
