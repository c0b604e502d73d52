"""Predefined reward templates and their instantiation from feedback.

Eight template kinds cover the common shaping patterns: pull two entities
together (distance), reward a macro-action (action), reward an entity
status (status), reward being within a radius (proximity), penalize elapsed
time (time), reward a goal event (success), penalize non-idle actions
(energy), and weighted combinations of the above (composite).

``generate_from_feedback`` turns a parsed per-agent directive into a
parameterized template. In DSL mode this is a fixed mapping table over the
directive vocabulary; in external mode the reward-builder service returns
lambda-shaped text that is parsed through the safe grammar (never
executed).
"""

from __future__ import annotations

import re
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional

from ..obslayout import CHOP_TICKS, ENTITY_SLOTS, GRID_NORM, agent_entity, resolve_entity
from . import expr as E
from .grammar import RewardGrammarError, parse_reply

if TYPE_CHECKING:
    from ..feedback import ParsedFeedback

DEFAULT_R_MAX = 200.0

# Default coefficients for directives that do not carry their own numbers.
DEFAULT_TIME_COEF = 0.1
DEFAULT_ENERGY_COEF = 0.1
DEFAULT_PROXIMITY_REWARD = 1.0
DEFAULT_SUCCESS_REWARD = 10.0
# An environment reward tick at or above this means a correct delivery
# happened (the largest non-delivery tick is three chops minus the step
# penalty, well below this).
DELIVERY_EVENT_THRESHOLD = 100.0


class TemplateKind(str, Enum):
    DISTANCE = "distance"
    ACTION = "action"
    STATUS = "status"
    COMPOSITE = "composite"
    PROXIMITY = "proximity"
    TIME_PENALTY = "time_penalty"
    SUCCESS = "success"
    ENERGY_PENALTY = "energy_penalty"


class TemplateError(ValueError):
    """Unknown entity, bad arity, or otherwise uninstantiable parameters."""


def _pos(entities, name: str) -> tuple[int, int]:
    try:
        return entities[name].pos
    except KeyError as e:
        raise TemplateError(f"unknown entity {name!r}") from e


def _status_index(entities, name: str) -> int:
    slot = entities.get(name)
    if slot is None or slot.status is None:
        raise TemplateError(f"entity {name!r} has no status channel")
    return slot.status


def _status_value(status) -> float:
    if isinstance(status, str):
        key = status.strip().lower()
        if key == "chopped":
            return 1.0
        if key == "unchopped":
            return 0.0
        raise TemplateError(f"unknown status {status!r}")
    v = float(status)
    if not 0.0 <= v <= 1.0:
        raise TemplateError(f"status value {v} outside [0, 1]")
    return v


def _not_stay() -> E.Expr:
    # energy(a): 0 for stay, 1 for every other macro
    return E.Add((E.Constant(1.0), E.Negate(E.Indicator(E.ActionIs("stay")))))


def _build(kind: TemplateKind, params: dict, entities) -> tuple[E.Expr, str]:
    if kind == TemplateKind.DISTANCE:
        e1, e2 = resolve_entity(params["e1"]), resolve_entity(params["e2"])
        expr: E.Expr = E.Negate(E.EuclideanDist(_pos(entities, e1), _pos(entities, e2)))
        return expr, f"-distance({e1}, {e2})"

    if kind == TemplateKind.ACTION:
        token = E.action_token(params["action"])
        return E.Indicator(E.ActionIs(token)), f"1[action == {token}]"

    if kind == TemplateKind.STATUS:
        ent = resolve_entity(params["entity"])
        value = _status_value(params["status"])
        idx = _status_index(entities, ent)
        return E.Indicator(E.ObsEq(idx, value)), f"1[status({ent}) == {value}]"

    if kind == TemplateKind.PROXIMITY:
        e1, e2 = resolve_entity(params["e1"]), resolve_entity(params["e2"])
        d = float(params["d"])
        r = float(params.get("reward", DEFAULT_PROXIMITY_REWARD))
        pred = E.DistLeq(_pos(entities, e1), _pos(entities, e2), d)
        return E.Mul((E.Constant(r), E.Indicator(pred))), f"{r}*1[distance({e1}, {e2}) <= {d}]"

    if kind == TemplateKind.TIME_PENALTY:
        coef = float(params.get("coef", DEFAULT_TIME_COEF))
        return E.Negate(E.Mul((E.Constant(coef), E.TimeValue()))), f"-{coef}*t"

    if kind == TemplateKind.SUCCESS:
        goal = params.get("goal", "delivered")
        r = float(params.get("reward", DEFAULT_SUCCESS_REWARD))
        if goal == "delivered":
            pred: E.Predicate = E.EnvAtLeast(DELIVERY_EVENT_THRESHOLD)
            desc = f"{r}*1[order delivered]"
        elif isinstance(goal, tuple) and len(goal) == 2 and goal[0] == "status":
            ent = resolve_entity(goal[1])
            pred = E.ObsEq(_status_index(entities, ent), 1.0)
            desc = f"{r}*1[{ent} chopped]"
        else:
            raise TemplateError(f"unsupported goal {goal!r}")
        return E.Mul((E.Constant(r), E.Indicator(pred))), desc

    if kind == TemplateKind.ENERGY_PENALTY:
        coef = float(params.get("coef", DEFAULT_ENERGY_COEF))
        return E.Negate(E.Mul((E.Constant(coef), _not_stay()))), f"-{coef}*energy(action)"

    if kind == TemplateKind.COMPOSITE:
        parts = params["parts"]
        if not parts:
            raise TemplateError("composite needs at least one part")
        terms = []
        descs = []
        for lam, part_kind, part_params in parts:
            child, desc = _build(TemplateKind(part_kind), part_params, entities)
            terms.append(E.Mul((E.Constant(float(lam)), child)))
            descs.append(f"{float(lam)}*({desc})")
        return E.Add(tuple(terms)), " + ".join(descs)

    raise TemplateError(f"unknown template kind {kind!r}")


def instantiate(
    kind: TemplateKind | str,
    params: dict,
    entities=ENTITY_SLOTS,
    r_max: float = DEFAULT_R_MAX,
    generation: int = -1,
) -> E.RewardFunction:
    """Build the reward function for a template kind with the given parameters.

    Every instantiated template carries a mandatory outer clamp to
    [-r_max, r_max] so evaluation magnitude stays bounded.
    """
    kind = TemplateKind(kind)
    body, desc = _build(kind, params, entities)
    return E.RewardFunction(
        expr=E.Clamp(-abs(r_max), abs(r_max), body),
        kind=kind.value,
        description=desc,
        source_generation=generation,
    )


# ---------------------------------------------------------------------------
# Directive vocabulary (DSL mode)

_ACTION_ALIASES = {
    "up": "up",
    "down": "down",
    "left": "left",
    "right": "right",
    "stay": "stay",
    "chop": "chop",
    "chopping": "chop",
    "deliver": "deliver",
    "delivery": "deliver",
    "get lettuce": "get_lettuce",
    "get tomato": "get_tomato",
    "get onion": "get_onion",
    "get plate 1": "get_plate1",
    "get plate 2": "get_plate2",
    "go cut board 1": "go_cut_board1",
    "go cut board 2": "go_cut_board2",
    "go to cutting board 1": "go_cut_board1",
    "go to cutting board 2": "go_cut_board2",
    "go counter": "go_counter",
    "go to counter": "go_counter",
}

_RE_DISTANCE = re.compile(r"^get closer to (?P<ent>.+)$")
_RE_ACTION = re.compile(r"^do (?P<act>.+)$")
_RE_STATUS = re.compile(r"^achieve (?P<ent>.+?) (?P<status>chopped|unchopped)$")
_RE_TIME = re.compile(r"^avoid wasting time$")
_RE_PROXIMITY = re.compile(r"^reach (?P<ent>.+?) within (?P<d>\d+(?:\.\d+)?)$")
_RE_SUCCESS = re.compile(r"^complete the order$")
_RE_ENERGY = re.compile(r"^avoid wasting energy$")
_RE_NOTHING = re.compile(r"nothing to improve")


def directive_to_template(directive: str, agent: int) -> Optional[tuple[TemplateKind, dict]]:
    """Map one directive to (kind, params), None for 'nothing to improve'.

    Raises TemplateError for directives outside the vocabulary or naming
    unknown entities.
    """
    text = " ".join(directive.strip().lower().split())
    if _RE_NOTHING.search(text):
        return None
    m = _RE_DISTANCE.match(text)
    if m:
        return TemplateKind.DISTANCE, {"e1": agent_entity(agent), "e2": m.group("ent")}
    m = _RE_ACTION.match(text)
    if m:
        raw = m.group("act")
        token = _ACTION_ALIASES.get(raw)
        if token is None:
            raise TemplateError(f"unknown action {raw!r}")
        return TemplateKind.ACTION, {"action": token}
    m = _RE_STATUS.match(text)
    if m:
        return TemplateKind.STATUS, {"entity": m.group("ent"), "status": m.group("status")}
    if _RE_TIME.match(text):
        return TemplateKind.TIME_PENALTY, {"coef": DEFAULT_TIME_COEF}
    m = _RE_PROXIMITY.match(text)
    if m:
        # distances are written in grid cells; observations are normalized
        d_cells = float(m.group("d"))
        return TemplateKind.PROXIMITY, {
            "e1": agent_entity(agent),
            "e2": m.group("ent"),
            "d": d_cells / GRID_NORM,
            "reward": DEFAULT_PROXIMITY_REWARD,
        }
    if _RE_SUCCESS.match(text):
        return TemplateKind.SUCCESS, {"goal": "delivered", "reward": DEFAULT_SUCCESS_REWARD}
    if _RE_ENERGY.match(text):
        return TemplateKind.ENERGY_PENALTY, {"coef": DEFAULT_ENERGY_COEF}
    raise TemplateError(f"directive outside the vocabulary: {directive!r}")


class TemplateEngine:
    """Turns parsed feedback for one agent into a reward function.

    mode="dsl" resolves directives through the fixed vocabulary table.
    mode="external" sends the directive text to a reward-builder service
    (``build_reward(text) -> str``) and parses the reply through the safe
    grammar, rejecting anything outside it.
    """

    def __init__(
        self,
        mode: str = "dsl",
        entities=ENTITY_SLOTS,
        r_max: float = DEFAULT_R_MAX,
        build_reward: Callable[[str], str] | None = None,
    ) -> None:
        if mode not in ("dsl", "external"):
            raise ValueError(f"unknown template engine mode {mode!r}")
        if mode == "external" and build_reward is None:
            raise ValueError("external mode needs a build_reward client")
        self.mode = mode
        self.entities = entities
        self.r_max = r_max
        self.build_reward = build_reward

    def generate(self, fb: "ParsedFeedback", agent: int, generation: int = -1) -> Optional[E.RewardFunction]:
        """Reward function for `agent`, or None when the feedback has no text for it.

        Directives that fail to map (unknown entity, out-of-vocabulary) are
        dropped individually; if nothing actionable remains the constant-zero
        reward is returned so the pool still records the feedback phase.
        """
        texts = []
        per = fb.per_agent.get(agent)
        if per:
            texts.append(per)
        if fb.all:
            texts.append(fb.all)
        if not texts:
            return None

        if self.mode == "external":
            reply = self.build_reward("; ".join(texts))
            expr = parse_reply(reply, r_max=self.r_max)  # RewardGrammarError propagates
            return E.RewardFunction(
                expr=expr,
                kind="external",
                description=f"external reply for agent {agent}",
                source_generation=generation,
            )

        parts: list[tuple[TemplateKind, dict]] = []
        for text in texts:
            for raw in text.split(";"):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    mapped = directive_to_template(raw, agent)
                except TemplateError:
                    continue  # reject the directive, keep the rest
                if mapped is not None:
                    parts.append(mapped)

        if not parts:
            return E.zero_reward(generation)
        if len(parts) == 1:
            kind, params = parts[0]
            return instantiate(kind, params, self.entities, self.r_max, generation)
        lam = 1.0 / len(parts)
        composite = {"parts": [(lam, kind.value, params) for kind, params in parts]}
        return instantiate(TemplateKind.COMPOSITE, composite, self.entities, self.r_max, generation)


def generate_from_feedback(
    fb: "ParsedFeedback",
    agent: int,
    entities=ENTITY_SLOTS,
    mode: str = "dsl",
    generation: int = -1,
    build_reward: Callable[[str], str] | None = None,
) -> Optional[E.RewardFunction]:
    """Functional wrapper around TemplateEngine for one-off use."""
    engine = TemplateEngine(mode=mode, entities=entities, build_reward=build_reward)
    return engine.generate(fb, agent, generation)


__all__ = [
    "TemplateKind",
    "TemplateError",
    "TemplateEngine",
    "RewardGrammarError",
    "instantiate",
    "directive_to_template",
    "generate_from_feedback",
    "DEFAULT_R_MAX",
]
