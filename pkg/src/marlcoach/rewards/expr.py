"""Evaluable reward expression trees.

A reward function is represented as a small closed expression tree over a
32-entry observation vector, the executing macro-action, the episode
timestep, and the environment's own reward tick. Trees are pure data:
evaluation has no side effects, is total on valid inputs, and never
executes user-supplied code. Every tree has a canonical prefix-notation
text form used in run reports and the UI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Union

OBS_SIZE = 32

# ---------------------------------------------------------------------------
# Predicates (for Indicator nodes)


@dataclass(frozen=True)
class ActionIs:
    """True when the executing macro-action matches ``action`` (canonical token)."""

    action: str


@dataclass(frozen=True)
class ObsEq:
    """True when ``obs[index]`` equals ``value`` within ``tol``."""

    index: int
    value: float
    tol: float = 1e-6


@dataclass(frozen=True)
class DistLeq:
    """True when the Euclidean distance between two obs position pairs is <= bound."""

    a: tuple[int, int]
    b: tuple[int, int]
    bound: float


@dataclass(frozen=True)
class EnvAtLeast:
    """True when the environment reward tick is >= threshold (delivery detection)."""

    threshold: float


Predicate = Union[ActionIs, ObsEq, DistLeq, EnvAtLeast]

# ---------------------------------------------------------------------------
# Expression nodes


@dataclass(frozen=True)
class ObsIndex:
    index: int


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class TimeValue:
    """The current episode timestep."""


@dataclass(frozen=True)
class EnvReward:
    """The environment's own reward for the current step."""


@dataclass(frozen=True)
class Negate:
    child: "Expr"


@dataclass(frozen=True)
class Add:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class Mul:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class EuclideanDist:
    """Distance between the positions at obs index pairs ``a`` and ``b``."""

    a: tuple[int, int]
    b: tuple[int, int]


@dataclass(frozen=True)
class Indicator:
    predicate: Predicate


@dataclass(frozen=True)
class Clamp:
    lo: float
    hi: float
    child: "Expr"


Expr = Union[
    ObsIndex,
    Constant,
    TimeValue,
    EnvReward,
    Negate,
    Add,
    Mul,
    EuclideanDist,
    Indicator,
    Clamp,
]


def action_token(action: object) -> str:
    """Normalize a macro-action (enum member or string) to a lowercase token."""
    name = getattr(action, "name", None)
    if name is None:
        name = str(action)
    return name.strip().lower().replace("-", "_").replace(" ", "_")


def _check_index(i: int) -> None:
    if not 0 <= i < OBS_SIZE:
        raise ValueError(f"observation index {i} outside 0..{OBS_SIZE - 1}")


def validate(expr: Expr) -> None:
    """Reject trees referencing indices outside the observation vector."""
    if isinstance(expr, ObsIndex):
        _check_index(expr.index)
    elif isinstance(expr, EuclideanDist):
        for i in (*expr.a, *expr.b):
            _check_index(i)
    elif isinstance(expr, Indicator):
        p = expr.predicate
        if isinstance(p, ObsEq):
            _check_index(p.index)
        elif isinstance(p, DistLeq):
            for i in (*p.a, *p.b):
                _check_index(i)
    elif isinstance(expr, Negate):
        validate(expr.child)
    elif isinstance(expr, Clamp):
        validate(expr.child)
    elif isinstance(expr, (Add, Mul)):
        for c in expr.children:
            validate(c)


def evaluate(expr: Expr, obs, action, t: int, env_reward: float = 0.0) -> float:
    """Evaluate a tree. Pure; total on valid inputs; always finite."""
    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, ObsIndex):
        return float(obs[expr.index])
    if isinstance(expr, TimeValue):
        return float(t)
    if isinstance(expr, EnvReward):
        return float(env_reward)
    if isinstance(expr, Negate):
        return -evaluate(expr.child, obs, action, t, env_reward)
    if isinstance(expr, Add):
        return sum(evaluate(c, obs, action, t, env_reward) for c in expr.children)
    if isinstance(expr, Mul):
        out = 1.0
        for c in expr.children:
            out *= evaluate(c, obs, action, t, env_reward)
        return out
    if isinstance(expr, EuclideanDist):
        dx = float(obs[expr.a[0]]) - float(obs[expr.b[0]])
        dy = float(obs[expr.a[1]]) - float(obs[expr.b[1]])
        return math.sqrt(dx * dx + dy * dy)
    if isinstance(expr, Indicator):
        return 1.0 if _holds(expr.predicate, obs, action, env_reward) else 0.0
    if isinstance(expr, Clamp):
        v = evaluate(expr.child, obs, action, t, env_reward)
        return min(max(v, expr.lo), expr.hi)
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def compile_expr(expr: Expr):
    """Build a fast closure evaluator: f(obs, action_token, t, env_reward) -> float.

    Semantically identical to :func:`evaluate` with the action already
    normalized to its token; used in training inner loops.
    """
    if isinstance(expr, Constant):
        v = expr.value
        return lambda obs, a, t, er: v
    if isinstance(expr, ObsIndex):
        i = expr.index
        return lambda obs, a, t, er: obs[i]
    if isinstance(expr, TimeValue):
        return lambda obs, a, t, er: float(t)
    if isinstance(expr, EnvReward):
        return lambda obs, a, t, er: er
    if isinstance(expr, Negate):
        f = compile_expr(expr.child)
        return lambda obs, a, t, er: -f(obs, a, t, er)
    if isinstance(expr, Add):
        fs = tuple(compile_expr(c) for c in expr.children)
        return lambda obs, a, t, er: sum(f(obs, a, t, er) for f in fs)
    if isinstance(expr, Mul):
        fs = tuple(compile_expr(c) for c in expr.children)

        def _mul(obs, a, t, er):
            out = 1.0
            for f in fs:
                out *= f(obs, a, t, er)
            return out

        return _mul
    if isinstance(expr, EuclideanDist):
        a0, a1 = expr.a
        b0, b1 = expr.b
        return lambda obs, a, t, er: math.sqrt(
            (obs[a0] - obs[b0]) ** 2 + (obs[a1] - obs[b1]) ** 2
        )
    if isinstance(expr, Indicator):
        p = expr.predicate
        if isinstance(p, ActionIs):
            tok = p.action
            return lambda obs, a, t, er: 1.0 if a == tok else 0.0
        if isinstance(p, ObsEq):
            i, v, tol = p.index, p.value, p.tol
            return lambda obs, a, t, er: 1.0 if abs(obs[i] - v) <= tol else 0.0
        if isinstance(p, DistLeq):
            a0, a1 = p.a
            b0, b1 = p.b
            bound = p.bound
            return lambda obs, a, t, er: (
                1.0
                if math.sqrt((obs[a0] - obs[b0]) ** 2 + (obs[a1] - obs[b1]) ** 2) <= bound
                else 0.0
            )
        if isinstance(p, EnvAtLeast):
            thr = p.threshold
            return lambda obs, a, t, er: 1.0 if er >= thr else 0.0
        raise TypeError(f"unknown predicate {type(p).__name__}")
    if isinstance(expr, Clamp):
        lo, hi = expr.lo, expr.hi
        f = compile_expr(expr.child)

        def _clamp(obs, a, t, er):
            v = f(obs, a, t, er)
            return lo if v < lo else (hi if v > hi else v)

        return _clamp
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def _holds(p: Predicate, obs, action, env_reward: float) -> bool:
    if isinstance(p, ActionIs):
        return action_token(action) == p.action
    if isinstance(p, ObsEq):
        return abs(float(obs[p.index]) - p.value) <= p.tol
    if isinstance(p, DistLeq):
        dx = float(obs[p.a[0]]) - float(obs[p.b[0]])
        dy = float(obs[p.a[1]]) - float(obs[p.b[1]])
        return math.sqrt(dx * dx + dy * dy) <= p.bound
    if isinstance(p, EnvAtLeast):
        return float(env_reward) >= p.threshold
    raise TypeError(f"unknown predicate {type(p).__name__}")


# ---------------------------------------------------------------------------
# Canonical text form: prefix notation, e.g.
#   (clamp -200.0 200.0 (neg (dist 19 20 6 7)))


def _num(x: float) -> str:
    # repr round-trips floats exactly; integers keep a trailing .0 for clarity
    return repr(float(x))


def to_text(expr: Expr) -> str:
    if isinstance(expr, Constant):
        return f"(const {_num(expr.value)})"
    if isinstance(expr, ObsIndex):
        return f"(obs {expr.index})"
    if isinstance(expr, TimeValue):
        return "(time)"
    if isinstance(expr, EnvReward):
        return "(envr)"
    if isinstance(expr, Negate):
        return f"(neg {to_text(expr.child)})"
    if isinstance(expr, Add):
        return "(add " + " ".join(to_text(c) for c in expr.children) + ")"
    if isinstance(expr, Mul):
        return "(mul " + " ".join(to_text(c) for c in expr.children) + ")"
    if isinstance(expr, EuclideanDist):
        return f"(dist {expr.a[0]} {expr.a[1]} {expr.b[0]} {expr.b[1]})"
    if isinstance(expr, Indicator):
        return f"(ind {_pred_text(expr.predicate)})"
    if isinstance(expr, Clamp):
        return f"(clamp {_num(expr.lo)} {_num(expr.hi)} {to_text(expr.child)})"
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def _pred_text(p: Predicate) -> str:
    if isinstance(p, ActionIs):
        return f"(action {p.action})"
    if isinstance(p, ObsEq):
        return f"(obs-eq {p.index} {_num(p.value)} {_num(p.tol)})"
    if isinstance(p, DistLeq):
        return f"(dist-le {p.a[0]} {p.a[1]} {p.b[0]} {p.b[1]} {_num(p.bound)})"
    if isinstance(p, EnvAtLeast):
        return f"(env-ge {_num(p.threshold)})"
    raise TypeError(f"unknown predicate {type(p).__name__}")


class ExprSyntaxError(ValueError):
    """Raised when canonical text cannot be parsed back into a tree."""


def _tokenize(text: str) -> Iterator[str]:
    for tok in text.replace("(", " ( ").replace(")", " ) ").split():
        yield tok


def from_text(text: str) -> Expr:
    """Parse the canonical prefix notation produced by :func:`to_text`."""
    tokens = list(_tokenize(text))
    expr, rest = _parse(tokens, 0)
    if rest != len(tokens):
        raise ExprSyntaxError(f"trailing tokens after expression: {tokens[rest:]}")
    validate(expr)
    return expr


def _expect(tokens: list[str], pos: int, tok: str) -> int:
    if pos >= len(tokens) or tokens[pos] != tok:
        got = tokens[pos] if pos < len(tokens) else "<end>"
        raise ExprSyntaxError(f"expected {tok!r}, got {got!r}")
    return pos + 1


def _atom(tokens: list[str], pos: int) -> tuple[str, int]:
    if pos >= len(tokens) or tokens[pos] in "()":
        raise ExprSyntaxError("expected atom")
    return tokens[pos], pos + 1


def _float_atom(tokens: list[str], pos: int) -> tuple[float, int]:
    raw, pos = _atom(tokens, pos)
    try:
        return float(raw), pos
    except ValueError as e:
        raise ExprSyntaxError(f"expected number, got {raw!r}") from e


def _int_atom(tokens: list[str], pos: int) -> tuple[int, int]:
    raw, pos = _atom(tokens, pos)
    try:
        return int(raw), pos
    except ValueError as e:
        raise ExprSyntaxError(f"expected integer, got {raw!r}") from e


def _parse(tokens: list[str], pos: int) -> tuple[Expr, int]:
    pos = _expect(tokens, pos, "(")
    head, pos = _atom(tokens, pos)
    if head == "const":
        v, pos = _float_atom(tokens, pos)
        node: Expr = Constant(v)
    elif head == "obs":
        i, pos = _int_atom(tokens, pos)
        node = ObsIndex(i)
    elif head == "time":
        node = TimeValue()
    elif head == "envr":
        node = EnvReward()
    elif head == "neg":
        child, pos = _parse(tokens, pos)
        node = Negate(child)
    elif head in ("add", "mul"):
        children = []
        while pos < len(tokens) and tokens[pos] == "(":
            child, pos = _parse(tokens, pos)
            children.append(child)
        if not children:
            raise ExprSyntaxError(f"{head} needs at least one child")
        node = Add(tuple(children)) if head == "add" else Mul(tuple(children))
    elif head == "dist":
        a0, pos = _int_atom(tokens, pos)
        a1, pos = _int_atom(tokens, pos)
        b0, pos = _int_atom(tokens, pos)
        b1, pos = _int_atom(tokens, pos)
        node = EuclideanDist((a0, a1), (b0, b1))
    elif head == "ind":
        pred, pos = _parse_pred(tokens, pos)
        node = Indicator(pred)
    elif head == "clamp":
        lo, pos = _float_atom(tokens, pos)
        hi, pos = _float_atom(tokens, pos)
        child, pos = _parse(tokens, pos)
        node = Clamp(lo, hi, child)
    else:
        raise ExprSyntaxError(f"unknown node kind {head!r}")
    pos = _expect(tokens, pos, ")")
    return node, pos


def _parse_pred(tokens: list[str], pos: int) -> tuple[Predicate, int]:
    pos = _expect(tokens, pos, "(")
    head, pos = _atom(tokens, pos)
    if head == "action":
        name, pos = _atom(tokens, pos)
        pred: Predicate = ActionIs(name)
    elif head == "obs-eq":
        i, pos = _int_atom(tokens, pos)
        v, pos = _float_atom(tokens, pos)
        tol, pos = _float_atom(tokens, pos)
        pred = ObsEq(i, v, tol)
    elif head == "dist-le":
        a0, pos = _int_atom(tokens, pos)
        a1, pos = _int_atom(tokens, pos)
        b0, pos = _int_atom(tokens, pos)
        b1, pos = _int_atom(tokens, pos)
        bound, pos = _float_atom(tokens, pos)
        pred = DistLeq((a0, a1), (b0, b1), bound)
    elif head == "env-ge":
        thr, pos = _float_atom(tokens, pos)
        pred = EnvAtLeast(thr)
    else:
        raise ExprSyntaxError(f"unknown predicate kind {head!r}")
    pos = _expect(tokens, pos, ")")
    return pred, pos


# ---------------------------------------------------------------------------
# Top-level reward function: a tree plus descriptive metadata


@dataclass(frozen=True)
class RewardFunction:
    """A reward expression with the metadata carried through reports and the UI."""

    expr: Expr
    kind: str = "custom"
    description: str = ""
    source_generation: int = -1

    def __call__(self, obs, action, t: int, env_reward: float = 0.0) -> float:
        return evaluate(self.expr, obs, action, t, env_reward)

    def to_text(self) -> str:
        return to_text(self.expr)


def zero_reward(generation: int = -1) -> RewardFunction:
    """The constant-zero reward produced for feedback with nothing actionable."""
    return RewardFunction(Constant(0.0), kind="constant", description="no actionable directive", source_generation=generation)


def original_reward() -> RewardFunction:
    """The environment's own reward signal, always entry 1 of every pool."""
    return RewardFunction(EnvReward(), kind="original", description="environment reward")
