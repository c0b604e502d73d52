"""Whitelist parser for reward expressions returned by an external service.

External reward-builder replies arrive as Python-lambda-shaped text such as::

    lambda obs, act: -sqrt((obs[19] - obs[0])**2 + (obs[20] - obs[1])**2)

The text is never executed. It is parsed with :mod:`ast` and converted into
a :mod:`marlcoach.rewards.expr` tree if and only if every node falls inside
a closed grammar: arithmetic over ``obs[i]`` and numeric constants, ``t``,
equality predicates on ``act`` or ``obs[i]``, and ``sqrt`` applied to a sum
of two squared observation differences (a Euclidean distance). Anything
else raises :class:`RewardGrammarError`.
"""

from __future__ import annotations

import ast

from . import expr as E


class RewardGrammarError(ValueError):
    """The reply contains constructs outside the safe reward grammar."""


_ALLOWED_PARAMS = {"obs", "act", "t"}


def parse_reply(text: str, r_max: float = 200.0) -> E.Expr:
    """Parse an external reward reply into a clamped expression tree.

    Raises RewardGrammarError for anything outside the grammar; never
    executes the input.
    """
    if not isinstance(text, str) or not text.strip():
        raise RewardGrammarError("empty reply")
    if "\x00" in text:
        raise RewardGrammarError("reply contains NUL bytes")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except (SyntaxError, ValueError) as e:
        raise RewardGrammarError(f"not a parseable expression: {e}") from e

    body = tree.body
    if isinstance(body, ast.Lambda):
        names = [a.arg for a in body.args.args]
        if body.args.vararg or body.args.kwarg or body.args.kwonlyargs or body.args.defaults:
            raise RewardGrammarError("lambda signature must be plain positional parameters")
        if not set(names) <= _ALLOWED_PARAMS:
            raise RewardGrammarError(f"lambda parameters must be within {sorted(_ALLOWED_PARAMS)}")
        body = body.body

    converted = _convert(body)
    E.validate(converted)
    return E.Clamp(-abs(r_max), abs(r_max), converted)


def _reject(node: ast.AST, why: str) -> RewardGrammarError:
    return RewardGrammarError(f"{why} (at {ast.dump(node)[:80]})")


def _convert(node: ast.AST) -> E.Expr:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise _reject(node, "only numeric constants allowed")
        return E.Constant(float(node.value))

    if isinstance(node, ast.Name):
        if node.id == "t":
            return E.TimeValue()
        raise _reject(node, f"bare name {node.id!r} not allowed")

    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return E.Negate(_convert(node.operand))
        if isinstance(node.op, ast.UAdd):
            return _convert(node.operand)
        raise _reject(node, "unary operator not allowed")

    if isinstance(node, ast.Subscript):
        return E.ObsIndex(_obs_index(node))

    if isinstance(node, ast.BinOp):
        return _convert_binop(node)

    if isinstance(node, ast.Call):
        return _convert_sqrt(node)

    if isinstance(node, ast.Compare):
        return E.Indicator(_convert_predicate(node))

    raise _reject(node, f"{type(node).__name__} not in the reward grammar")


def _obs_index(node: ast.Subscript) -> int:
    if not (isinstance(node.value, ast.Name) and node.value.id == "obs"):
        raise _reject(node, "only obs[...] subscripts allowed")
    idx = node.slice
    if isinstance(idx, ast.Constant) and isinstance(idx.value, int) and not isinstance(idx.value, bool):
        if 0 <= idx.value < E.OBS_SIZE:
            return idx.value
        raise _reject(node, f"obs index {idx.value} out of range")
    raise _reject(node, "obs index must be an integer literal")


def _convert_binop(node: ast.BinOp) -> E.Expr:
    if isinstance(node.op, ast.Add):
        return E.Add((_convert(node.left), _convert(node.right)))
    if isinstance(node.op, ast.Sub):
        return E.Add((_convert(node.left), E.Negate(_convert(node.right))))
    if isinstance(node.op, ast.Mult):
        return E.Mul((_convert(node.left), _convert(node.right)))
    if isinstance(node.op, ast.Div):
        # division only by nonzero numeric literals keeps evaluation total
        right = node.right
        if isinstance(right, ast.Constant) and isinstance(right.value, (int, float)) \
                and not isinstance(right.value, bool) and float(right.value) != 0.0:
            return E.Mul((_convert(node.left), E.Constant(1.0 / float(right.value))))
        raise _reject(node, "division only by nonzero constant")
    if isinstance(node.op, ast.Pow):
        if isinstance(node.right, ast.Constant) and node.right.value == 2:
            base = _convert(node.left)
            return E.Mul((base, base))
        raise _reject(node, "only **2 allowed")
    raise _reject(node, "binary operator not allowed")


def _convert_predicate(node: ast.Compare) -> E.Predicate:
    if len(node.ops) != 1 or len(node.comparators) != 1:
        raise _reject(node, "chained comparisons not allowed")
    op = node.ops[0]
    left, right = node.left, node.comparators[0]

    if isinstance(left, ast.Name) and left.id == "act":
        if not isinstance(op, ast.Eq):
            raise _reject(node, "act supports == only")
        if isinstance(right, ast.Constant) and isinstance(right.value, str):
            return E.ActionIs(E.action_token(right.value))
        raise _reject(node, "act must be compared to a string literal")

    if isinstance(left, ast.Subscript):
        idx = _obs_index(left)
        if not (isinstance(right, ast.Constant) and isinstance(right.value, (int, float))
                and not isinstance(right.value, bool)):
            raise _reject(node, "obs must be compared to a numeric literal")
        value = float(right.value)
        if isinstance(op, ast.Eq):
            return E.ObsEq(idx, value)
        raise _reject(node, "obs comparison supports == only")

    raise _reject(node, "comparison must involve act or obs[i] on the left")


def _convert_sqrt(node: ast.Call) -> E.Expr:
    if not (isinstance(node.func, ast.Name) and node.func.id == "sqrt"):
        raise _reject(node, "only sqrt(...) calls allowed")
    if node.keywords or len(node.args) != 1:
        raise _reject(node, "sqrt takes exactly one positional argument")
    pair = _match_distance(node.args[0])
    if pair is None:
        raise _reject(node, "sqrt argument must be a sum of two squared obs differences")
    return E.EuclideanDist(*pair)


def _match_distance(arg: ast.AST) -> tuple[tuple[int, int], tuple[int, int]] | None:
    """Match (obs[a0]-obs[b0])**2 + (obs[a1]-obs[b1])**2 -> ((a0,a1),(b0,b1))."""
    if not (isinstance(arg, ast.BinOp) and isinstance(arg.op, ast.Add)):
        return None
    first = _match_squared_diff(arg.left)
    second = _match_squared_diff(arg.right)
    if first is None or second is None:
        return None
    (a0, b0), (a1, b1) = first, second
    return (a0, a1), (b0, b1)


def _match_squared_diff(node: ast.AST) -> tuple[int, int] | None:
    if not (isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow)):
        return None
    if not (isinstance(node.right, ast.Constant) and node.right.value == 2):
        return None
    diff = node.left
    if not (isinstance(diff, ast.BinOp) and isinstance(diff.op, ast.Sub)):
        return None
    if not (isinstance(diff.left, ast.Subscript) and isinstance(diff.right, ast.Subscript)):
        return None
    try:
        return _obs_index(diff.left), _obs_index(diff.right)
    except RewardGrammarError:
        return None
