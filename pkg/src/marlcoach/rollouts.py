"""Evaluation rollouts, the empirical return estimator, and replay documents.

Rollouts are collected under frozen policies (greedy by default) and kept
as plain data: per-step state snapshots, the joint macro-action, and the
environment reward. The performance estimate of a policy is the mean over
rollouts of the (1 - gamma)-scaled discounted return

    G = (1 - gamma) * sum_t gamma^t * r_t

which converges to the true discounted expected return as the number of
rollouts and the horizon grow.

Replay documents are line-delimited JSON: one header record (schema
version, layout, recipe, generation, per-rollout seeds) followed by one
record per step per rollout, storing absolute states so a viewer renders
ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .gridworld import CookingEnv, EnvState, MacroAction

REPLAY_SCHEMA = "replay/1"


class ReplayFormatError(ValueError):
    pass


@dataclass
class StepRecord:
    state: dict
    actions: dict[int, str]
    reward: float


@dataclass
class Trajectory:
    """One rollout. `steps` may be None for reward-only trajectories."""

    rewards: tuple[float, ...]
    horizon: int
    seed: int = 0
    generation: int = -1
    rollout_index: int = 0
    steps: Optional[list[StepRecord]] = None

    def __post_init__(self) -> None:
        if len(self.rewards) > self.horizon:
            raise ValueError("trajectory longer than its horizon")
        if any(not math.isfinite(r) for r in self.rewards):
            raise ValueError("trajectory rewards must be finite")
        if self.steps is not None and len(self.steps) != len(self.rewards):
            raise ValueError("step records and rewards disagree in length")

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def env_return(self) -> float:
        return float(sum(self.rewards))


@dataclass(frozen=True)
class ReturnEstimate:
    value: float
    rollouts: int
    horizon: int
    gamma: float
    per_rollout: tuple[float, ...]


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """(1 - gamma)-scaled discounted sum of one reward sequence."""
    arr = np.asarray(rewards, dtype=float)
    if arr.size == 0:
        return 0.0
    discounts = gamma ** np.arange(arr.size)
    return float((1.0 - gamma) * np.dot(discounts, arr))


def estimate_return(trajs: Sequence[Trajectory], gamma: float) -> ReturnEstimate:
    """Empirical performance estimate: mean per-rollout discounted return."""
    if not trajs:
        raise ValueError("cannot estimate a return from zero rollouts")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    per = tuple(discounted_return(t.rewards, gamma) for t in trajs)
    value = float(np.mean(per))
    if not math.isfinite(value):
        raise ValueError("return estimate is not finite")
    horizon = max(t.horizon for t in trajs)
    return ReturnEstimate(value=value, rollouts=len(trajs), horizon=horizon, gamma=gamma, per_rollout=per)


# ---------------------------------------------------------------------------
# Rollout collection

ActFn = Callable[[int, list[float], tuple[MacroAction, ...]], MacroAction]


def run_episode(
    env: CookingEnv,
    state: EnvState,
    act: ActFn,
    max_steps: int,
    record_states: bool = True,
) -> tuple[list[StepRecord], tuple[float, ...], EnvState]:
    """Roll one episode, re-querying `act` whenever an agent's macro terminates."""
    agents = sorted(state.agent_pos)
    macros = {
        a: act(a, env.observe(state, a), env.legal_macro_actions(state, a)) for a in agents
    }
    steps: list[StepRecord] = []
    rewards: list[float] = []
    for _ in range(max_steps):
        state, reward, terminated, done = env.step(state, macros)
        rewards.append(reward)
        steps.append(
            StepRecord(
                state=state.snapshot() if record_states else {},
                actions={a: macros[a].token for a in agents},
                reward=reward,
            )
        )
        if done:
            break
        for a in agents:
            if terminated[a]:
                macros[a] = act(a, env.observe(state, a), env.legal_macro_actions(state, a))
    return steps, tuple(rewards), state


def collect_rollouts(
    env: CookingEnv,
    act: ActFn,
    count: int,
    horizon: int,
    seeds: Sequence[int],
    generation: int = -1,
    record_states: bool = True,
) -> list[Trajectory]:
    """Collect `count` independent evaluation rollouts. No learning happens here."""
    if count < 1:
        raise ValueError("need at least one rollout")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if len(seeds) < count:
        raise ValueError(f"need {count} seeds, got {len(seeds)}")
    trajs = []
    for x in range(count):
        state = env.reset(seed=int(seeds[x]))
        steps, rewards, _ = run_episode(env, state, act, horizon, record_states=record_states)
        trajs.append(
            Trajectory(
                rewards=rewards,
                horizon=horizon,
                seed=int(seeds[x]),
                generation=generation,
                rollout_index=x,
                steps=steps if record_states else None,
            )
        )
    return trajs


# ---------------------------------------------------------------------------
# Replay documents


def serialize_replay(
    trajs: Sequence[Trajectory],
    layout_id: str,
    recipe: str,
    generation: int = -1,
) -> str:
    """Lossless line-delimited document for a batch of rollouts."""
    header = {
        "schema": REPLAY_SCHEMA,
        "layout": layout_id,
        "recipe": recipe,
        "generation": generation,
        "rollouts": len(trajs),
        "horizons": [t.horizon for t in trajs],
        "seeds": [t.seed for t in trajs],
    }
    lines = [json.dumps(header, sort_keys=True)]
    for t in trajs:
        if t.steps is None:
            raise ReplayFormatError("cannot serialize a trajectory without state records")
        for i, step in enumerate(t.steps):
            lines.append(
                json.dumps(
                    {
                        "rollout": t.rollout_index,
                        "t": i,
                        "state": step.state,
                        "actions": {str(a): tok for a, tok in step.actions.items()},
                        "reward": step.reward,
                    },
                    sort_keys=True,
                )
            )
    return "\n".join(lines) + "\n"


def load_replay(document: str) -> tuple[dict, list[Trajectory]]:
    """Parse a replay document back into (header, trajectories)."""
    lines = [ln for ln in document.splitlines() if ln.strip()]
    if not lines:
        raise ReplayFormatError("empty replay document")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ReplayFormatError(f"malformed header: {e}") from e
    if header.get("schema") != REPLAY_SCHEMA:
        raise ReplayFormatError(
            f"unsupported replay schema {header.get('schema')!r}; this build reads {REPLAY_SCHEMA}"
        )

    count = int(header["rollouts"])
    horizons = header.get("horizons", [0] * count)
    seeds = header.get("seeds", [0] * count)
    per_rollout: dict[int, list[tuple[int, StepRecord]]] = {x: [] for x in range(count)}
    for ln in lines[1:]:
        try:
            rec = json.loads(ln)
            x = int(rec["rollout"])
            step = StepRecord(
                state=rec["state"],
                actions={int(a): tok for a, tok in rec["actions"].items()},
                reward=float(rec["reward"]),
            )
            per_rollout[x].append((int(rec["t"]), step))
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as e:
            raise ReplayFormatError(f"malformed step record: {e}") from e

    trajs = []
    for x in range(count):
        records = [step for _, step in sorted(per_rollout[x], key=lambda p: p[0])]
        trajs.append(
            Trajectory(
                rewards=tuple(step.reward for step in records),
                horizon=int(horizons[x]),
                seed=int(seeds[x]),
                generation=int(header.get("generation", -1)),
                rollout_index=x,
                steps=records,
            )
        )
    return header, trajs


def write_replay_file(path, trajs: Sequence[Trajectory], layout_id: str, recipe: str, generation: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_replay(trajs, layout_id, recipe, generation))


def read_replay_file(path) -> tuple[dict, list[Trajectory]]:
    with open(path, encoding="utf-8") as fh:
        return load_replay(fh.read())
