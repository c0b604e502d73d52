"""Per-agent reward pools with adaptive weights.

A pool is an ordered list of reward functions; entry 1 is always the
environment's own reward. New entries arrive from feedback phases with
initial weight 1/(pool size + 1); existing entries then decay by
alpha^(M-m) and all weights are renormalized. At the next generation
boundary the newest entry gains +beta if measured performance under the
original reward improved, otherwise it loses beta (floored at zero, no
renormalization). The learning signal is the weight-weighted sum over the
pool.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .expr import RewardFunction, action_token, compile_expr, from_text, original_reward, to_text

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.9
DEFAULT_BETA = 0.1


class PoolError(ValueError):
    pass


@dataclass
class PoolEntry:
    reward: RewardFunction
    weight: float
    generation_added: int
    initial_weight: float
    _compiled: object = field(default=None, repr=False, compare=False)

    @property
    def compiled(self):
        if self._compiled is None:
            self._compiled = compile_expr(self.reward.expr)
        return self._compiled


@dataclass
class RewardPool:
    """Ordered reward functions with weights for one agent."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    entries: list[PoolEntry] = field(default_factory=list)
    adjustments: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise PoolError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.beta <= 0.0:
            raise PoolError(f"beta must be positive, got {self.beta}")
        if not self.entries:
            self.entries = [PoolEntry(original_reward(), 1.0, -1, 1.0)]

    # -- introspection ------------------------------------------------------

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def weights(self) -> list[float]:
        return [e.weight for e in self.entries]

    @property
    def is_baseline(self) -> bool:
        """True when only the original reward with unit weight is present."""
        return len(self.entries) == 1 and self.entries[0].weight == 1.0

    # -- mutation (single writer, at generation boundaries) -----------------

    def insert(self, reward: RewardFunction, generation: int = -1) -> None:
        """Append a reward with initial weight 1/(pre-insertion size + 1).

        Decay and normalization are a separate step, applied by the caller
        right after insertion.
        """
        w = 1.0 / (len(self.entries) + 1)
        self.entries.append(PoolEntry(reward, w, generation, w))

    def decay_and_normalize(self) -> None:
        """Decay every entry but the newest by alpha^(M-m), then normalize all."""
        m_total = len(self.entries)
        for j, entry in enumerate(self.entries[:-1]):
            m = j + 1  # 1-indexed position
            entry.weight *= self.alpha ** (m_total - m)
        total = sum(e.weight for e in self.entries)
        if total <= 0.0:
            raise PoolError("cannot normalize: weights sum to zero")
        for entry in self.entries:
            entry.weight /= total

    def performance_adjust(self, r_prev: float, r_next: float) -> None:
        """Move the newest entry's weight by +/-beta based on the performance delta.

        Strictly positive improvement earns +beta; zero or negative delta
        costs beta, floored at zero. Weights are not renormalized here.
        No-op (with a warning) when the pool holds only the original reward.
        """
        if len(self.entries) < 2:
            logger.warning("performance_adjust on a pool without feedback entries; ignored")
            return
        newest = self.entries[-1]
        before = newest.weight
        if r_next - r_prev > 0.0:
            newest.weight = newest.weight + self.beta
        else:
            newest.weight = max(0.0, newest.weight - self.beta)
        self.adjustments.append(
            {"r_prev": r_prev, "r_next": r_next, "before": before, "after": newest.weight}
        )

    # -- evaluation ---------------------------------------------------------

    def compose_eval(self, obs, action, t: int, env_reward: float = 0.0) -> float:
        """Weighted sum of every entry evaluated at (obs, action, t, env_reward)."""
        token = getattr(action, "token", None)
        if token is None:
            token = action_token(action)
        total = 0.0
        for entry in self.entries:
            if entry.weight != 0.0:
                total += entry.weight * entry.compiled(obs, token, t, env_reward)
        return total

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "entries": [
                {
                    "expr": to_text(e.reward.expr),
                    "kind": e.reward.kind,
                    "description": e.reward.description,
                    "weight": e.weight,
                    "generation_added": e.generation_added,
                    "initial_weight": e.initial_weight,
                }
                for e in self.entries
            ],
            "adjustments": list(self.adjustments),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RewardPool":
        entries = [
            PoolEntry(
                reward=RewardFunction(
                    expr=from_text(item["expr"]),
                    kind=item.get("kind", "custom"),
                    description=item.get("description", ""),
                    source_generation=item.get("generation_added", -1),
                ),
                weight=float(item["weight"]),
                generation_added=int(item.get("generation_added", -1)),
                initial_weight=float(item.get("initial_weight", item["weight"])),
            )
            for item in data["entries"]
        ]
        pool = cls(alpha=float(data["alpha"]), beta=float(data["beta"]), entries=entries)
        pool.adjustments = list(data.get("adjustments", []))
        return pool

    def describe(self) -> str:
        lines = [f"pool: {len(self.entries)} entries, alpha={self.alpha}, beta={self.beta}"]
        for j, e in enumerate(self.entries, start=1):
            lines.append(
                f"  [{j}] w={e.weight:.6f} gen={e.generation_added} {e.reward.kind}: "
                f"{e.reward.description or to_text(e.reward.expr)}"
            )
        return "\n".join(lines)


def baseline_pools(n_agents: int, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> dict[int, RewardPool]:
    """Fresh per-agent pools holding only the original reward."""
    return {i: RewardPool(alpha=alpha, beta=beta) for i in range(1, n_agents + 1)}
