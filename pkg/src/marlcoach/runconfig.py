"""Run configuration: YAML files with documented keys.

Example::

    layout: A                    # A | B | C, or layout_file: path
    recipe: lettuce-tomato       # lettuce-tomato | lettuce-onion-tomato
    generations: 5
    iterations_per_generation: 20
    episodes_per_iteration: 10
    max_episode_steps: 200
    gamma: 0.95
    alpha: 0.9                   # pool weight decay
    beta: 0.1                    # performance adjustment step
    eval_rollouts: 4             # X
    eval_horizon: 200            # H
    wrong_delivery_penalty: -5.0
    seeds: [0, 1, 2]
    output_dir: runs/example
    feedback:
      mode: scripted             # scripted | interactive | external
      schedule:                  # scripted mode: generation -> utterance
        1: "agent 1: get closer to lettuce"
      fallback_to_dsl: true      # external mode: fall back on parse failure
      phase_timeout: 600.0       # interactive mode: auto-skip after this many seconds
    learner:
      actor_step_size: 0.05
      critic_step_size: 0.05
      epsilon_start: 1.0
      epsilon_end: 0.05
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict

import yaml

from .gridworld import CookingEnv, builtin_layout, load_layout_file
from .gridworld.layout import RECIPES
from .learning import GenerationConfig


class ConfigError(ValueError):
    pass


@dataclass
class FeedbackConfig:
    mode: str = "scripted"
    schedule: dict[int, str] = field(default_factory=dict)
    fallback_to_dsl: bool = True
    phase_timeout: float = 600.0


@dataclass
class RunConfig:
    layout: str = "A"
    layout_file: str | None = None
    recipe: str = "lettuce-tomato"
    generations: int = 5
    iterations_per_generation: int = 200
    episodes_per_iteration: int = 25
    max_episode_steps: int = 200
    gamma: float = 0.95
    alpha: float = 0.9
    beta: float = 0.1
    eval_rollouts: int = 4
    eval_horizon: int = 200
    wrong_delivery_penalty: float = -5.0
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs/out"
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    actor_step_size: float = 0.05
    critic_step_size: float = 0.05
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05

    def validate(self) -> None:
        if self.layout_file is not None:
            if not os.path.exists(self.layout_file):
                raise ConfigError(f"layout file not found: {self.layout_file}")
        elif self.layout.upper() not in ("A", "B", "C"):
            raise ConfigError(f"unknown layout {self.layout!r}")
        if self.recipe not in RECIPES:
            raise ConfigError(f"unknown recipe {self.recipe!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.feedback.mode not in ("scripted", "interactive", "external"):
            raise ConfigError(f"unknown feedback mode {self.feedback.mode!r}")
        for k in self.feedback.schedule:
            if not 0 <= k < max(self.generations, 1):
                raise ConfigError(f"schedule generation {k} outside 0..{self.generations - 1}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if self.beta <= 0.0:
            raise ConfigError("beta must be positive")

    def generation_config(self) -> GenerationConfig:
        return GenerationConfig(
            iterations_per_generation=self.iterations_per_generation,
            episodes_per_iteration=self.episodes_per_iteration,
            max_episode_steps=self.max_episode_steps,
            gamma=self.gamma,
            actor_step_size=self.actor_step_size,
            critic_step_size=self.critic_step_size,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            eval_rollouts=self.eval_rollouts,
        )

    def env_factory(self):
        layout = (
            load_layout_file(self.layout_file, "custom")
            if self.layout_file
            else builtin_layout(self.layout)
        )
        recipe = self.recipe
        penalty = self.wrong_delivery_penalty
        max_steps = self.max_episode_steps

        def factory() -> CookingEnv:
            return CookingEnv(
                layout=layout,
                recipe=recipe,
                wrong_delivery_penalty=penalty,
                max_steps=max_steps,
            )

        return factory

    def apply_desk_scale(self) -> None:
        """Shrink per-generation training volume to laptop scale."""
        self.iterations_per_generation = min(self.iterations_per_generation, 20)
        self.episodes_per_iteration = min(self.episodes_per_iteration, 10)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["feedback"]["schedule"] = {str(k): v for k, v in self.feedback.schedule.items()}
        return data


def _build(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - known - {"learner"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    cfg = RunConfig()
    for key in known - {"feedback", "seeds"}:
        if key in data:
            setattr(cfg, key, data[key])
    if "seeds" in data:
        cfg.seeds = [int(s) for s in data["seeds"]]
    if "learner" in data:
        learner = data["learner"] or {}
        for key in ("actor_step_size", "critic_step_size", "epsilon_start", "epsilon_end"):
            if key in learner:
                setattr(cfg, key, float(learner[key]))
    if "feedback" in data:
        raw = data["feedback"] or {}
        fb = FeedbackConfig()
        if "mode" in raw:
            fb.mode = str(raw["mode"])
        if "schedule" in raw and raw["schedule"]:
            fb.schedule = {int(k): str(v) for k, v in raw["schedule"].items()}
        if "fallback_to_dsl" in raw:
            fb.fallback_to_dsl = bool(raw["fallback_to_dsl"])
        if "phase_timeout" in raw:
            fb.phase_timeout = float(raw["phase_timeout"])
        cfg.feedback = fb
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot load config {path}: {e}") from e
    return _build(data)


def config_from_dict(data: dict) -> RunConfig:
    return _build(data)
