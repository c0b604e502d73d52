"""Generation-structured independent multi-agent learning.

Each agent learns independently with a small linear actor-critic over the
32-entry observation (plus bias): one linear score head per macro-action,
epsilon-greedy exploration with linear decay, and a semi-gradient TD(0)
critic. Because macro-actions span several environment ticks, transitions
are macro-level: the reward is the discounted sum of the per-tick composed
rewards over the macro's duration and bootstrapping uses gamma^duration.

Training is punctuated by feedback phases: after every generation the
policies are frozen, evaluation rollouts are collected, performance under
the original environment reward is estimated, the previous phase's newest
pool entry is adjusted by that performance delta, and new feedback (if
any) is parsed into reward functions that join each agent's pool.

The learning signal is always the pool composition for that agent at that
generation, recomputed per tick from the live weights - never the logged
environment reward directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .feedback import FeedbackProvider, ParsedFeedback, Utterance
from .gridworld import CookingEnv, MacroAction
from .rewards import RewardPool
from .rewards.templates import TemplateEngine
from .rollouts import Trajectory, collect_rollouts, estimate_return

logger = logging.getLogger(__name__)

AGENT_IDS = (1, 2, 3)
FEATURES = 33  # 32 observation entries + bias


@dataclass(frozen=True)
class GenerationConfig:
    iterations_per_generation: int = 200
    episodes_per_iteration: int = 25
    max_episode_steps: int = 200
    gamma: float = 0.95
    actor_step_size: float = 0.05
    critic_step_size: float = 0.05
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    eval_rollouts: int = 4
    eval_explore: bool = False

    def __post_init__(self) -> None:
        if self.iterations_per_generation < 0 or self.episodes_per_iteration <= 0:
            raise ValueError("iteration/episode counts must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")


@dataclass
class AgentParams:
    actor: np.ndarray  # (n_actions, FEATURES)
    critic: np.ndarray  # (FEATURES,)

    def copy(self) -> "AgentParams":
        return AgentParams(self.actor.copy(), self.critic.copy())


@dataclass
class PolicySnapshot:
    """Immutable-by-convention bundle of per-agent parameters."""

    params: dict[int, AgentParams]
    actions: tuple[MacroAction, ...]
    generation: int = 0
    train_iterations: int = 0

    def copy(self) -> "PolicySnapshot":
        return PolicySnapshot(
            params={a: p.copy() for a, p in self.params.items()},
            actions=self.actions,
            generation=self.generation,
            train_iterations=self.train_iterations,
        )


@dataclass
class MacroTransition:
    phi: np.ndarray
    action_index: int
    reward: float  # discounted sum of per-tick composed rewards over the macro
    duration: int
    phi_next: np.ndarray
    terminal: bool


def features(obs: Sequence[float]) -> np.ndarray:
    phi = np.empty(FEATURES)
    phi[:-1] = obs
    phi[-1] = 1.0
    return phi


class LinearLearner:
    """Independent linear actor-critic; pure given explicit RNG and step sizes."""

    def __init__(self, cfg: GenerationConfig) -> None:
        self.cfg = cfg

    def initial_snapshot(self, actions: tuple[MacroAction, ...]) -> PolicySnapshot:
        params = {
            a: AgentParams(actor=np.zeros((len(actions), FEATURES)), critic=np.zeros(FEATURES))
            for a in AGENT_IDS
        }
        return PolicySnapshot(params=params, actions=actions)

    def act(
        self,
        params: AgentParams,
        obs: Sequence[float],
        actions: tuple[MacroAction, ...],
        explore: bool = False,
        epsilon: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> MacroAction:
        if explore and rng is not None and epsilon > 0.0 and rng.random() < epsilon:
            return actions[int(rng.integers(len(actions)))]
        scores = params.actor[: len(actions)] @ features(obs)
        return actions[int(np.argmax(scores))]

    def improve(
        self,
        params: dict[int, AgentParams],
        batch: dict[int, list[MacroTransition]],
        gamma: float,
    ) -> dict[int, AgentParams]:
        """One TD(0) pass over a batch of macro transitions. Returns new params."""
        out = {a: p.copy() for a, p in params.items()}
        a_lr = self.cfg.actor_step_size
        c_lr = self.cfg.critic_step_size
        if a_lr == 0.0 and c_lr == 0.0:
            return out
        for agent in sorted(batch):
            p = out[agent]
            for tr in batch[agent]:
                v0 = float(p.critic @ tr.phi)
                v1 = 0.0 if tr.terminal else float(p.critic @ tr.phi_next)
                delta = tr.reward + (gamma ** tr.duration) * v1 - v0
                p.critic += c_lr * delta * tr.phi
                p.actor[tr.action_index] += a_lr * delta * tr.phi
        return out


def default_learner(cfg: Optional[GenerationConfig] = None) -> LinearLearner:
    return LinearLearner(cfg or GenerationConfig())


# ---------------------------------------------------------------------------
# Episode collection with composed rewards


def run_training_episode(
    env: CookingEnv,
    learner: LinearLearner,
    snapshot: PolicySnapshot,
    pools: dict[int, RewardPool],
    epsilon: float,
    rng: np.random.Generator,
    episode_seed: int,
    tick_log: Optional[list] = None,
) -> tuple[dict[int, list[MacroTransition]], float, dict[int, float]]:
    """One exploratory episode; returns macro transitions, env return, composed returns."""
    cfg = learner.cfg
    gamma = cfg.gamma
    actions = snapshot.actions
    state = env.reset(seed=episode_seed)

    obs = {a: env.observe(state, a) for a in AGENT_IDS}
    macros = {
        a: learner.act(snapshot.params[a], obs[a], actions, explore=True, epsilon=epsilon, rng=rng)
        for a in AGENT_IDS
    }
    action_index = {m: i for i, m in enumerate(actions)}
    open_phi = {a: features(obs[a]) for a in AGENT_IDS}
    open_acc = {a: 0.0 for a in AGENT_IDS}
    open_dur = {a: 0 for a in AGENT_IDS}
    transitions: dict[int, list[MacroTransition]] = {a: [] for a in AGENT_IDS}
    env_return = 0.0
    composed_return = {a: 0.0 for a in AGENT_IDS}

    for _ in range(cfg.max_episode_steps):
        state, r_env, terminated, done = env.step(state, macros)
        env_return += r_env
        for a in AGENT_IDS:
            o = env.observe(state, a)
            r_hat = pools[a].compose_eval(o, macros[a], state.timestep, r_env)
            composed_return[a] += r_hat
            open_acc[a] += (gamma ** open_dur[a]) * r_hat
            open_dur[a] += 1
            obs[a] = o
            if tick_log is not None:
                tick_log.append(
                    {
                        "agent": a,
                        "t": state.timestep,
                        "obs": list(o),
                        "action": macros[a].token,
                        "env_reward": r_env,
                        "signal": r_hat,
                    }
                )
        if done:
            for a in AGENT_IDS:
                transitions[a].append(
                    MacroTransition(
                        phi=open_phi[a],
                        action_index=action_index[macros[a]],
                        reward=open_acc[a],
                        duration=open_dur[a],
                        phi_next=features(obs[a]),
                        terminal=True,
                    )
                )
            break
        for a in AGENT_IDS:
            if terminated[a]:
                phi_next = features(obs[a])
                transitions[a].append(
                    MacroTransition(
                        phi=open_phi[a],
                        action_index=action_index[macros[a]],
                        reward=open_acc[a],
                        duration=open_dur[a],
                        phi_next=phi_next,
                        terminal=False,
                    )
                )
                macros[a] = learner.act(
                    snapshot.params[a], obs[a], actions, explore=True, epsilon=epsilon, rng=rng
                )
                open_phi[a] = phi_next
                open_acc[a] = 0.0
                open_dur[a] = 0
    return transitions, env_return, composed_return


def _episode_rng(seed: int, generation: int, iteration: int, episode: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, generation, iteration, episode]))


def _episode_seed(seed: int, generation: int, iteration: int, episode: int) -> int:
    return seed * 1_000_000 + generation * 100_000 + iteration * 1_000 + episode


MetricsSink = Callable[[dict], None]


def train_generation(
    snapshot: PolicySnapshot,
    pools: dict[int, RewardPool],
    cfg: GenerationConfig,
    env_factory: Callable[[], CookingEnv],
    seed: int,
    learner: Optional[LinearLearner] = None,
    metrics_sink: Optional[MetricsSink] = None,
) -> PolicySnapshot:
    """Train every agent for one generation against its composed reward."""
    learner = learner or LinearLearner(cfg)
    env = env_factory()
    generation = snapshot.generation
    snapshot = snapshot.copy()
    total_eps = cfg.iterations_per_generation * cfg.episodes_per_iteration

    ep_global = 0
    for iteration in range(cfg.iterations_per_generation):
        batch: dict[int, list[MacroTransition]] = {a: [] for a in AGENT_IDS}
        env_returns = []
        composed = []
        for episode in range(cfg.episodes_per_iteration):
            frac = ep_global / max(1, total_eps - 1)
            epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
            rng = _episode_rng(seed, generation, iteration, episode)
            transitions, env_ret, comp_ret = run_training_episode(
                env,
                learner,
                snapshot,
                pools,
                epsilon,
                rng,
                episode_seed=_episode_seed(seed, generation, iteration, episode),
            )
            for a in AGENT_IDS:
                batch[a].extend(transitions[a])
            env_returns.append(env_ret)
            composed.append(float(np.mean([comp_ret[a] for a in AGENT_IDS])))
            ep_global += 1
        snapshot.params = learner.improve(snapshot.params, batch, cfg.gamma)
        snapshot.train_iterations += 1
        if metrics_sink is not None:
            metrics_sink(
                {
                    "generation": generation,
                    "iteration": iteration,
                    "mean_composed_return": float(np.mean(composed)),
                    "mean_original_return": float(np.mean(env_returns)),
                    "weights": {a: list(pools[a].weights) for a in AGENT_IDS},
                }
            )
    snapshot.generation = generation + 1
    return snapshot


# ---------------------------------------------------------------------------
# The full loop: train, roll out, estimate, adjust, parse, insert


@dataclass
class PhaseRecord:
    generation: int
    r_ori: float
    utterance: Optional[dict] = None
    parsed: Optional[dict] = None
    rewards: dict[int, dict] = field(default_factory=dict)
    adjustments: dict[int, dict] = field(default_factory=dict)
    weights_after: dict[int, list[float]] = field(default_factory=dict)
    skipped: bool = False


@dataclass
class RunResult:
    seed: int
    phases: list[PhaseRecord]
    metrics: list[dict]
    snapshot: PolicySnapshot
    pools: dict[int, RewardPool]
    replays: dict[int, list[Trajectory]]

    @property
    def feedback_phase_count(self) -> int:
        return sum(1 for p in self.phases if p.utterance is not None)

    @property
    def final_r_ori(self) -> float:
        return self.phases[-1].r_ori if self.phases else float("nan")


Parser = Callable[[Utterance, int], ParsedFeedback]


def _eval_seed(seed: int, generation: int, x: int) -> int:
    return seed * 1_000_000 + 900_000 + generation * 1_000 + x


def run_phased_training(
    env_factory: Callable[[], CookingEnv],
    cfg: GenerationConfig,
    generations: int,
    pools: dict[int, RewardPool],
    provider: FeedbackProvider,
    parser: Parser,
    template_engine: TemplateEngine,
    seed: int,
    learner: Optional[LinearLearner] = None,
    eval_horizon: Optional[int] = None,
    keep_replays: bool = True,
    on_phase: Optional[Callable[[PhaseRecord], None]] = None,
) -> RunResult:
    """Run `generations` cycles of train -> rollout -> estimate -> feedback.

    The feedback phase only mutates pools when the provider produced an
    utterance and the template engine yielded a reward for an agent; reward
    generation failures are recorded and skipped so training always
    continues.
    """
    learner = learner or LinearLearner(cfg)
    env = env_factory()
    snapshot = learner.initial_snapshot(env.legal_macro_actions(env.reset(seed=0), 1))
    metrics: list[dict] = []
    phases: list[PhaseRecord] = []
    replays: dict[int, list[Trajectory]] = {}
    horizon = eval_horizon or cfg.max_episode_steps

    r_prev: Optional[float] = None
    inserted_last_phase: set[int] = set()

    for k in range(generations):
        snapshot = train_generation(
            snapshot, pools, cfg, env_factory, seed, learner, metrics_sink=metrics.append
        )

        def greedy(agent: int, obs, legal):
            return learner.act(snapshot.params[agent], obs, legal, explore=False)

        trajs = collect_rollouts(
            env,
            greedy,
            count=cfg.eval_rollouts,
            horizon=horizon,
            seeds=[_eval_seed(seed, k, x) for x in range(cfg.eval_rollouts)],
            generation=k,
            record_states=keep_replays,
        )
        if keep_replays:
            replays[k] = trajs
        r_now = estimate_return(trajs, cfg.gamma).value
        record = PhaseRecord(generation=k, r_ori=r_now)

        if r_prev is not None and inserted_last_phase:
            for a in sorted(inserted_last_phase):
                if len(pools[a]) >= 2:
                    pools[a].performance_adjust(r_prev, r_now)
                    record.adjustments[a] = dict(pools[a].adjustments[-1])
        inserted_last_phase = set()

        utterance = provider.provide(trajs, k)
        if utterance is None:
            record.skipped = True
        else:
            record.utterance = {
                "text": utterance.text,
                "source": utterance.source,
                "generation": utterance.generation,
            }
            try:
                parsed = parser(utterance, len(AGENT_IDS))
            except Exception as e:  # parser failure: proceed without new rewards
                logger.warning("feedback parsing failed at generation %d: %s", k, e)
                record.parsed = {"error": str(e)}
                parsed = None
            if parsed is not None:
                record.parsed = parsed.to_dict()
                for a in AGENT_IDS:
                    try:
                        rf = template_engine.generate(parsed, a, generation=k)
                    except Exception as e:  # reward generation failure: record and skip
                        logger.warning("reward generation failed for agent %d: %s", a, e)
                        record.rewards[a] = {"error": str(e)}
                        continue
                    if rf is None:
                        record.rewards[a] = {"inserted": False}
                        continue
                    pools[a].insert(rf, generation=k)
                    initial = pools[a].entries[-1].initial_weight
                    pools[a].decay_and_normalize()
                    inserted_last_phase.add(a)
                    record.rewards[a] = {
                        "inserted": True,
                        "expr": rf.to_text(),
                        "kind": rf.kind,
                        "description": rf.description,
                        "initial_weight": initial,
                    }

        record.weights_after = {a: list(pools[a].weights) for a in AGENT_IDS}
        phases.append(record)
        if on_phase is not None:
            on_phase(record)
        r_prev = r_now

    return RunResult(
        seed=seed,
        phases=phases,
        metrics=metrics,
        snapshot=snapshot,
        pools=pools,
        replays=replays,
    )
