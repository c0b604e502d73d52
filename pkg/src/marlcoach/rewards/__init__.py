"""Reward machinery: expression trees, templates, safe grammar, weighted pools."""

from .expr import (
    Clamp,
    Constant,
    EnvReward,
    EuclideanDist,
    Indicator,
    Negate,
    ObsIndex,
    RewardFunction,
    TimeValue,
    evaluate,
    from_text,
    original_reward,
    to_text,
    zero_reward,
)
from .grammar import RewardGrammarError, parse_reply
from .pool import PoolError, RewardPool, baseline_pools
from .templates import (
    TemplateEngine,
    TemplateError,
    TemplateKind,
    directive_to_template,
    generate_from_feedback,
    instantiate,
)

__all__ = [
    "Clamp",
    "Constant",
    "EnvReward",
    "EuclideanDist",
    "Indicator",
    "Negate",
    "ObsIndex",
    "RewardFunction",
    "TimeValue",
    "evaluate",
    "from_text",
    "original_reward",
    "to_text",
    "zero_reward",
    "RewardGrammarError",
    "parse_reply",
    "PoolError",
    "RewardPool",
    "baseline_pools",
    "TemplateEngine",
    "TemplateError",
    "TemplateKind",
    "directive_to_template",
    "generate_from_feedback",
    "instantiate",
]
