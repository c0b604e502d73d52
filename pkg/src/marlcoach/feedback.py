"""Feedback acquisition and parsing.

An utterance is one block of free text produced once per generation by a
human, a scripted schedule, or an external language-model service. Parsing
splits it into per-agent directives plus an optional all-agents directive.

Two interchangeable parsers:

* ``parse_dsl`` — deterministic structured grammar. One statement per
  line, ``agent <id|color>: <directive>`` or ``all: <directive>``; colors
  green/rose/blue name agents 1/2/3. Lines that match nothing are routed
  verbatim to the all-agents slot with a warning flag, so parsing is total.
* ``parse_external`` — sends the parsing prompt to a configured service
  and validates the JSON-shaped reply (keys ``agent_0..agent_{N-1}`` and/or
  ``all``; note the wire format counts agents from 0 while the rest of the
  system counts from 1, so replies are shifted by +1). Invalid replies
  raise; the caller decides the fallback (by default, ``parse_dsl``).
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import httpx

from .rollouts import Trajectory

COLOR_TO_AGENT = {"green": 1, "rose": 2, "blue": 3}
AGENT_TO_COLOR = {1: "green", 2: "rose", 3: "blue"}

PARSE_PROMPT = """Given the following feedback for a multi-agent system in an Overcooked environment, assign the feedback to appropriate agents or to all agents. The system has {num_agents} agents.

Feedback: {feedback}

The agent_1 is the chef in Green, agent_2 is the chef in Rose, agent_3 is the chef in Blue.

Return your response in the following JSON format:

{{
    "agent_0": "feedback for agent 0",
    "agent_1": "feedback for agent 1",
    ...
    "all": "feedback for all agents"
}}

Only include keys for agents that receive specific feedback and 'all' if there's general feedback.
"""

BUILD_PROMPT = """Given the parsed feedback for an agent in an Overcooked environment, select and parameterize a reward function template.

The observation space is a 32-length vector as described in the task description.

Parsed Feedback: {feedback}

Observation Space (32-length vector for each agent):
- Tomato: position (2), status (1) (obs[0:2])
- Lettuce: position (2), status (1) (obs[3:5])
- Onion: position (2), status (1) (obs[6:8])
- Plate 1: position (2) (obs[9:10])
- Plate 2: position (2) (obs[11:12])
- Knife 1: position (2) (obs[13:14])
- Knife 2: position (2) (obs[15:16])
- Delivery: position (2) (obs[17:18])
- Agent 1: position (2) (obs[19:20])
- Agent 2: position (2) (obs[21:22])
- Agent 3: position (2) (obs[23:24])
- Order: one-hot encoded (7) (obs[25:32])

Available function templates:
1. Distance-based: -sqrt((agent_x - target_x)**2 + (agent_y - target_y)**2)
2. Action-based: reward for specific actions (e.g., chopping, picking up)
3. State-based: reward for achieving specific states (e.g., holding an item)
4. Time-based: penalty for time taken
5. Combination of the above

Select a template and parameterize it based on the feedback. Return your response as a Python lambda function that takes the observation vector (obs) and action (act) as input.

For example, Distance between agent 1 and tomato:

lambda obs, act: -sqrt((obs[19] - obs[0])**2 + (obs[20] - obs[1])**2)

Ensure that your function uses the correct indices from the observation vector as described in the task description.
"""


@dataclass(frozen=True)
class Utterance:
    text: str
    source: str = "scripted"  # human-ui | scripted | external-model
    generation: int = -1
    timestamp: float = 0.0


@dataclass
class Provenance:
    parser: str
    raw: str = ""


@dataclass
class ParsedFeedback:
    per_agent: dict[int, str] = field(default_factory=dict)
    all: Optional[str] = None
    provenance: Provenance = field(default_factory=lambda: Provenance("dsl"), compare=False)
    warning: bool = field(default=False, compare=False)

    def is_empty(self) -> bool:
        return not self.per_agent and not self.all

    def to_dict(self) -> dict:
        return {
            "per_agent": {str(a): t for a, t in sorted(self.per_agent.items())},
            "all": self.all,
            "parser": self.provenance.parser,
            "warning": self.warning,
        }


class FeedbackProvider(Protocol):
    def provide(self, trajs: Sequence[Trajectory], generation: int) -> Optional[Utterance]: ...


# ---------------------------------------------------------------------------
# Structured DSL

_STATEMENT = re.compile(
    r"^\s*(?:(?P<all>all)|agent\s+(?P<who>\d+|green|rose|blue))\s*:\s*(?P<directive>.+?)\s*$",
    re.IGNORECASE,
)


def parse_dsl(utterance: Utterance | str, n_agents: int = 3) -> ParsedFeedback:
    """Total, deterministic parse of the structured feedback grammar.

    Unmatched lines (free text) land verbatim in the all-agents slot and
    set the warning flag; they never fail the parse.
    """
    text = utterance.text if isinstance(utterance, Utterance) else utterance
    per_agent: dict[int, str] = {}
    all_parts: list[str] = []
    warning = False

    for line in text.splitlines():
        if not line.strip():
            continue
        m = _STATEMENT.match(line)
        if not m:
            all_parts.append(line.strip())
            warning = True
            continue
        directive = m.group("directive")
        if m.group("all"):
            all_parts.append(directive)
            continue
        who = m.group("who").lower()
        agent = COLOR_TO_AGENT.get(who) if who in COLOR_TO_AGENT else int(who)
        if agent is None or not 1 <= agent <= n_agents:
            all_parts.append(line.strip())
            warning = True
            continue
        per_agent[agent] = f"{per_agent[agent]}; {directive}" if agent in per_agent else directive

    return ParsedFeedback(
        per_agent=per_agent,
        all="; ".join(all_parts) if all_parts else None,
        provenance=Provenance("dsl", raw=text),
        warning=warning,
    )


def render_dsl(fb: ParsedFeedback) -> str:
    """Canonical text form; ``parse_dsl(render_dsl(fb))`` equals ``fb``."""
    lines = [f"agent {a}: {fb.per_agent[a]}" for a in sorted(fb.per_agent)]
    if fb.all:
        lines.append(f"all: {fb.all}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# External language-model service

_AGENT_KEY = re.compile(r"^agent_(\d+)$")


class ExternalParseError(RuntimeError):
    """Transport failure, timeout, or an unvalidatable reply."""


def validate_external_reply(reply: object, n_agents: int) -> tuple[dict[int, str], Optional[str]]:
    """Check a parse reply against the wire schema and shift agents to 1-based ids.

    Accepts a JSON object (or its text) whose keys are agent_0..agent_{N-1}
    and/or 'all', all values non-empty strings. Anything else raises
    ExternalParseError.
    """
    if isinstance(reply, (str, bytes)):
        try:
            reply = json.loads(reply)
        except json.JSONDecodeError as e:
            raise ExternalParseError(f"reply is not valid JSON: {e}") from e
    if not isinstance(reply, dict):
        raise ExternalParseError(f"reply must be a JSON object, got {type(reply).__name__}")
    if not reply:
        raise ExternalParseError("reply contains no assignments")

    per_agent: dict[int, str] = {}
    all_text: Optional[str] = None
    for key, value in reply.items():
        if not isinstance(key, str):
            raise ExternalParseError(f"non-string key {key!r}")
        if not isinstance(value, str) or not value.strip():
            raise ExternalParseError(f"value for {key!r} must be a non-empty string")
        if key == "all":
            all_text = value.strip()
            continue
        m = _AGENT_KEY.match(key)
        if not m:
            raise ExternalParseError(f"unexpected key {key!r}")
        zero_based = int(m.group(1))
        if not 0 <= zero_based < n_agents:
            raise ExternalParseError(f"agent index {zero_based} outside 0..{n_agents - 1}")
        per_agent[zero_based + 1] = value.strip()
    return per_agent, all_text


@dataclass
class ExternalClientConfig:
    endpoint: str = ""
    model: str = ""
    token: str = ""
    timeout: float = 60.0
    # test hook: bypass HTTP and answer the prompt directly
    transport: Optional[Callable[[str], object]] = None

    @classmethod
    def from_env(cls, **overrides) -> "ExternalClientConfig":
        cfg = cls(
            endpoint=os.environ.get("MARLCOACH_MODEL_URL", ""),
            model=os.environ.get("MARLCOACH_MODEL_NAME", ""),
            token=os.environ.get("MARLCOACH_MODEL_TOKEN", ""),
        )
        for k, v in overrides.items():
            setattr(cfg, k, v)
        return cfg


class ExternalModelClient:
    """One blocking request per call against the configured service."""

    def __init__(self, config: ExternalClientConfig) -> None:
        if not config.endpoint and config.transport is None:
            raise ExternalParseError("no external endpoint configured")
        self.config = config

    def _request(self, prompt: str) -> object:
        if self.config.transport is not None:
            return self.config.transport(prompt)
        headers = {}
        if self.config.token:
            headers["Authorization"] = f"Bearer {self.config.token}"
        body = {"prompt": prompt}
        if self.config.model:
            body["model"] = self.config.model
        try:
            resp = httpx.post(
                self.config.endpoint, json=body, headers=headers, timeout=self.config.timeout
            )
            resp.raise_for_status()
            return resp.json()
        except httpx.HTTPError as e:
            raise ExternalParseError(f"external service request failed: {e}") from e
        except json.JSONDecodeError as e:
            raise ExternalParseError(f"external service returned non-JSON body: {e}") from e

    def parse_feedback(self, text: str, n_agents: int) -> object:
        return self._request(PARSE_PROMPT.format(num_agents=n_agents, feedback=text))

    def build_reward(self, text: str) -> str:
        reply = self._request(BUILD_PROMPT.format(feedback=text))
        if isinstance(reply, dict) and isinstance(reply.get("reward"), str):
            return reply["reward"]
        if isinstance(reply, str):
            return reply
        raise ExternalParseError("reward build reply must be a string or {'reward': string}")


def parse_external(
    utterance: Utterance | str,
    n_agents: int,
    client: ExternalModelClient,
) -> ParsedFeedback:
    """Parse via the external service. Raises ExternalParseError on any failure."""
    text = utterance.text if isinstance(utterance, Utterance) else utterance
    reply = client.parse_feedback(text, n_agents)
    per_agent, all_text = validate_external_reply(reply, n_agents)
    if not per_agent and all_text is None:
        raise ExternalParseError("validated reply assigned nothing")
    return ParsedFeedback(
        per_agent=per_agent,
        all=all_text,
        provenance=Provenance("external", raw=json.dumps(reply, sort_keys=True, default=str)),
    )


def parse_with_fallback(
    utterance: Utterance | str,
    n_agents: int,
    client: Optional[ExternalModelClient],
    log: Optional[list] = None,
) -> ParsedFeedback:
    """External parse when a client is configured, falling back to the DSL."""
    if client is not None:
        try:
            return parse_external(utterance, n_agents, client)
        except ExternalParseError as e:
            if log is not None:
                log.append({"event": "external_parse_failed", "error": str(e)})
    return parse_dsl(utterance, n_agents)


# ---------------------------------------------------------------------------
# Providers


class ScriptedProvider:
    """Pure function of the generation index; stands in for a live evaluator."""

    def __init__(self, schedule: dict[int, str]) -> None:
        self.schedule = dict(schedule)

    def provide(self, trajs: Sequence[Trajectory], generation: int) -> Optional[Utterance]:
        text = self.schedule.get(generation)
        if text is None:
            return None
        return Utterance(text=text, source="scripted", generation=generation)


class NoFeedback:
    def provide(self, trajs: Sequence[Trajectory], generation: int) -> Optional[Utterance]:
        return None


def scripted_provider(schedule: dict[int, str]) -> ScriptedProvider:
    return ScriptedProvider(schedule)
