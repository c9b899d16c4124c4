"""Agent backends.

An agent backend answers one question: given an agent identity and the shared
transcript so far, what does that agent do next?  The scripted backend replays
pre-authored scenario files and is the only provider the engines need; an HTTP
backend with the same contract is provided for live providers.

Scenario files are JSON::

    {
      "name": "tc-debate",
      "seed": 7,
      "entries": [
        {"agent": "Alice", "step": 0,
         "output": {"type": "ProposeHypothesis", "statement": "..."}},
        ...
      ]
    }

Each entry is keyed by (agent, step); an agent's steps are consumed in order
0, 1, 2, ... as the engine asks that agent to act.  The ``type`` tag names an
AgentOutput variant verbatim.
"""

from __future__ import annotations

import json
import threading
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    ConfigError,
    DuplicateKey,
    MalformedOutput,
    ParseError,
    ProviderUnavailable,
    ScriptExhausted,
)


class Role(Enum):
    Researcher = "Researcher"
    Host = "Host"
    ChiefScientist = "ChiefScientist"
    MetaPlanner = "MetaPlanner"
    Worker = "Worker"


@dataclass(frozen=True)
class AgentIdentity:
    name: str
    role: Role
    expertise: str | None = None
    worker_spec: str | None = None


# ---------------------------------------------------------------------------
# Agent outputs (closed variant set)
# ---------------------------------------------------------------------------

@dataclass
class ProposeHypothesis:
    statement: str
    citations: list = field(default_factory=list)


@dataclass
class Rebut:
    """A rebuttal of another researcher's current hypothesis.

    target_name may be null in scenario files, which means the researcher
    declines to rebut anyone this round.
    """

    target_name: str | None
    critique: str = ""


@dataclass
class Revise:
    statement: str


@dataclass
class Score:
    """Four rubric integers: scientificity, rationality, novelty, effectiveness."""

    values: list

    def total(self) -> int:
        return int(sum(self.values))


@dataclass
class SelectFinal:
    hypothesis_id: int
    justification: str = ""


@dataclass
class PlanRoadmap:
    subtasks: list


@dataclass
class RequestTool:
    tool: str
    args: dict = field(default_factory=dict)


@dataclass
class Verdict:
    ok: bool
    note: str = ""


@dataclass
class FinalResponse:
    text: str


VARIANTS = {
    cls.__name__: cls
    for cls in (
        ProposeHypothesis,
        Rebut,
        Revise,
        Score,
        SelectFinal,
        PlanRoadmap,
        RequestTool,
        Verdict,
        FinalResponse,
    )
}

AgentOutput = (
    ProposeHypothesis
    | Rebut
    | Revise
    | Score
    | SelectFinal
    | PlanRoadmap
    | RequestTool
    | Verdict
    | FinalResponse
)


def validate_output(out: AgentOutput) -> AgentOutput:
    """Structural validation shared by every backend."""
    if isinstance(out, Score):
        if len(out.values) != 4:
            raise MalformedOutput("Score must carry exactly four integers, got %r" % (out.values,))
        for v in out.values:
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= 10:
                raise MalformedOutput("Score value %r outside 0..10" % (v,))
    elif isinstance(out, RequestTool):
        if not isinstance(out.tool, str) or not out.tool:
            raise MalformedOutput("RequestTool.tool must be a non-empty string")
        if not isinstance(out.args, dict):
            raise MalformedOutput("RequestTool.args must be a mapping")
    elif isinstance(out, ProposeHypothesis):
        if not isinstance(out.statement, str) or not out.statement:
            raise MalformedOutput("ProposeHypothesis.statement must be a non-empty string")
    elif isinstance(out, Revise):
        if not isinstance(out.statement, str) or not out.statement:
            raise MalformedOutput("Revise.statement must be a non-empty string")
    elif isinstance(out, SelectFinal):
        if not isinstance(out.hypothesis_id, int) or isinstance(out.hypothesis_id, bool):
            raise MalformedOutput("SelectFinal.hypothesis_id must be an integer")
    elif isinstance(out, PlanRoadmap):
        if not isinstance(out.subtasks, list) or not out.subtasks:
            raise MalformedOutput("PlanRoadmap.subtasks must be a non-empty list")
    elif isinstance(out, Verdict):
        if not isinstance(out.ok, bool):
            raise MalformedOutput("Verdict.ok must be a boolean")
    return out


def output_to_json(out: AgentOutput) -> dict:
    d = {"type": type(out).__name__}
    d.update(vars(out))
    return d


def output_from_json(obj: dict) -> AgentOutput:
    if not isinstance(obj, dict) or "type" not in obj:
        raise MalformedOutput("agent output JSON needs a 'type' tag: %r" % (obj,))
    tag = obj["type"]
    cls = VARIANTS.get(tag)
    if cls is None:
        raise MalformedOutput("unknown agent output type %r" % (tag,))
    fields = {k: v for k, v in obj.items() if k != "type"}
    try:
        out = cls(**fields)
    except TypeError as exc:
        raise MalformedOutput("bad fields for %s: %s" % (tag, exc)) from None
    return validate_output(out)


# ---------------------------------------------------------------------------
# Scenario scripts
# ---------------------------------------------------------------------------

@dataclass
class ScenarioScript:
    name: str
    seed: int
    entries: dict  # (agent, step) -> AgentOutput

    def steps_for(self, agent: str) -> int:
        return sum(1 for a, _ in self.entries if a == agent)


def load_script(path) -> ScenarioScript:
    """Parse a scenario file.

    Raises ParseError (with a line number for syntax errors) and DuplicateKey
    when two entries collide on (agent, step).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("scenario file not found: %s" % path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("%s: line %d: %s" % (path, exc.lineno, exc.msg)) from None
    if not isinstance(doc, dict) or "entries" not in doc:
        raise ParseError("%s: top level must be an object with an 'entries' list" % path)
    entries: dict = {}
    for idx, raw in enumerate(doc["entries"]):
        if not isinstance(raw, dict) or "agent" not in raw or "step" not in raw:
            raise ParseError("%s: entry %d needs 'agent' and 'step'" % (path, idx))
        key = (str(raw["agent"]), int(raw["step"]))
        if key in entries:
            raise DuplicateKey("%s: duplicate entry for agent=%s step=%d" % (path, key[0], key[1]))
        entries[key] = output_from_json(raw.get("output"))
    return ScenarioScript(
        name=str(doc.get("name", path.stem)),
        seed=int(doc.get("seed", 0)),
        entries=entries,
    )


def dump_script(script: ScenarioScript, path) -> None:
    doc = {
        "name": script.name,
        "seed": script.seed,
        "entries": [
            {"agent": a, "step": s, "output": output_to_json(out)}
            for (a, s), out in sorted(script.entries.items(), key=lambda kv: (kv[0][0], kv[0][1]))
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

class ScriptedBackend:
    """Replays a ScenarioScript.  Deterministic and offline."""

    def __init__(self, script: ScenarioScript):
        self.script = script

    def entry(self, agent_name: str, step: int, context) -> AgentOutput:
        key = (agent_name, step)
        out = self.script.entries.get(key)
        if out is None:
            raise ScriptExhausted(
                "scenario %r has no entry for agent=%s step=%d"
                % (self.script.name, agent_name, step)
            )
        return validate_output(out)


class HttpBackend:
    """POSTs {agent, step, context} to an endpoint and expects an AgentOutput JSON."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def entry(self, agent_name: str, step: int, context) -> AgentOutput:
        payload = json.dumps(
            {"agent": agent_name, "step": step, "context": context}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read().decode("utf-8")
        except OSError as exc:
            raise ProviderUnavailable("agent endpoint %s: %s" % (self.endpoint, exc)) from None
        try:
            obj = json.loads(body)
        except json.JSONDecodeError as exc:
            raise MalformedOutput("agent endpoint returned bad JSON: %s" % exc) from None
        return output_from_json(obj)


def load_backend(uri: str):
    """Resolve a backend URI: 'scripted:<path>' or an HTTP(S) endpoint."""
    if uri.startswith(("http://", "https://")):
        return HttpBackend(uri)
    scheme, sep, rest = uri.partition(":")
    if not sep:
        raise ConfigError("backend URI needs a scheme, got %r" % uri)
    if scheme == "scripted":
        return ScriptedBackend(load_script(rest))
    if scheme in ("http", "https"):
        return HttpBackend(rest)
    raise ConfigError("unknown backend scheme %r in %r" % (scheme, uri))


class BackendSession:
    """Holds per-agent step counters; the backend itself stays stateless.

    The context passed to next_action is the caller's shared transcript view.
    The session records the context length seen at every call, which the test
    suite uses to check the transparency contract (agents always see a
    non-shrinking prefix of the shared transcript).
    """

    def __init__(self, backend):
        self.backend = backend
        self.counters: dict[str, int] = {}
        self.context_log: list[tuple[str, int, int]] = []  # (agent, step, context_len)
        self._lock = threading.Lock()

    def next_action(self, agent: AgentIdentity, context) -> AgentOutput:
        with self._lock:
            step = self.counters.get(agent.name, 0)
            self.counters[agent.name] = step + 1
            self.context_log.append((agent.name, step, len(context)))
        return self.backend.entry(agent.name, step, context)
