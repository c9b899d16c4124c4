"""Multi-agent debate engine.

Protocol: researchers propose hypotheses in round 1, rebut and revise in later
rounds, a host scores every researcher after every round on a four-dimension
rubric, and a chief scientist selects the final hypothesis after the last
round.  Rebutted agents speak first in the following round.  Everything an
agent does lands on a single shared transcript that every agent sees in full.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .backend import (
    AgentIdentity,
    BackendSession,
    FinalResponse,
    ProposeHypothesis,
    Rebut,
    Revise,
    Role,
    Score,
    SelectFinal,
)
from .errors import (
    ConfigError,
    ProtocolViolation,
    ProviderUnavailable,
    UnknownAgent,
    UnknownHypothesis,
)

RUBRIC_DIMENSIONS = ("scientificity", "rationality", "novelty", "effectiveness")


@dataclass
class Hypothesis:
    id: int
    author: str
    statement: str
    round: int
    citations: list = field(default_factory=list)


@dataclass
class ScoreCard:
    researcher: str
    round: int
    scientificity: int
    rationality: int
    novelty: int
    effectiveness: int

    @property
    def total(self) -> int:
        return self.scientificity + self.rationality + self.novelty + self.effectiveness


@dataclass
class Rebuttal:
    round: int
    from_agent: str
    target: str
    critique: str


@dataclass
class DebateConfig:
    researchers: list  # list[AgentIdentity]
    rounds: int
    base_order: list  # list[str], a permutation of researcher names
    rebuttal_enabled: bool = True
    retrieval_enabled: bool = False
    topic: str = ""
    retrieval_k: int = 3

    def validate(self) -> None:
        names = [r.name for r in self.researchers]
        if sorted(self.base_order) != sorted(names):
            raise ConfigError("base_order must be a permutation of researcher names")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.rebuttal_enabled and len(names) < 2:
            raise ConfigError("rebuttals need at least two researchers")


@dataclass
class DebateOutcome:
    final: Hypothesis
    transcript: list
    score_series: dict  # agent -> list[(round, total)]
    scorecards: list
    hypotheses: list
    rebuttals: list
    selection_flagged: bool
    justification: str = ""


# ---------------------------------------------------------------------------
# Literature retrieval
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> set:
    return set(_TOKEN_RE.findall(text.lower()))


class CorpusRetrieval:
    """Serves (title, abstract) documents from a directory of text files.

    Each *.txt file holds the title on the first line and the abstract on the
    remaining lines.  Ranking is the count of shared lowercase tokens between
    the query and the document, ties broken by file name, so results are
    reproducible run to run.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ProviderUnavailable("corpus directory not found: %s" % self.directory)

    def retrieve(self, query: str, k: int) -> list:
        if k <= 0:
            return []
        qtok = _tokens(query)
        scored = []
        for f in sorted(self.directory.glob("*.txt")):
            lines = f.read_text(encoding="utf-8").splitlines()
            title = lines[0].strip() if lines else f.stem
            abstract = "\n".join(lines[1:]).strip()
            overlap = len(qtok & _tokens(title + " " + abstract))
            scored.append((-overlap, f.name, title, abstract))
        scored.sort()
        return [(title, abstract) for _, _, title, abstract in scored[:k]]


def resolve_retrieval(uri: str):
    scheme, sep, rest = uri.partition(":")
    if not sep or scheme != "corpus":
        raise ConfigError("unknown retrieval provider %r (expected corpus:<dir>)" % uri)
    return CorpusRetrieval(rest)


def retrieve_literature(provider, query: str, k: int) -> list:
    return provider.retrieve(query, k)


# ---------------------------------------------------------------------------
# Speaking order
# ---------------------------------------------------------------------------

def speaking_order(base_order, rebuttals) -> list:
    """Order for the next round: rebutted agents first, more-rebutted earlier.

    Ties and never-rebutted agents keep their relative base_order positions.
    ``rebuttals`` is an iterable of Rebuttal records from the previous round.
    """
    index = {name: i for i, name in enumerate(base_order)}
    counts = {name: 0 for name in base_order}
    for reb in rebuttals:
        if reb.from_agent not in index or reb.target not in index:
            raise UnknownAgent("rebuttal names unknown agent: %s -> %s" % (reb.from_agent, reb.target))
        counts[reb.target] += 1
    return sorted(base_order, key=lambda name: (-counts[name], index[name]))


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class _Transcript:
    def __init__(self):
        self.events: list = []

    def append(self, round_no: int, phase: str, agent: str, payload: dict) -> dict:
        ev = {
            "seq": len(self.events) + 1,
            "round": round_no,
            "phase": phase,
            "agent": agent,
            "output": payload,
        }
        self.events.append(ev)
        return ev


def _expect(output, allowed, phase: str, agent: str):
    if not isinstance(output, allowed):
        raise ProtocolViolation(
            "agent %s emitted %s during %s phase" % (agent, type(output).__name__, phase)
        )
    return output


def run_debate(config: DebateConfig, backend, retrieval=None) -> DebateOutcome:
    """Run the full debate protocol and return the outcome.

    ``backend`` is a backend object (see tianji.backend); ``retrieval`` is an
    optional provider consulted before round-1 proposals when
    config.retrieval_enabled is set.
    """
    config.validate()
    session = BackendSession(backend)
    transcript = _Transcript()
    by_name = {r.name: r for r in config.researchers}
    host = AgentIdentity("Host", Role.Host)
    chief = AgentIdentity("Chief", Role.ChiefScientist)

    hypotheses: list = []
    current: dict = {}  # researcher -> Hypothesis
    rebuttals_by_round: dict = {}
    scorecards: list = []
    score_series: dict = {name: [] for name in config.base_order}

    if config.topic:
        transcript.append(0, "topic", "system", {"text": config.topic})

    def new_hypothesis(author: str, statement: str, round_no: int, citations=None) -> Hypothesis:
        hyp = Hypothesis(
            id=len(hypotheses) + 1,
            author=author,
            statement=statement,
            round=round_no,
            citations=citations or [],
        )
        hypotheses.append(hyp)
        current[author] = hyp
        return hyp

    def host_scores(round_no: int) -> None:
        for name in config.base_order:
            out = _expect(
                session.next_action(host, transcript.events), Score, "score", host.name
            )
            card = ScoreCard(name, round_no, *out.values)
            scorecards.append(card)
            score_series[name].append((round_no, card.total))
            transcript.append(
                round_no,
                "score",
                host.name,
                {"type": "Score", "researcher": name, "values": list(out.values), "total": card.total},
            )

    # round 1: proposals only, never rebuttals
    for name in config.base_order:
        agent = by_name[name]
        if config.retrieval_enabled and retrieval is not None:
            query = config.topic
            if agent.expertise:
                query = "%s %s" % (config.topic, agent.expertise)
            results = retrieve_literature(retrieval, query, config.retrieval_k)
            transcript.append(
                1,
                "retrieval",
                name,
                {"query": query, "results": [{"title": t, "abstract": a} for t, a in results]},
            )
        out = _expect(session.next_action(agent, transcript.events), ProposeHypothesis, "propose", name)
        hyp = new_hypothesis(name, out.statement, 1, out.citations)
        transcript.append(
            1,
            "propose",
            name,
            {"type": "ProposeHypothesis", "hypothesis_id": hyp.id, "statement": hyp.statement},
        )
    host_scores(1)

    # rounds 2..R: rebuttal phase then revision phase, in computed order
    realized_orders = {1: list(config.base_order)}
    for round_no in range(2, config.rounds + 1):
        order = speaking_order(config.base_order, rebuttals_by_round.get(round_no - 1, []))
        realized_orders[round_no] = order
        if config.rebuttal_enabled:
            round_rebuttals = []
            for name in order:
                out = _expect(session.next_action(by_name[name], transcript.events), Rebut, "rebuttal", name)
                if out.target_name is None:
                    transcript.append(round_no, "rebuttal", name, {"type": "Rebut", "target": None})
                    continue
                if out.target_name not in by_name:
                    raise UnknownAgent("rebuttal targets unknown researcher %r" % out.target_name)
                if out.target_name == name:
                    raise ProtocolViolation("%s attempted to rebut itself" % name)
                if any(r.from_agent == name and r.target == out.target_name for r in round_rebuttals):
                    raise ProtocolViolation(
                        "%s rebutted %s twice in round %d" % (name, out.target_name, round_no)
                    )
                reb = Rebuttal(round_no, name, out.target_name, out.critique)
                round_rebuttals.append(reb)
                transcript.append(
                    round_no,
                    "rebuttal",
                    name,
                    {"type": "Rebut", "target": out.target_name, "critique": out.critique},
                )
            rebuttals_by_round[round_no] = round_rebuttals
        for name in order:
            out = _expect(session.next_action(by_name[name], transcript.events), Revise, "revise", name)
            hyp = new_hypothesis(name, out.statement, round_no)
            transcript.append(
                round_no,
                "revise",
                name,
                {"type": "Revise", "hypothesis_id": hyp.id, "statement": hyp.statement},
            )
        host_scores(round_no)

    # selection
    out = _expect(session.next_action(chief, transcript.events), SelectFinal, "select", chief.name)
    last_round = {h.id: h for h in hypotheses if h.round == config.rounds}
    final, flagged = select_final(last_round, scorecards, config.rounds, out)
    transcript.append(
        config.rounds,
        "select",
        chief.name,
        {
            "type": "SelectFinal",
            "hypothesis_id": final.id,
            "flagged": flagged,
            "justification": out.justification,
        },
    )

    outcome = DebateOutcome(
        final=final,
        transcript=transcript.events,
        score_series=score_series,
        scorecards=scorecards,
        hypotheses=hypotheses,
        rebuttals=[r for rs in rebuttals_by_round.values() for r in rs],
        selection_flagged=flagged,
        justification=out.justification,
    )
    outcome.realized_orders = realized_orders
    outcome.context_log = session.context_log
    return outcome


def select_final(last_round_hypotheses: dict, scorecards, final_round: int, choice: SelectFinal):
    """Validate the chief's selection against the last round's hypotheses.

    Returns (hypothesis, flagged) where flagged is True when the selection is
    not an argmax of the final-round totals.  The selection always stands; the
    flag is advisory.
    """
    hyp = last_round_hypotheses.get(choice.hypothesis_id)
    if hyp is None:
        raise UnknownHypothesis(
            "selected hypothesis %r is not from the final round" % choice.hypothesis_id
        )
    finals = {c.researcher: c.total for c in scorecards if c.round == final_round}
    flagged = bool(finals) and finals.get(hyp.author, 0) < max(finals.values())
    return hyp, flagged


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def export_score_curve(outcome: DebateOutcome, base_order) -> list:
    """Rows (agent, round, total) ordered by round then base_order position."""
    index = {name: i for i, name in enumerate(base_order)}
    rows = []
    for agent, series in outcome.score_series.items():
        for round_no, total in series:
            rows.append((agent, round_no, total))
    rows.sort(key=lambda r: (r[1], index.get(r[0], len(index))))
    return rows


def write_score_csv(outcome: DebateOutcome, base_order, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "round", "total"])
        for agent, round_no, total in export_score_curve(outcome, base_order):
            w.writerow([agent, round_no, total])


def write_transcript(outcome: DebateOutcome, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in outcome.transcript:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
