"""Planner/worker verification engine.

A session runs in one of two modes.  Simple mode executes a single tool loop
behind an `enter_easy_task_mode` marker.  Complex mode asks the meta-planner
(named TianJi by default) for a roadmap of subtasks, spawns one worker per
subtask, and closes the loop with a state-revision verification step after
every completion before any dependent subtask may start.

The telemetry ledger assigns every call a global gap-free sequence number.
Two call kinds exist: ReasoningPlanning (one per backend consultation) and
ToolExec (one per executed tool, carrying the tool name and its bus).  The
planner never executes tools; a planner identity reaching invoke_tool is a
protocol error, not a recorded call.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from .backend import (
    AgentIdentity,
    BackendSession,
    FinalResponse,
    PlanRoadmap,
    RequestTool,
    Role,
    Verdict,
)
from .errors import (
    ArgValidation,
    InvalidPlan,
    LoopBudgetExhausted,
    PlannerMayNotExecute,
    ProtocolViolation,
    SubtaskFailed,
    TianjiError,
    VerificationFailed,
)
from .minisim.gridio import inspect_header
from .recovery import apply_repair, classify_failure, propose_repair, repair_context
from .tools import ToolContext, ToolRegistry, default_registry

PLANNER_NAME = "TianJi"
SIMPLE_LOOP_BUDGET = 64
WORKER_LOOP_BUDGET = 256
REPAIR_BUDGET = 3

MODE_SIMPLE = "Simple"
MODE_COMPLEX = "Complex"

DEFAULT_COMPLEX_TRIGGERS = (
    "simulation",
    "control group",
    "experiment group",
    "control and",
    "perturb",
    "multi-stage",
    "verification",
)

DEFAULT_WORKER_SPECS = (
    "wps_configurer",
    "fnl_processor",
    "wrf_real_executor",
    "wrf_main_simulator",
    "trajectory_analyzer",
    "namelist_configurer",
    "wps_preprocessor",
    "simple_task",
)


def select_mode(request: str, override: str | None = None, triggers=DEFAULT_COMPLEX_TRIGGERS) -> str:
    if override:
        if override not in (MODE_SIMPLE, MODE_COMPLEX):
            raise ArgValidation("mode override must be Simple or Complex, got %r" % override)
        return override
    text = request.lower()
    return MODE_COMPLEX if any(t in text for t in triggers) else MODE_SIMPLE


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class Subtask:
    id: int
    description: str
    worker_spec: str
    depends_on: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)  # expected paths, workdir-relative
    status: str = "Pending"
    produced: list = field(default_factory=list)
    requeues: int = 0
    repairs: int = 0


@dataclass
class Roadmap:
    goal: str
    subtasks: list
    revision: int = 0

    def by_id(self, sid: int) -> Subtask:
        for st in self.subtasks:
            if st.id == sid:
                return st
        raise InvalidPlan("no subtask with id %d" % sid)


@dataclass
class CallRecord:
    seq: int
    wallclock: float
    agent: str
    kind: str                       # ReasoningPlanning | ToolExec
    tool: str | None = None
    category: str | None = None
    outcome: str = "Ok"             # Ok | Error
    error: str | None = None        # classified name when outcome == Error

    def to_json(self) -> dict:
        out = {
            "seq": self.seq,
            "wallclock": self.wallclock,
            "agent": self.agent,
            "kind": self.kind,
            "outcome": self.outcome,
        }
        if self.kind == "ToolExec":
            out["tool"] = self.tool
            out["category"] = self.category
        if self.outcome == "Error":
            out["error"] = self.error
        return out


class CallLedger:
    """Append-only record list; the single global ordering authority."""

    def __init__(self, clock=time.time):
        self._records = []
        self._lock = threading.Lock()
        self._clock = clock
        self._last_wall = 0.0

    def append(self, agent: str, kind: str, tool=None, category=None, outcome="Ok", error=None) -> CallRecord:
        with self._lock:
            now = self._clock()
            # clamp so the cumulative (wallclock, count) series never decreases
            wall = max(now, self._last_wall)
            self._last_wall = wall
            rec = CallRecord(len(self._records) + 1, wall, agent, kind, tool, category, outcome, error)
            self._records.append(rec)
            return rec

    def records(self) -> list:
        with self._lock:
            return list(self._records)

    def write_ndjson(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


class EventLog:
    """Timestamp-free session events: subtask status, revisions, repairs."""

    def __init__(self):
        self._events = []
        self._lock = threading.Lock()

    def append(self, event: str, **fields) -> dict:
        with self._lock:
            rec = {"seq": len(self._events) + 1, "event": event}
            rec.update(fields)
            self._events.append(rec)
            return rec

    def events(self) -> list:
        with self._lock:
            return list(self._events)

    def write_ndjson(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for ev in self.events():
                fh.write(json.dumps(ev, sort_keys=True) + "\n")


def telemetry_summary(records) -> dict:
    per_agent = {}
    per_kind = {}
    cumulative = []
    last = 0.0
    for k, rec in enumerate(records, start=1):
        per_agent[rec.agent] = per_agent.get(rec.agent, 0) + 1
        key = rec.kind if rec.kind != "ToolExec" else "ToolExec:%s" % rec.category
        per_kind[key] = per_kind.get(key, 0) + 1
        last = max(last, rec.wallclock)
        cumulative.append((last, k))
    return {
        "total": len(records),
        "per_agent": per_agent,
        "per_kind": per_kind,
        "cumulative": cumulative,
    }


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------

def worker_names(subtasks) -> dict:
    """Subtask id -> worker name.

    The first subtask (by id) using a spec gets the bare spec name; later
    subtasks sharing the spec get "spec.id".  Depends only on the roadmap,
    never on the schedule.
    """
    first_by_spec = {}
    for st in sorted(subtasks, key=lambda s: s.id):
        first_by_spec.setdefault(st.worker_spec, st.id)
    return {
        st.id: st.worker_spec if first_by_spec[st.worker_spec] == st.id else "%s.%d" % (st.worker_spec, st.id)
        for st in subtasks
    }


class Session:
    def __init__(
        self,
        backend,
        workdir,
        registry: ToolRegistry | None = None,
        planner_name: str = PLANNER_NAME,
        pending_faults=(),
        worker_cap=None,
        repair_budget: int = REPAIR_BUDGET,
        max_workers: int = 1,
        worker_specs=DEFAULT_WORKER_SPECS,
        clock=time.time,
    ):
        self.backend = BackendSession(backend)
        self.registry = registry or default_registry()
        self.ctx = ToolContext(workdir, pending_faults=pending_faults, worker_cap=worker_cap)
        self.planner = AgentIdentity(planner_name, Role.MetaPlanner)
        self.repair_budget = repair_budget
        self.max_workers = max(1, int(max_workers))
        self.worker_specs = tuple(worker_specs)
        self.ledger = CallLedger(clock=clock)
        self.events = EventLog()
        self.transcript = []

    # -- shared transcript ------------------------------------------------
    def _context(self) -> str:
        return "\n".join(self.transcript)

    def _note(self, line: str) -> None:
        self.transcript.append(line)

    def _next(self, agent: AgentIdentity):
        out = self.backend.next_action(agent, self._context())
        self.ledger.append(agent.name, "ReasoningPlanning")
        self._note("%s: %s" % (agent.name, type(out).__name__))
        return out

    # -- tool execution ----------------------------------------------------
    def invoke_tool(self, agent: AgentIdentity, tool: str, args: dict):
        """Execute one tool call, appending exactly one ToolExec record.

        Pre-checks (planner identity, unknown tool, argument validation)
        raise before any record is appended.
        """
        if agent.role == Role.MetaPlanner:
            raise PlannerMayNotExecute("%s plans and verifies; it never executes tools" % agent.name)
        spec = self.registry.get(tool)
        raw = dict(args or {})
        save_as = raw.pop("save_as", None)
        self.registry.validate_args(tool, raw)
        resolved = self.ctx.resolve(raw)
        try:
            result = spec.func(self.ctx, **resolved)
        except TianjiError as e:
            self.ledger.append(agent.name, "ToolExec", tool=tool, category=spec.category,
                               outcome="Error", error=type(e).__name__)
            self._note("%s: %s failed: %s" % (agent.name, tool, e))
            raise
        self.ctx.store(result, save_as=save_as)
        self.ledger.append(agent.name, "ToolExec", tool=tool, category=spec.category)
        self._note("%s: %s ok" % (agent.name, tool))
        return result

    # -- simple mode ---------------------------------------------------------
    def run_simple(self, request: str, budget: int = SIMPLE_LOOP_BUDGET) -> dict:
        agent = AgentIdentity("assistant", Role.Worker, worker_spec="simple_task")
        self._note("task: %s" % request)
        tools_used = ["enter_easy_task_mode"]
        self.invoke_tool(agent, "enter_easy_task_mode", {})
        calls = 1
        final_text = None
        while True:
            out = self._next(agent)
            if isinstance(out, RequestTool):
                if calls + 1 > budget:
                    raise LoopBudgetExhausted("simple task exceeded %d tool calls" % budget)
                self.invoke_tool(agent, out.tool, out.args)
                tools_used.append(out.tool)
                calls += 1
            elif isinstance(out, FinalResponse):
                self.invoke_tool(agent, "generate_response", {"text": out.text})
                tools_used.append("generate_response")
                final_text = out.text
                break
            else:
                raise ProtocolViolation(
                    "simple mode accepts RequestTool or FinalResponse, got %s" % type(out).__name__
                )
        return {
            "mode": "simple",
            "request": request,
            "tool_sequence": tools_used,
            "artifacts": list(self.ctx.artifacts),
            "final_text": final_text,
        }

    # -- complex mode ----------------------------------------------------------
    def plan_roadmap(self, goal: str) -> Roadmap:
        self._note("goal: %s" % goal)
        out = self._next(self.planner)
        if not isinstance(out, PlanRoadmap):
            raise ProtocolViolation("planner must answer PlanRoadmap, got %s" % type(out).__name__)
        subtasks = []
        seen = set()
        for entry in out.subtasks:
            if not isinstance(entry, dict):
                raise InvalidPlan("subtask entries must be mappings")
            try:
                st = Subtask(
                    id=int(entry["id"]),
                    description=str(entry.get("description", "")),
                    worker_spec=str(entry["worker_spec"]),
                    depends_on=[int(d) for d in entry.get("depends_on", [])],
                    artifacts=[str(a) for a in entry.get("artifacts", [])],
                )
            except KeyError as e:
                raise InvalidPlan("subtask entry missing %s" % e) from None
            if st.id in seen:
                raise InvalidPlan("duplicate subtask id %d" % st.id)
            seen.add(st.id)
            if st.worker_spec not in self.worker_specs:
                raise InvalidPlan("unknown worker_spec %r" % st.worker_spec)
            subtasks.append(st)
        for st in subtasks:
            for dep in st.depends_on:
                if dep not in seen:
                    raise InvalidPlan("subtask %d depends on unknown id %d" % (st.id, dep))
        _check_acyclic(subtasks)
        roadmap = Roadmap(goal=goal, subtasks=subtasks, revision=0)
        self.events.append("plan", revision=0, subtasks=[st.id for st in subtasks])
        return roadmap

    def run_complex(self, roadmap: Roadmap) -> dict:
        names = worker_names(roadmap.subtasks)
        done = set()
        failed = []

        def ready():
            return sorted(
                (st for st in roadmap.subtasks
                 if st.status == "Pending" and all(d in done for d in st.depends_on)),
                key=lambda s: s.id,
            )

        def finish(st: Subtask):
            verdict_ok, note = self._state_revision(st)
            if verdict_ok:
                done.add(st.id)
                return
            roadmap.revision += 1
            if st.requeues < 1:
                st.requeues += 1
                st.status = "Pending"
                st.produced = []
                self.events.append("subtask_status", subtask=st.id, status="Pending",
                                   reason="re-queued after failed revision")
            else:
                raise VerificationFailed(
                    "subtask %d failed state revision twice: %s" % (st.id, note)
                )

        if self.max_workers == 1:
            while True:
                batch = ready()
                if not batch:
                    break
                st = batch[0]
                self._run_worker(st, names[st.id])
                finish(st)
        else:
            pool = ThreadPoolExecutor(max_workers=self.max_workers)
            running = {}
            submitted = set()
            try:
                while True:
                    for st in ready():
                        if st.id not in submitted:
                            submitted.add(st.id)
                            running[pool.submit(self._run_worker, st, names[st.id])] = st
                    if not running:
                        break
                    finished, _ = wait(running, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        st = running.pop(fut)
                        fut.result()
                        finish(st)
                        if st.status == "Pending":
                            submitted.discard(st.id)
            finally:
                pool.shutdown(wait=True)

        incomplete = [st for st in roadmap.subtasks if st.id not in done]
        if incomplete:
            failed.extend(incomplete)
        report = {
            "mode": "complex",
            "goal": roadmap.goal,
            "revision": roadmap.revision,
            "subtasks": [
                {
                    "id": st.id,
                    "description": st.description,
                    "worker": names[st.id],
                    "status": st.status,
                    "artifacts": st.produced or st.artifacts,
                }
                for st in roadmap.subtasks
            ],
            "artifacts": list(self.ctx.artifacts),
            "telemetry": telemetry_summary(self.ledger.records()),
        }
        if failed:
            raise SubtaskFailed(
                "subtasks not completed: %s" % ", ".join(str(st.id) for st in failed)
            )
        return report

    # -- worker loop ------------------------------------------------------------
    def _run_worker(self, st: Subtask, worker_name: str, budget: int = WORKER_LOOP_BUDGET):
        agent = AgentIdentity(worker_name, Role.Worker, worker_spec=st.worker_spec)
        st.status = "Running"
        self.events.append("subtask_status", subtask=st.id, status="Running", worker=worker_name)
        executed = []  # (tool, raw args) for seamless replay after a repair
        calls = 0
        while True:
            out = self._next(agent)
            if isinstance(out, FinalResponse):
                st.status = "Done"
                self.events.append("subtask_status", subtask=st.id, status="Done")
                return
            if not isinstance(out, RequestTool):
                raise ProtocolViolation(
                    "worker %s expects RequestTool or FinalResponse, got %s"
                    % (worker_name, type(out).__name__)
                )
            calls += 1
            if calls > budget:
                raise LoopBudgetExhausted("worker %s exceeded %d tool calls" % (worker_name, budget))
            try:
                self.invoke_tool(agent, out.tool, out.args)
            except TianjiError as e:
                self._attempt_repair(st, agent, executed, out, e)
            else:
                executed.append((out.tool, out.args))
                self._collect_artifact(st)

    def _collect_artifact(self, st: Subtask):
        last = self.ctx.results.get(str(self.ctx.call_index))
        if isinstance(last, dict) and "artifact" in last:
            if last["artifact"] not in st.produced:
                st.produced.append(last["artifact"])

    def _attempt_repair(self, st: Subtask, agent: AgentIdentity, executed, failed_call: RequestTool, exc):
        message = str(exc)
        cls = classify_failure({"tool": failed_call.tool, "message": message})
        st.status = "Failed"
        self.events.append("subtask_status", subtask=st.id, status="Failed",
                           error=type(exc).__name__, failure_class=cls)
        if cls == "Unknown":
            raise SubtaskFailed(
                "subtask %d: unrepairable %s from %s: %s"
                % (st.id, type(exc).__name__, failed_call.tool, message)
            ) from exc
        if st.repairs >= self.repair_budget:
            raise SubtaskFailed(
                "subtask %d: repair budget (%d) exhausted at %s"
                % (st.id, self.repair_budget, failed_call.tool)
            ) from exc
        raw = {k: v for k, v in (failed_call.args or {}).items() if k != "save_as"}
        context = repair_context(self.ctx, failed_call.tool, self.ctx.resolve(raw), message)
        action = propose_repair(cls, context)
        apply_repair(action, self.ctx, context)
        st.repairs += 1
        self.events.append("repair", subtask=st.id, **{"class": cls}, action=action.to_json())
        st.status = "Repaired"
        self.events.append("subtask_status", subtask=st.id, status="Repaired")
        st.status = "Running"
        self.events.append("subtask_status", subtask=st.id, status="Running", resumed=True)
        # seamless resume: replay this subtask's calls from the top without
        # consulting the backend again, the failed call included; a further
        # fault surfacing mid-replay goes back through the same repair path,
        # bounded by the per-subtask repair budget
        st.produced = []
        replay = list(executed) + [(failed_call.tool, failed_call.args)]
        executed[:] = []
        for tool, args in replay:
            try:
                self.invoke_tool(agent, tool, args)
            except TianjiError as nested:
                self._attempt_repair(st, agent, executed, RequestTool(tool, args), nested)
            else:
                executed.append((tool, args))
                self._collect_artifact(st)

    # -- verification -----------------------------------------------------------
    def _state_revision(self, st: Subtask):
        expected = st.artifacts or st.produced
        note = ""
        ok = True
        for rel in expected:
            p = self.ctx.path(rel)
            if not p.is_file() or p.stat().st_size == 0:
                ok, note = False, "artifact missing"
                break
            if p.suffix == ".masd":
                try:
                    inspect_header(p)
                except TianjiError as e:
                    ok, note = False, "artifact invalid: %s" % type(e).__name__
                    break
        if ok:
            out = self._next(self.planner)
            if not isinstance(out, Verdict):
                raise ProtocolViolation(
                    "state revision expects a Verdict, got %s" % type(out).__name__
                )
            ok, note = bool(out.ok), out.note
        self.events.append("state_revision", subtask=st.id,
                           verdict="pass" if ok else "fail", note=note)
        return ok, note


def _check_acyclic(subtasks) -> None:
    deps = {st.id: set(st.depends_on) for st in subtasks}
    resolved = set()
    while deps:
        free = [sid for sid, d in deps.items() if d <= resolved]
        if not free:
            raise InvalidPlan("dependency cycle among subtasks %s" % sorted(deps))
        for sid in free:
            resolved.add(sid)
            del deps[sid]


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def write_report(report: dict, path) -> None:
    lines = ["# Verification report", ""]
    if report.get("goal"):
        lines += ["Goal: %s" % report["goal"], ""]
    if report.get("request"):
        lines += ["Task: %s" % report["request"], ""]
    lines.append("Mode: %s" % report["mode"])
    lines.append("")
    if report["mode"] == "complex":
        lines += ["| id | worker | status | artifacts |", "| --- | --- | --- | --- |"]
        for st in report["subtasks"]:
            lines.append("| %d | %s | %s | %s |" % (
                st["id"], st["worker"], st["status"],
                ", ".join(st["artifacts"]) or "-",
            ))
        lines.append("")
        tel = report["telemetry"]
        lines.append("Total calls: %d" % tel["total"])
        lines.append("")
        lines += ["| agent | calls |", "| --- | --- |"]
        for agent in sorted(tel["per_agent"]):
            lines.append("| %s | %d |" % (agent, tel["per_agent"][agent]))
        lines.append("")
        lines += ["| kind | calls |", "| --- | --- |"]
        for kind in sorted(tel["per_kind"]):
            lines.append("| %s | %d |" % (kind, tel["per_kind"][kind]))
    else:
        lines.append("Tool sequence: %s" % " -> ".join(report["tool_sequence"]))
        lines.append("")
        if report.get("final_text"):
            lines += ["Answer:", "", report["final_text"]]
    lines.append("")
    lines.append("Artifacts:")
    for a in report.get("artifacts", []):
        lines.append("- %s" % a)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
