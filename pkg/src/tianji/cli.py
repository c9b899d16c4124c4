"""Command-line front end for the meteorology workbench.

Subcommands
-----------
debate    run a structured hypothesis debate and export its artifacts
verify    run a goal through mode selection and the verification engine
sim       drive simulator stages directly (preprocess | init | run | perturb)
analyze   dataset analytics (locate | area-stat | track | compare | divergence | profile)
fixtures  stage bundled inputs, scenario scripts, and goal files into the workdir

All artifacts land under the workdir, which keeps a fixed layout: inputs/,
sim/, analysis/, plots/, logs/, and report.md at the top.  The default
workdir comes from $TIANJI_WORKDIR, falling back to the current directory.

Exit codes: 0 success, 2 configuration or usage error, 3 protocol violation,
4 subtask failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import fixtures
from .analysis import (
    FeaturePoint,
    FeatureSeries,
    Trajectory,
    area_stat,
    divergence,
    ingest_tensor,
    locate_feature,
    radial_profile,
    track_compare,
    track_feature,
    write_profile_csv,
)
from .backend import AgentIdentity, Role, load_backend
from .debate import (
    DebateConfig,
    export_score_curve,
    resolve_retrieval,
    run_debate,
    write_score_csv,
    write_transcript,
)
from .errors import (
    ConfigError,
    InvalidPlan,
    LoopBudgetExhausted,
    MalformedOutput,
    ProtocolViolation,
    ScriptExhausted,
    SubtaskFailed,
    TianjiError,
    UnknownAgent,
    UnknownHypothesis,
    VerificationFailed,
)
from .orchestrator import Session, select_mode, telemetry_summary, write_report
from .recovery import (
    INJECTABLE_CLASSES,
    apply_repair,
    classify_failure,
    propose_repair,
    repair_context,
)
from .tools import ToolContext, default_registry
from .viz import plot_bar_chart, plot_cartesian_chart

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3
EXIT_SUBTASK = 4
EXIT_VERIFICATION = 5

WORKDIR_SUBDIRS = ("inputs", "sim", "analysis", "plots", "logs")

_PROTOCOL_ERRORS = (
    ProtocolViolation,
    MalformedOutput,
    ScriptExhausted,
    UnknownAgent,
    UnknownHypothesis,
    InvalidPlan,
    LoopBudgetExhausted,
)


@dataclasses.dataclass
class RunConfig:
    """Bundle of the flags every subcommand shares."""

    workdir: Path
    backend_uri: str | None = None
    mode: str = "auto"
    repair_budget: int = 3
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("worker cap must be >= 1, got %d" % self.workers)
        if self.repair_budget < 0:
            raise ConfigError("repair budget must be >= 0, got %d" % self.repair_budget)
        self.workdir = Path(self.workdir)


def ensure_workdir(workdir) -> Path:
    wd = Path(workdir).resolve()
    for sub in WORKDIR_SUBDIRS:
        (wd / sub).mkdir(parents=True, exist_ok=True)
    return wd


# ---------------------------------------------------------------------------
# debate
# ---------------------------------------------------------------------------

def _read_topic(topic: str) -> str:
    p = Path(topic)
    try:
        if p.is_file():
            return p.read_text(encoding="utf-8").strip()
    except OSError:
        pass
    return topic


def _parse_researchers(specs):
    if not specs:
        return fixtures.debate_researchers()
    researchers = []
    for raw in specs:
        name, _, expertise = raw.partition(":")
        name = name.strip()
        if not name:
            raise ConfigError("researcher spec %r needs at least a name" % raw)
        researchers.append(
            AgentIdentity(name, Role.Researcher, expertise=expertise.strip() or None)
        )
    return researchers


def _score_curve_plot(outcome, base_order, path) -> None:
    rows = export_score_curve(outcome, base_order)
    series = []
    for name in base_order:
        pts = [(rnd, total) for agent, rnd, total in rows if agent == name]
        series.append({
            "label": name,
            "x": [float(p[0]) for p in pts],
            "y": [float(p[1]) for p in pts],
        })
    plot_cartesian_chart(series, path, title="Hypothesis scores by round",
                         xlabel="round", ylabel="total score")


def _final_hypothesis_text(outcome) -> str:
    hyp = outcome.final
    lines = [
        "id: %d" % hyp.id,
        "author: %s" % hyp.author,
        "round: %d" % hyp.round,
        "flagged: %s" % ("yes" if outcome.selection_flagged else "no"),
        "",
        hyp.statement,
    ]
    if outcome.justification:
        lines += ["", "justification: %s" % outcome.justification]
    return "\n".join(lines) + "\n"


def cmd_debate(topic: str, config: RunConfig, rounds: int = 6,
               researcher_specs=None, retrieval_uri=None) -> int:
    """Run a debate and write transcript, score CSV, score SVG, and the
    selected hypothesis under the workdir."""
    wd = ensure_workdir(config.workdir)
    if not config.backend_uri:
        raise ConfigError("debate needs --backend (for example scripted:<scenario.json>)")
    backend = load_backend(config.backend_uri)
    researchers = _parse_researchers(researcher_specs)
    base_order = [r.name for r in researchers]
    debate_cfg = DebateConfig(
        researchers=researchers,
        rounds=rounds,
        base_order=base_order,
        topic=_read_topic(topic),
        retrieval_enabled=retrieval_uri is not None,
    )
    retrieval = resolve_retrieval(retrieval_uri) if retrieval_uri else None
    outcome = run_debate(debate_cfg, backend, retrieval)

    transcript = wd / "logs" / "debate_transcript.ndjson"
    scores_csv = wd / "analysis" / "debate_scores.csv"
    curve_svg = wd / "plots" / "debate_score_curve.svg"
    final_txt = wd / "analysis" / "final_hypothesis.txt"
    write_transcript(outcome, transcript)
    write_score_csv(outcome, base_order, scores_csv)
    _score_curve_plot(outcome, base_order, curve_svg)
    final_txt.write_text(_final_hypothesis_text(outcome), encoding="utf-8")
    for p in (transcript, scores_csv, curve_svg, final_txt):
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _telemetry_plots(records, plots_dir: Path) -> None:
    if not records:
        return
    agents = sorted({r.agent for r in records})
    series = []
    for name in agents:
        xs, ys = [0.0], [0.0]
        n = 0
        for r in records:
            if r.agent == name:
                n += 1
                xs.append(float(r.seq))
                ys.append(float(n))
        series.append({"label": name, "x": xs, "y": ys})
    plot_cartesian_chart(series, plots_dir / "telemetry_cumulative.svg",
                         title="Cumulative actions by call sequence",
                         xlabel="call sequence", ylabel="actions")
    per_agent = telemetry_summary(records)["per_agent"]
    labels = sorted(per_agent)
    plot_bar_chart(labels, [per_agent[k] for k in labels],
                   plots_dir / "telemetry_per_agent.svg",
                   title="Actions per agent", ylabel="calls")


def cmd_verify(goal_path, config: RunConfig, inject=()) -> int:
    """Select a mode for the goal, run it, and write report plus telemetry.

    The call ledger, event log, and telemetry plots are written even when the
    run fails, so a post-mortem always has the full trace.
    """
    wd = ensure_workdir(config.workdir)
    if not config.backend_uri:
        raise ConfigError("verify needs --backend (for example scripted:<scenario.json>)")
    backend = load_backend(config.backend_uri)
    goal_file = Path(goal_path)
    if not goal_file.is_file():
        raise ConfigError("goal file %s does not exist" % goal_file)
    goal = goal_file.read_text(encoding="utf-8").strip()
    override = None if config.mode == "auto" else config.mode.capitalize()
    mode = select_mode(goal, override)
    session = Session(
        backend,
        wd,
        registry=default_registry(),
        pending_faults=tuple(inject or ()),
        repair_budget=config.repair_budget,
        max_workers=config.workers,
    )
    try:
        if mode == "Simple":
            report = session.run_simple(goal)
        else:
            roadmap = session.plan_roadmap(goal)
            report = session.run_complex(roadmap)
    finally:
        session.ledger.write_ndjson(wd / "logs" / "calls.ndjson")
        session.events.write_ndjson(wd / "logs" / "events.ndjson")
        _telemetry_plots(session.ledger.records(), wd / "plots")
    write_report(report, wd / "report.md")
    if report["mode"] == "complex":
        print("complex run complete: %d subtasks done, report at %s"
              % (len(report["subtasks"]), wd / "report.md"))
    else:
        print("simple run complete: %d tool calls, report at %s"
              % (len(report["tool_sequence"]), wd / "report.md"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sim
# ---------------------------------------------------------------------------

_SIM_TOOL = {"preprocess": "sim_preprocess", "init": "sim_init", "run": "run_simulation"}


def _invoke_with_repair(ctx, registry, tool: str, args: dict):
    """Invoke a tool; on a classifiable fault, repair once and retry.

    Mirrors the engine's classify / propose / apply sequence so the direct
    subcommands behave like an in-session call with repair budget 1.
    """
    registry.validate_args(tool, args)
    func = registry.get(tool).func
    try:
        return func(ctx, **args)
    except TianjiError as exc:
        cls = classify_failure(str(exc))
        if cls == "Unknown":
            raise
        context = repair_context(ctx, tool, args, str(exc))
        action = propose_repair(cls, context)
        apply_repair(action, ctx, context)
        print("fault %s repaired via %s; retrying %s"
              % (cls, type(action).__name__, tool), file=sys.stderr)
    return func(ctx, **args)


def cmd_sim(sub: str, config: RunConfig, ns) -> int:
    wd = ensure_workdir(config.workdir)
    ctx = ToolContext(wd, pending_faults=tuple(ns.inject or ()),
                      worker_cap=config.workers)
    registry = default_registry()
    if sub == "perturb":
        args = {"src": ns.src, "var": ns.var, "op": ns.op,
                "value": ns.value, "out": ns.out}
        _invoke_with_repair(ctx, registry, "perturb_field", args)
        print(ctx.path(ns.out))
        return EXIT_OK
    if sub == "preprocess":
        args = {"namelist": ns.namelist, "input_dir": ns.input_dir, "out": ns.out}
    elif sub == "init":
        args = {"namelist": ns.namelist, "ic": ns.ic, "out": ns.out}
    else:
        args = {"namelist": ns.namelist, "state": ns.state, "out": ns.out}
    _invoke_with_repair(ctx, registry, _SIM_TOOL[sub], args)
    print(ctx.path(ns.out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, FeaturePoint):
        return dataclasses.asdict(obj)
    if isinstance(obj, FeatureSeries):
        return {"mode": obj.mode, "points": [_jsonable(p) for p in obj.points]}
    if isinstance(obj, Trajectory):
        return {"mode": obj.mode, "points": [_jsonable(p) for p in obj.points]}
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    return obj


def cmd_analyze(sub: str, config: RunConfig, ns) -> int:
    wd = ensure_workdir(config.workdir)

    def path_of(p):
        q = Path(p)
        return q if q.is_absolute() else wd / q

    def emit(payload):
        print(json.dumps(payload, indent=2, sort_keys=True))

    if sub == "locate":
        tensor = ingest_tensor(path_of(ns.data), ns.var, time_sel=ns.time)
        emit(_jsonable(locate_feature(tensor, ns.mode)))
    elif sub == "area-stat":
        tensor = ingest_tensor(path_of(ns.data), ns.var, time_sel=ns.time)
        emit({"var": ns.var, "stat": ns.stat,
              "value": area_stat(tensor, ns.stat)})
    elif sub == "track":
        traj = track_feature(path_of(ns.data), var=ns.var, mode=ns.mode,
                             search_radius_km=ns.radius_km)
        if ns.out:
            traj.write_csv(path_of(ns.out))
        emit(_jsonable(traj))
    elif sub == "compare":
        ta = track_feature(path_of(ns.a), var=ns.var, mode=ns.mode,
                           search_radius_km=ns.radius_km)
        tb = track_feature(path_of(ns.b), var=ns.var, mode=ns.mode,
                           search_radius_km=ns.radius_km)
        emit(_jsonable(track_compare(ta, tb)))
    elif sub == "divergence":
        u = ingest_tensor(path_of(ns.data), ns.u, time_sel=ns.time)
        v = ingest_tensor(path_of(ns.data), ns.v, time_sel=ns.time)
        div = divergence(u, v)
        emit({"min": _jsonable(locate_feature(div, "min")),
              "max": _jsonable(locate_feature(div, "max"))})
    else:
        tensor = ingest_tensor(path_of(ns.data), ns.var, time_sel=ns.time)
        rows = radial_profile(tensor, (ns.lat, ns.lon), ns.rmax_km, ns.bins)
        if ns.out:
            write_profile_csv(rows, path_of(ns.out))
        emit([{"r_km": r, "mean": m} for r, m in rows])
    return EXIT_OK


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def cmd_fixtures(case: str, config: RunConfig) -> int:
    """Write corpus, scenario scripts, and goal files, then stage case inputs.

    Raw simulator inputs are staged one case per workdir: the repair bus
    derives a namelist prefix by scanning inputs/, so mixing the squall and
    typhoon input files there would make that scan ambiguous.  --case all
    stages everything except those raw inputs.
    """
    wd = ensure_workdir(config.workdir)
    fixtures.write_all(wd)
    if case == "all":
        staged = ["analysis"]
    elif case == "debate":
        staged = []
    else:
        staged = [case]
    for c in staged:
        fixtures.prepare_workdir(wd, c)
    print("fixtures staged under %s (case: %s)" % (wd, case))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", default=os.environ.get("TIANJI_WORKDIR", "."),
                        help="artifact root (default: $TIANJI_WORKDIR or '.')")
    common.add_argument("--backend", default=None,
                        help="agent backend URI: scripted:<file> or http(s)://...")
    common.add_argument("--repair-budget", type=int, default=3)
    common.add_argument("--workers", type=int, default=1,
                        help="parallel worker cap (>= 1)")
    common.add_argument("--seed", type=int, default=0,
                        help="seed recorded for scenario and fixture generation")
    common.add_argument("--inject", action="append", default=None,
                        choices=list(INJECTABLE_CLASSES), metavar="CLASS",
                        help="queue a one-shot fabricated fault (repeatable)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="tianji",
        description="Desk-scale meteorology workbench: debate, verify, simulate, analyze.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("debate", parents=[common],
                       help="run a hypothesis debate against a backend")
    p.add_argument("topic", help="topic text, or a path to a topic file")
    p.add_argument("--rounds", type=int, default=6)
    p.add_argument("--researcher", action="append", dest="researchers",
                   metavar="NAME:EXPERTISE",
                   help="override the default researcher panel (repeatable)")
    p.add_argument("--retrieval", default=None,
                   help="literature provider URI (corpus:<dir>)")

    p = sub.add_parser("verify", parents=[common],
                       help="verify a goal end to end")
    p.add_argument("--goal", required=True, help="path to the goal file")
    p.add_argument("--mode", choices=("auto", "simple", "complex"),
                   default="auto", help="override task-mode selection")

    p = sub.add_parser("sim", help="drive simulator stages directly")
    ssub = p.add_subparsers(dest="sim_command", required=True)
    sp = ssub.add_parser("preprocess", parents=[common])
    sp.add_argument("--namelist", required=True)
    sp.add_argument("--input-dir", default="inputs")
    sp.add_argument("--out", default="sim/ic.masd")
    sp = ssub.add_parser("init", parents=[common])
    sp.add_argument("--namelist", required=True)
    sp.add_argument("--ic", default="sim/ic.masd")
    sp.add_argument("--out", default="sim/state0.masd")
    sp = ssub.add_parser("run", parents=[common])
    sp.add_argument("--namelist", required=True)
    sp.add_argument("--state", default="sim/state0.masd")
    sp.add_argument("--out", default="sim/run.masd")
    sp = ssub.add_parser("perturb", parents=[common])
    sp.add_argument("--src", required=True)
    sp.add_argument("--var", required=True)
    sp.add_argument("--op", required=True, choices=("add", "scale"))
    sp.add_argument("--value", required=True, type=float)
    sp.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="dataset analytics")
    asub = p.add_subparsers(dest="analyze_command", required=True)
    ap = asub.add_parser("locate", parents=[common])
    ap.add_argument("--data", default="sim/run.masd")
    ap.add_argument("--var", required=True)
    ap.add_argument("--mode", dest="mode", choices=("min", "max"), default="min")
    ap.add_argument("--time", type=int, default=None)
    ap = asub.add_parser("area-stat", parents=[common])
    ap.add_argument("--data", default="sim/run.masd")
    ap.add_argument("--var", required=True)
    ap.add_argument("--stat", choices=("mean", "min", "max"), default="mean")
    ap.add_argument("--time", type=int, default=None)
    ap = asub.add_parser("track", parents=[common])
    ap.add_argument("--data", default="sim/run.masd")
    ap.add_argument("--var", required=True)
    ap.add_argument("--mode", dest="mode", choices=("min", "max"), default="min")
    ap.add_argument("--radius-km", type=float, default=300.0)
    ap.add_argument("--out", default=None, help="optional trajectory CSV path")
    ap = asub.add_parser("compare", parents=[common])
    ap.add_argument("--a", required=True, help="first dataset")
    ap.add_argument("--b", required=True, help="second dataset")
    ap.add_argument("--var", required=True)
    ap.add_argument("--mode", dest="mode", choices=("min", "max"), default="min")
    ap.add_argument("--radius-km", type=float, default=300.0)
    ap = asub.add_parser("divergence", parents=[common])
    ap.add_argument("--data", default="sim/run.masd")
    ap.add_argument("--u", default="U10")
    ap.add_argument("--v", default="V10")
    ap.add_argument("--time", type=int, default=None)
    ap = asub.add_parser("profile", parents=[common])
    ap.add_argument("--data", default="sim/run.masd")
    ap.add_argument("--var", required=True)
    ap.add_argument("--time", type=int, default=None)
    ap.add_argument("--lat", type=float, required=True)
    ap.add_argument("--lon", type=float, required=True)
    ap.add_argument("--rmax-km", type=float, default=500.0)
    ap.add_argument("--bins", type=int, default=10)
    ap.add_argument("--out", default=None, help="optional profile CSV path")

    p = sub.add_parser("fixtures", parents=[common],
                       help="stage bundled fixtures into the workdir")
    p.add_argument("--case", choices=("all", "debate", "squall", "typhoon", "analysis"),
                   default="all")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = RunConfig(
            workdir=args.workdir,
            backend_uri=args.backend,
            mode=args.mode if args.command == "verify" else "auto",
            repair_budget=args.repair_budget,
            workers=args.workers,
            seed=args.seed,
        )
        if args.command == "debate":
            return cmd_debate(args.topic, config, rounds=args.rounds,
                              researcher_specs=args.researchers,
                              retrieval_uri=args.retrieval)
        if args.command == "verify":
            return cmd_verify(args.goal, config, inject=args.inject or ())
        if args.command == "sim":
            return cmd_sim(args.sim_command, config, args)
        if args.command == "analyze":
            return cmd_analyze(args.analyze_command, config, args)
        return cmd_fixtures(args.case, config)
    except VerificationFailed as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VERIFICATION
    except SubtaskFailed as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_SUBTASK
    except _PROTOCOL_ERRORS as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_PROTOCOL
    except (TianjiError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
