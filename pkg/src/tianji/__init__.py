"""Desk-scale autonomous meteorology workbench.

Two cooperating halves: a debate engine that turns a topic into a scored,
selected hypothesis, and a verification engine whose planner decomposes a
goal into subtasks that configure, run, perturb, repair, and analyze a
deterministic toy atmospheric simulator.  Everything an agent does flows
through structured outputs and an auditable call ledger, and every artifact
is reproducible byte for byte.
"""

from .backend import (
    AgentIdentity,
    BackendSession,
    Role,
    ScenarioScript,
    ScriptedBackend,
    dump_script,
    load_backend,
    load_script,
)
from .debate import DebateConfig, DebateOutcome, run_debate, speaking_order
from .orchestrator import Session, select_mode, telemetry_summary, worker_names
from .recovery import classify_failure, propose_repair
from .analysis import (
    Tensor,
    Trajectory,
    area_stat,
    divergence,
    filter_by_geometry,
    ingest_tensor,
    locate_feature,
    radial_profile,
    track_compare,
    track_feature,
    transform_tensor,
)
from .tools import ToolContext, default_registry
from .errors import TianjiError

__version__ = "0.1.0"

__all__ = [
    "AgentIdentity",
    "BackendSession",
    "Role",
    "ScenarioScript",
    "ScriptedBackend",
    "dump_script",
    "load_backend",
    "load_script",
    "DebateConfig",
    "DebateOutcome",
    "run_debate",
    "speaking_order",
    "Session",
    "select_mode",
    "telemetry_summary",
    "worker_names",
    "classify_failure",
    "propose_repair",
    "Tensor",
    "Trajectory",
    "area_stat",
    "divergence",
    "filter_by_geometry",
    "ingest_tensor",
    "locate_feature",
    "radial_profile",
    "track_compare",
    "track_feature",
    "transform_tensor",
    "ToolContext",
    "default_registry",
    "TianjiError",
    "__version__",
]
