"""Failure classification and automatic repair.

Classification is a pure rule table over the error message; each classifiable
failure maps to exactly one repair-action template.  Applying an action edits
workdir state (or execution-context flags) so that replaying the failed
subtask's tool calls succeeds, and repairs are idempotent: applying the same
namelist edit twice leaves the file bytes unchanged.
"""

from __future__ import annotations

import re
import shutil
from dataclasses import dataclass
from pathlib import Path

from .errors import NoRepairKnown
from .minisim.gridio import inspect_header
from .minisim.namelist import edit_namelist_key
from .minisim.pipeline import scan_input_prefix

FAILURE_CLASSES = (
    "PrefixMismatch",
    "MissingVariableTable",
    "VerticalLevelMismatch",
    "TensorDimMismatch",
    "ParallelOverflow",
    "Unknown",
)

INJECTABLE_CLASSES = FAILURE_CLASSES[:-1]

_RULES = (
    ("PrefixMismatch", re.compile(r"prefix mismatch|expected prefix|wrong prefix", re.I)),
    ("MissingVariableTable", re.compile(r"variable table", re.I)),
    ("VerticalLevelMismatch", re.compile(r"e_vert|vertical level", re.I)),
    ("TensorDimMismatch", re.compile(r"shape mismatch|length \d+ vs \d+ on axis|dim mismatch", re.I)),
    ("ParallelOverflow", re.compile(r"parallel overflow|exceeds cap|worker processes", re.I)),
)


def classify_failure(payload) -> str:
    """Map an error payload {tool, message, context} to a FailureClass name."""
    message = payload.get("message", "") if isinstance(payload, dict) else str(payload)
    for name, pattern in _RULES:
        if pattern.search(message):
            return name
    return "Unknown"


# ---------------------------------------------------------------------------
# Repair actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EditNamelist:
    key: str
    value: object

    def to_json(self):
        return {"action": "EditNamelist", "key": self.key, "value": self.value}


@dataclass(frozen=True)
class RelinkTable:
    path: str

    def to_json(self):
        return {"action": "RelinkTable", "path": self.path}


@dataclass(frozen=True)
class RealignTensor:
    axis: str
    length: int

    def to_json(self):
        return {"action": "RealignTensor", "axis": self.axis, "length": self.length}


@dataclass(frozen=True)
class ReduceParallelism:
    workers: int

    def to_json(self):
        return {"action": "ReduceParallelism", "workers": self.workers}


@dataclass(frozen=True)
class RerunStage:
    stage: str

    def to_json(self):
        return {"action": "RerunStage", "stage": self.stage}


_DIM_RE = re.compile(r"length (\d+) vs (\d+) on axis (\w+)")
_PAR_RE = re.compile(r"requested (\d+) .*cap (\d+)")


def propose_repair(failure_class: str, context: dict):
    """One deterministic action per failure class.

    ``context`` carries the failing tool's relevant paths: namelist, input_dir
    and ic where applicable, plus the raw error message.
    """
    msg = str(context.get("message", ""))
    if failure_class == "PrefixMismatch":
        input_dir = context.get("input_dir")
        stem = scan_input_prefix(input_dir) if input_dir else None
        if not stem:
            raise NoRepairKnown("no suffixed input files found to derive a prefix from")
        return EditNamelist("prefix", stem)
    if failure_class == "MissingVariableTable":
        input_dir = context.get("input_dir")
        candidates = []
        if input_dir and (Path(input_dir) / "Vtable").is_file():
            candidates.append(Path(input_dir) / "Vtable")
        workdir = context.get("workdir")
        if not candidates and workdir:
            candidates = sorted(Path(workdir).rglob("Vtable"))
        if not candidates:
            raise NoRepairKnown("no variable table discoverable under the workdir")
        return RelinkTable(str(candidates[0]))
    if failure_class == "VerticalLevelMismatch":
        ic = context.get("ic")
        if not ic or not Path(ic).is_file():
            raise NoRepairKnown("initial-condition file unavailable for level count")
        return EditNamelist("e_vert", inspect_header(ic)["levels"])
    if failure_class == "TensorDimMismatch":
        m = _DIM_RE.search(msg)
        if not m:
            raise NoRepairKnown("tensor mismatch message carries no axis lengths")
        a, b, axis = int(m.group(1)), int(m.group(2)), m.group(3)
        return RealignTensor(axis, min(a, b))
    if failure_class == "ParallelOverflow":
        m = _PAR_RE.search(msg)
        if not m:
            raise NoRepairKnown("overflow message carries no worker counts")
        requested = int(m.group(1))
        return ReduceParallelism(max(1, requested // 2))
    raise NoRepairKnown("no repair template for class %s" % failure_class)


def apply_repair(action, ctx, context: dict) -> None:
    """Mutate workdir files or context flags so the replayed calls succeed."""
    if isinstance(action, EditNamelist):
        edit_namelist_key(context["namelist"], action.key, action.value)
    elif isinstance(action, RelinkTable):
        src = Path(action.path)
        dst = Path(context["input_dir"]) / "Vtable"
        if src.resolve() != dst.resolve():
            shutil.copyfile(src, dst)
    elif isinstance(action, RealignTensor):
        ctx.realign = True
    elif isinstance(action, ReduceParallelism):
        ctx.workers_requested = action.workers
    elif isinstance(action, RerunStage):
        pass
    else:
        raise NoRepairKnown("unrecognized repair action %r" % (action,))


def repair_context(ctx, tool: str, resolved_args: dict, message: str) -> dict:
    """Collect the paths a repair proposal may need from a failed tool call."""
    out = {"workdir": ctx.workdir, "tool": tool, "message": message}
    for key in ("namelist", "input_dir", "ic"):
        val = resolved_args.get(key)
        if isinstance(val, (str, Path)):
            out[key] = ctx.path(val)
    return out
