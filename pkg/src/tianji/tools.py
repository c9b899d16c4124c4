"""Tool registry and execution context for the verification engine.

Tools live on four buses: Basic, PhysicalSimulation, TensorAnalysis and
Visualization.  Workers address them by name through RequestTool outputs;
results are kept in a per-session store so later calls can reference earlier
ones with "$" strings ("$3" = result of call 3, "$slp" = result saved with
save_as="slp", "$slp.times" walks into the object).

The context also carries the one-shot fault-injection set used by the
self-healing tests: each injectable failure class fires at most once, at the
tool mapped to it, then clears itself.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis, viz
from .errors import ArgValidation, IoError, ShapeMismatch, UnknownTool
from .minisim import namelist as nml_mod
from .minisim import pipeline

CATEGORIES = ("Basic", "PhysicalSimulation", "TensorAnalysis", "Visualization")

# failure class -> the tool where a pending injection fires
INJECTION_POINTS = {
    "PrefixMismatch": "sim_preprocess",
    "MissingVariableTable": "sim_preprocess",
    "VerticalLevelMismatch": "sim_init",
    "ParallelOverflow": "run_simulation",
    "TensorDimMismatch": "transform_tensor",
}


@dataclass(frozen=True)
class ToolSpec:
    name: str
    category: str
    func: object
    required: tuple = ()
    optional: tuple = ()
    summary: str = ""


class ToolRegistry:
    def __init__(self):
        self._tools = {}

    def add(self, name, category, func, required=(), optional=(), summary=""):
        if category not in CATEGORIES:
            raise ArgValidation("unknown tool category %r" % category)
        if name in self._tools:
            raise ArgValidation("tool %r registered twice" % name)
        self._tools[name] = ToolSpec(name, category, func, tuple(required), tuple(optional), summary)

    def __contains__(self, name):
        return name in self._tools

    def names(self):
        return sorted(self._tools)

    def get(self, name) -> ToolSpec:
        try:
            return self._tools[name]
        except KeyError:
            raise UnknownTool("no tool named %r" % name) from None

    def category_of(self, name) -> str:
        return self.get(name).category

    def validate_args(self, name, args):
        spec = self.get(name)
        if not isinstance(args, dict):
            raise ArgValidation("%s: args must be a mapping" % name)
        missing = [k for k in spec.required if k not in args]
        if missing:
            raise ArgValidation("%s: missing args %s" % (name, ", ".join(missing)))
        allowed = set(spec.required) | set(spec.optional)
        extra = [k for k in args if k not in allowed]
        if extra:
            raise ArgValidation("%s: unexpected args %s" % (name, ", ".join(sorted(extra))))


class ToolContext:
    """Per-session execution state shared by all workers."""

    def __init__(self, workdir, pending_faults=(), worker_cap=None):
        self.workdir = Path(workdir).resolve()
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.results = {}
        self.call_index = 0
        self.artifacts = []
        self.pending_faults = set(pending_faults)
        self.worker_cap = worker_cap
        self.workers_requested = 1
        self.realign = False
        self._lock = threading.Lock()

    # -- result store -------------------------------------------------
    def store(self, result, save_as=None) -> int:
        with self._lock:
            self.call_index += 1
            idx = self.call_index
        self.results[str(idx)] = result
        if save_as:
            self.results[str(save_as)] = result
        if isinstance(result, dict) and "artifact" in result:
            if result["artifact"] not in self.artifacts:
                self.artifacts.append(result["artifact"])
        return idx

    def resolve(self, value):
        """Recursively replace "$..." strings with stored results."""
        if isinstance(value, str) and value.startswith("$") and len(value) > 1:
            head, *attrs = value[1:].split(".")
            if head not in self.results:
                raise ArgValidation("unknown result reference %r" % value)
            obj = self.results[head]
            for a in attrs:
                if isinstance(obj, dict):
                    if a not in obj:
                        raise ArgValidation("reference %r: no key %r" % (value, a))
                    obj = obj[a]
                elif isinstance(obj, (list, tuple)) and a.isdigit():
                    obj = obj[int(a)]
                else:
                    try:
                        obj = getattr(obj, a)
                    except AttributeError:
                        raise ArgValidation("reference %r: no attribute %r" % (value, a)) from None
            return obj
        if isinstance(value, dict):
            return {k: self.resolve(v) for k, v in value.items()}
        if isinstance(value, list):
            return [self.resolve(v) for v in value]
        return value

    # -- paths ---------------------------------------------------------
    def path(self, p, for_write=False) -> Path:
        q = Path(str(p))
        if not q.is_absolute():
            q = self.workdir / q
        q = q.resolve()
        if for_write:
            try:
                q.relative_to(self.workdir)
            except ValueError:
                raise ArgValidation("write path %s escapes the workdir" % q) from None
            q.parent.mkdir(parents=True, exist_ok=True)
        return q

    # -- fault injection -----------------------------------------------
    def consume_fault(self, tool_name):
        """Pop the pending failure class mapped to this tool, if any."""
        with self._lock:
            for cls in sorted(self.pending_faults):
                if INJECTION_POINTS.get(cls) == tool_name:
                    self.pending_faults.discard(cls)
                    return cls
        return None


# ---------------------------------------------------------------------------
# Basic bus
# ---------------------------------------------------------------------------

def _t_enter_easy_task_mode(ctx):
    return {"mode": "simple"}


def _t_list_directory(ctx, path="."):
    p = ctx.path(path)
    try:
        entries = sorted(e.name for e in p.iterdir())
    except OSError as e:
        raise IoError(str(e)) from None
    return {"entries": entries}


def _t_write_namelist(ctx, path, values):
    if not isinstance(values, dict):
        raise ArgValidation("write_namelist: values must be a mapping")
    out = ctx.path(path, for_write=True)
    resolved = nml_mod._apply_schemes({str(k).lower(): v for k, v in values.items()})
    nml_mod.Namelist(resolved).validate()
    nml_mod.write_namelist(resolved, out)
    return {"artifact": str(out)}


def _t_generate_response(ctx, text):
    return {"text": str(text)}


# ---------------------------------------------------------------------------
# PhysicalSimulation bus
# ---------------------------------------------------------------------------

def _t_sim_preprocess(ctx, namelist, input_dir, out):
    out_p = ctx.path(out, for_write=True)
    pipeline.preprocess(
        ctx.path(namelist), ctx.path(input_dir), out_p,
        inject=ctx.consume_fault("sim_preprocess"),
    )
    return {"artifact": str(out_p)}


def _t_sim_init(ctx, namelist, ic, out):
    out_p = ctx.path(out, for_write=True)
    pipeline.real_init(
        ctx.path(namelist), ctx.path(ic), out_p,
        inject=ctx.consume_fault("sim_init"),
    )
    return {"artifact": str(out_p)}


def _t_run_simulation(ctx, namelist, state, out, workers=None):
    out_p = ctx.path(out, for_write=True)
    pipeline.run_simulation(
        ctx.path(namelist), ctx.path(state), out_p,
        inject=ctx.consume_fault("run_simulation"),
        workers_requested=int(workers) if workers is not None else ctx.workers_requested,
        worker_cap=ctx.worker_cap,
    )
    return {"artifact": str(out_p)}


def _t_perturb_field(ctx, src, var, op, value, out):
    out_p = ctx.path(out, for_write=True)
    pipeline.perturb_field(ctx.path(src), var, op, float(value), out_p)
    return {"artifact": str(out_p)}


# ---------------------------------------------------------------------------
# TensorAnalysis bus
# ---------------------------------------------------------------------------

def _t_inspect_dataset(ctx, path):
    try:
        return analysis.inspect_dataset(ctx.path(path))
    except OSError as e:
        raise IoError(str(e)) from None


def _t_ingest_tensor(ctx, path, var, time=None, region=None):
    try:
        return analysis.ingest_tensor(ctx.path(path), var, time_sel=time, region=region)
    except OSError as e:
        raise IoError(str(e)) from None


def _tensor_list(inputs):
    if isinstance(inputs, analysis.Tensor):
        return [inputs]
    if isinstance(inputs, dict):
        return [inputs[k] for k in inputs]
    if isinstance(inputs, (list, tuple)):
        out = []
        for t in inputs:
            if not isinstance(t, analysis.Tensor):
                raise ArgValidation("transform_tensor: inputs must be tensors, got %r" % type(t).__name__)
            out.append(t)
        return out
    raise ArgValidation("transform_tensor: bad inputs %r" % type(inputs).__name__)


def _t_transform_tensor(ctx, inputs, op, c=None, realign=None):
    tensors = _tensor_list(inputs)
    if ctx.consume_fault("transform_tensor"):
        # fabricate a length disagreement on the leading axis of the first input
        t0 = tensors[0]
        axis_name, n = t0.dims[0]
        raise ShapeMismatch(
            "shape mismatch: length %d vs %d on axis %s" % (n, max(n - 1, 1), axis_name)
        )
    do_realign = ctx.realign if realign is None else bool(realign)
    return analysis.transform_tensor(tensors, op, c=c, realign=do_realign)


def _t_locate_feature(ctx, tensor, mode):
    if not isinstance(tensor, analysis.Tensor):
        raise ArgValidation("locate_feature: tensor argument must reference a tensor result")
    return analysis.locate_feature(tensor, mode)


def _t_track_feature(ctx, source, var=None, mode="min", search_radius_km=300.0, out=None):
    if isinstance(source, analysis.Tensor):
        traj = analysis.track_feature(source, mode=mode, search_radius_km=float(search_radius_km))
    else:
        try:
            traj = analysis.track_feature(
                ctx.path(source), var=var, mode=mode, search_radius_km=float(search_radius_km)
            )
        except OSError as e:
            raise IoError(str(e)) from None
    if out is None:
        return traj
    out_p = ctx.path(out, for_write=True)
    traj.write_csv(out_p)
    return {"trajectory": traj, "artifact": str(out_p)}


def _t_filter_by_geometry(ctx, tensor, shape):
    if not isinstance(tensor, analysis.Tensor):
        raise ArgValidation("filter_by_geometry: tensor argument must reference a tensor result")
    if not isinstance(shape, dict):
        raise ArgValidation("filter_by_geometry: shape must be a mapping")
    return analysis.filter_by_geometry(tensor, shape)


def _t_area_stat(ctx, tensor, stat, baseline=None):
    value = analysis.area_stat(tensor, stat)
    out = {"stat": stat, "value": value}
    if baseline is not None:
        out["deficit"] = analysis.deficit(tensor, baseline)
    return out


def _t_radial_profile(ctx, tensor, center, r_max_km, n_bins, out=None):
    if isinstance(center, analysis.FeaturePoint):
        ctr = center
    elif isinstance(center, (list, tuple)) and len(center) == 2:
        ctr = (float(center[0]), float(center[1]))
    else:
        raise ArgValidation("radial_profile: center must be a feature point or [lat, lon]")
    rows = analysis.radial_profile(tensor, ctr, float(r_max_km), int(n_bins))
    result = {"rows": [list(r) for r in rows]}
    if out is not None:
        out_p = ctx.path(out, for_write=True)
        analysis.write_profile_csv(rows, out_p)
        result["artifact"] = str(out_p)
    return result


def _t_track_compare(ctx, a, b):
    if not isinstance(a, analysis.Trajectory) or not isinstance(b, analysis.Trajectory):
        raise ArgValidation("track_compare: both arguments must reference trajectories")
    return analysis.track_compare(a, b)


# ---------------------------------------------------------------------------
# Visualization bus
# ---------------------------------------------------------------------------

def _t_plot_cartesian_chart(ctx, series, out, title="", xlabel="", ylabel="", markers=None):
    out_p = ctx.path(out, for_write=True)
    viz.plot_cartesian_chart(
        series, out_p, title=title, xlabel=xlabel, ylabel=ylabel, markers=markers
    )
    return {"artifact": str(out_p)}


def _t_plot_spatial_map(ctx, tensor, out, colormap="diverging-bluered", title="", overlays=None,
                        time=None):
    if not isinstance(tensor, analysis.Tensor):
        raise ArgValidation("plot_spatial_map: tensor argument must reference a tensor result")
    if time is not None:
        tensor = tensor.frame(int(time))
    out_p = ctx.path(out, for_write=True)
    viz.plot_spatial_map(tensor, out_p, colormap=colormap, title=title, overlays=overlays)
    return {"artifact": str(out_p)}


def default_registry() -> ToolRegistry:
    reg = ToolRegistry()
    reg.add("enter_easy_task_mode", "Basic", _t_enter_easy_task_mode,
            summary="marker recording that the session runs in simple mode")
    reg.add("list_directory", "Basic", _t_list_directory, optional=("path",),
            summary="list workdir entries")
    reg.add("write_namelist", "Basic", _t_write_namelist, required=("path", "values"),
            summary="write a canonical simulator namelist")
    reg.add("generate_response", "Basic", _t_generate_response, required=("text",),
            summary="terminal tool carrying the final textual answer")

    reg.add("sim_preprocess", "PhysicalSimulation", _t_sim_preprocess,
            required=("namelist", "input_dir", "out"),
            summary="decode prefix-named inputs through the variable table")
    reg.add("sim_init", "PhysicalSimulation", _t_sim_init,
            required=("namelist", "ic", "out"),
            summary="build the balanced t=0 model state")
    reg.add("run_simulation", "PhysicalSimulation", _t_run_simulation,
            required=("namelist", "state", "out"), optional=("workers",),
            summary="integrate the model forward, writing diagnostics")
    reg.add("perturb_field", "PhysicalSimulation", _t_perturb_field,
            required=("src", "var", "op", "value", "out"),
            summary="write a copy of a dataset with one variable modified")

    reg.add("inspect_dataset", "TensorAnalysis", _t_inspect_dataset, required=("path",),
            summary="dataset header metadata without loading arrays")
    reg.add("ingest_tensor", "TensorAnalysis", _t_ingest_tensor,
            required=("path", "var"), optional=("time", "region"),
            summary="load one or more variables as tensors")
    reg.add("transform_tensor", "TensorAnalysis", _t_transform_tensor,
            required=("inputs", "op"), optional=("c", "realign"),
            summary="pointwise and differential tensor transforms")
    reg.add("locate_feature", "TensorAnalysis", _t_locate_feature,
            required=("tensor", "mode"),
            summary="extremum cell with coordinates")
    reg.add("track_feature", "TensorAnalysis", _t_track_feature,
            required=("source",), optional=("var", "mode", "search_radius_km", "out"),
            summary="radius-limited extremum tracking through time")
    reg.add("filter_by_geometry", "TensorAnalysis", _t_filter_by_geometry,
            required=("tensor", "shape"),
            summary="mask cells outside a circle or box")
    reg.add("area_stat", "TensorAnalysis", _t_area_stat,
            required=("tensor", "stat"), optional=("baseline",),
            summary="mean/min/max over unmasked cells, optional deficit vs baseline")
    reg.add("radial_profile", "TensorAnalysis", _t_radial_profile,
            required=("tensor", "center", "r_max_km", "n_bins"), optional=("out",),
            summary="azimuthal-mean profile around a center")
    reg.add("track_compare", "TensorAnalysis", _t_track_compare,
            required=("a", "b"),
            summary="per-time offsets between two trajectories")

    reg.add("plot_cartesian_chart", "Visualization", _t_plot_cartesian_chart,
            required=("series", "out"), optional=("title", "xlabel", "ylabel", "markers"),
            summary="deterministic SVG line chart")
    reg.add("plot_spatial_map", "Visualization", _t_plot_spatial_map,
            required=("tensor", "out"), optional=("colormap", "title", "overlays", "time"),
            summary="deterministic SVG heatmap with overlays")
    return reg
