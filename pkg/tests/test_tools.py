"""Tool registry, execution context, reference resolution, fault plumbing."""

import numpy as np
import pytest

from tianji import fixtures
from tianji.analysis import Tensor, Trajectory
from tianji.errors import ArgValidation, ShapeMismatch, UnknownTool
from tianji.minisim.namelist import load_namelist
from tianji.tools import CATEGORIES, INJECTION_POINTS, ToolContext, default_registry


@pytest.fixture
def reg():
    return default_registry()


@pytest.fixture
def ctx(tmp_path):
    return ToolContext(tmp_path)


def call(reg, ctx, name, **args):
    spec = reg.get(name)
    reg.validate_args(name, args)
    return spec.func(ctx, **ctx.resolve(args))


def test_registry_inventory(reg):
    assert len(reg.names()) == 19
    assert reg.names() == sorted(reg.names())
    assert set(CATEGORIES) == {"Basic", "PhysicalSimulation", "TensorAnalysis", "Visualization"}
    for name in reg.names():
        assert reg.category_of(name) in CATEGORIES
    assert reg.category_of("write_namelist") == "Basic"
    assert reg.category_of("run_simulation") == "PhysicalSimulation"
    assert reg.category_of("track_compare") == "TensorAnalysis"
    assert reg.category_of("plot_spatial_map") == "Visualization"
    with pytest.raises(UnknownTool):
        reg.get("summon_weather")
    with pytest.raises(ArgValidation):
        reg.add("write_namelist", "Basic", lambda ctx: None)
    with pytest.raises(ArgValidation):
        reg.add("new_tool", "Mystic", lambda ctx: None)


def test_validate_args(reg):
    with pytest.raises(ArgValidation) as err:
        reg.validate_args("sim_init", {"namelist": "n", "out": "o"})
    assert "missing args ic" in str(err.value)
    with pytest.raises(ArgValidation) as err:
        reg.validate_args("sim_init", {"namelist": "n", "ic": "i", "out": "o", "zoom": 2})
    assert "unexpected args zoom" in str(err.value)
    with pytest.raises(ArgValidation):
        reg.validate_args("sim_init", "not a dict")
    reg.validate_args("list_directory", {})  # path is optional


def test_store_and_reference_resolution(ctx):
    ctx.store({"value": 7, "nested": {"deep": [10, 20]}}, save_as="first")
    assert ctx.resolve("$first.value") == 7
    assert ctx.resolve("$1.value") == 7
    assert ctx.resolve("$first.nested.deep.1") == 20
    assert ctx.resolve({"k": ["$first.value", 3]}) == {"k": [7, 3]}
    assert ctx.resolve("plain string") == "plain string"
    assert ctx.resolve(42) == 42
    with pytest.raises(ArgValidation):
        ctx.resolve("$nope")
    with pytest.raises(ArgValidation):
        ctx.resolve("$first.absent")
    traj = Trajectory([], mode="min")
    ctx.store({"trajectory": traj}, save_as="tr")
    assert ctx.resolve("$tr.trajectory.mode") == "min"
    with pytest.raises(ArgValidation):
        ctx.resolve("$tr.trajectory.flavor")


def test_artifact_collection(ctx):
    ctx.store({"artifact": "plots/a.svg"})
    ctx.store({"artifact": "plots/a.svg"})  # repeats are kept once
    ctx.store({"artifact": "plots/b.svg"})
    ctx.store({"no_artifact": 1})
    assert ctx.artifacts == ["plots/a.svg", "plots/b.svg"]


def test_path_write_escape_guard(ctx):
    inside = ctx.path("sim/out.masd", for_write=True)
    assert str(inside).startswith(str(ctx.workdir))
    assert inside.parent.is_dir()
    with pytest.raises(ArgValidation):
        ctx.path("../outside.masd", for_write=True)
    # reads may wander (the registry only writes inside the workdir)
    assert ctx.path("../elsewhere").name == "elsewhere"


def test_consume_fault_is_one_shot(tmp_path):
    ctx = ToolContext(tmp_path, pending_faults=("PrefixMismatch", "ParallelOverflow"))
    assert ctx.consume_fault("sim_init") is None
    assert ctx.consume_fault("sim_preprocess") == "PrefixMismatch"
    assert ctx.consume_fault("sim_preprocess") is None
    assert ctx.consume_fault("run_simulation") == "ParallelOverflow"
    assert ctx.consume_fault("run_simulation") is None
    assert set(INJECTION_POINTS) == {
        "PrefixMismatch", "MissingVariableTable", "VerticalLevelMismatch",
        "ParallelOverflow", "TensorDimMismatch",
    }


def test_write_namelist_tool_validates(reg, ctx):
    out = call(reg, ctx, "write_namelist",
               path="sim/namelist.input", values=fixtures.squall_namelist_values())
    p = ctx.path(out["artifact"])
    assert p.is_file()
    assert load_namelist(p).values["prefix"] == "GRIBFILE"
    bad = dict(fixtures.squall_namelist_values(), mp_scheme="vapourware")
    with pytest.raises(Exception):
        call(reg, ctx, "write_namelist", path="sim/bad.input", values=bad)


def test_list_directory(reg, ctx):
    (ctx.workdir / "inputs").mkdir()
    (ctx.workdir / "inputs" / "GRIBFILE.000").write_bytes(b"x")
    out = call(reg, ctx, "list_directory", path="inputs")
    assert out["entries"] == ["GRIBFILE.000"]


def test_sim_tools_end_to_end(reg, squall_dir):
    ctx = ToolContext(squall_dir)
    call(reg, ctx, "write_namelist", path="sim/namelist.input",
         values=fixtures.squall_namelist_values())
    pre = call(reg, ctx, "sim_preprocess", namelist="sim/namelist.input",
               input_dir="inputs", out="sim/ic.masd")
    assert pre["artifact"].endswith("ic.masd")
    call(reg, ctx, "sim_init", namelist="sim/namelist.input", ic="sim/ic.masd",
         out="sim/state0.masd")
    run = call(reg, ctx, "run_simulation", namelist="sim/namelist.input",
               state="sim/state0.masd", out="sim/run.masd")
    assert run["artifact"].endswith("run.masd")
    info = call(reg, ctx, "inspect_dataset", path="sim/run.masd")
    assert info["dims"]["time"] == 11
    warm = call(reg, ctx, "perturb_field", src="sim/ic.masd", var="SKINTEMP",
                op="add", value=2.0, out="sim/ic_warm.masd")
    assert warm["artifact"].endswith("ic_warm.masd")


def test_analysis_tool_chain(reg, analysis_dir):
    ctx = ToolContext(analysis_dir)
    ctx.store(call(reg, ctx, "ingest_tensor", path=fixtures.TY_DATASET_REL,
                   var="PSFC"), save_as="slp")
    curve = call(reg, ctx, "locate_feature", tensor="$slp", mode="min")
    ctx.store(curve, save_as="curve")
    assert min(curve.values) == fixtures.TY_MIN_SERIES[8]
    wind = call(reg, ctx, "ingest_tensor", path=fixtures.TY_DATASET_REL,
                var=["U10", "V10"], time=8)
    ctx.store(wind, save_as="wind")
    div = call(reg, ctx, "transform_tensor", inputs=["$wind.U10", "$wind.V10"],
               op="divergence")
    ctx.store(div, save_as="div")
    core = call(reg, ctx, "locate_feature", tensor="$div", mode="min")
    assert core.value == pytest.approx(fixtures.TY_DIV_MIN, abs=1e-12)
    ctx.store(core, save_as="core")
    zone = call(reg, ctx, "filter_by_geometry", tensor="$div",
                shape={"circle": {"lat": "$core.lat", "lon": "$core.lon",
                                  "radius_km": 300.0}})
    ctx.store(zone, save_as="zone")
    stat = call(reg, ctx, "area_stat", tensor="$zone", stat="mean", baseline="$div")
    assert stat["deficit"] == stat["value"] - call(reg, ctx, "area_stat",
                                                   tensor="$div", stat="mean")["value"]
    prof = call(reg, ctx, "radial_profile", tensor="$zone", center="$core",
                r_max_km=400.0, n_bins=8, out="analysis/profile.csv")
    assert (ctx.workdir / "analysis" / "profile.csv").is_file()
    assert len(prof["rows"]) >= 1


def test_track_tools_and_outputs(reg, analysis_dir):
    ctx = ToolContext(analysis_dir)
    bare = call(reg, ctx, "track_feature", source=fixtures.TY_DATASET_REL,
                var="PSFC", mode="min")
    assert isinstance(bare, Trajectory)
    with_out = call(reg, ctx, "track_feature", source=fixtures.TY_DATASET_REL,
                    var="PSFC", mode="min", out="analysis/track.csv")
    assert set(with_out) == {"trajectory", "artifact"}
    assert (ctx.workdir / "analysis" / "track.csv").is_file()
    ctx.store(with_out, save_as="ta")
    ctx.store(with_out, save_as="tb")
    cmp = call(reg, ctx, "track_compare", a="$ta.trajectory", b="$tb.trajectory")
    assert cmp.extreme_dlat == 0.0
    with pytest.raises(ArgValidation):
        call(reg, ctx, "track_compare", a="$ta.trajectory", b="not a trajectory")
    with pytest.raises(ArgValidation):
        call(reg, ctx, "locate_feature", tensor="raw string", mode="min")


def test_transform_fault_fabrication(reg, analysis_dir):
    ctx = ToolContext(analysis_dir, pending_faults=("TensorDimMismatch",))
    ctx.store(call(reg, ctx, "ingest_tensor", path=fixtures.TY_DATASET_REL,
                   var=["RAINC", "RAINNC"], time=12), save_as="rain")
    with pytest.raises(ShapeMismatch) as err:
        call(reg, ctx, "transform_tensor", inputs=["$rain.RAINC", "$rain.RAINNC"],
             op="sum_pair")
    assert "length 44 vs 43 on axis y" in str(err.value)
    # the fault is consumed; after the realign flag is set the retry succeeds
    ctx.realign = True
    total = call(reg, ctx, "transform_tensor", inputs=["$rain.RAINC", "$rain.RAINNC"],
                 op="sum_pair")
    assert total.values.max() == pytest.approx(fixtures.TY_RAIN_PEAK, abs=1e-9)


def test_plot_tools_write_artifacts(reg, analysis_dir):
    ctx = ToolContext(analysis_dir)
    ctx.store(call(reg, ctx, "ingest_tensor", path=fixtures.TY_DATASET_REL,
                   var="PSFC"), save_as="slp")
    m = call(reg, ctx, "plot_spatial_map", tensor="$slp", time=12,
             out="plots/final.svg", title="final analysis")
    assert (ctx.workdir / "plots" / "final.svg").is_file()
    assert m["artifact"].endswith("final.svg")
    track = call(reg, ctx, "locate_feature", tensor="$slp", mode="min")
    ctx.store(track, save_as="curve")
    c = call(reg, ctx, "plot_cartesian_chart",
             series=[{"label": "min PSFC", "x": "$curve.times", "y": "$curve.values"}],
             out="plots/curve.svg")
    assert (ctx.workdir / "plots" / "curve.svg").is_file()
    assert c["artifact"].endswith("curve.svg")
