"""Failure classification rules and the repair-action table."""

import random

import pytest

from tianji import fixtures, recovery
from tianji.errors import NoRepairKnown
from tianji.minisim.gridio import inspect_header
from tianji.minisim.namelist import load_namelist, write_namelist
from tianji.tools import ToolContext


def test_classify_failure_rule_table():
    cases = [
        ("prefix mismatch: namelist names FNL but inputs are GRIBFILE.*", "PrefixMismatch"),
        ("expected prefix GFSFILE", "PrefixMismatch"),
        ("wrong prefix in namelist", "PrefixMismatch"),
        ("no variable table found next to the inputs", "MissingVariableTable"),
        ("Variable Table missing", "MissingVariableTable"),
        ("e_vert=30 but initial conditions carry 34 levels", "VerticalLevelMismatch"),
        ("vertical level count disagrees", "VerticalLevelMismatch"),
        ("shape mismatch: length 8 vs 10 on axis x", "TensorDimMismatch"),
        ("dim mismatch between operands", "TensorDimMismatch"),
        ("parallel overflow: requested 8 worker processes exceeds cap 4", "ParallelOverflow"),
        ("request exceeds cap", "ParallelOverflow"),
        ("disk quota exhausted", "Unknown"),
        ("", "Unknown"),
    ]
    for message, expected in cases:
        assert recovery.classify_failure({"message": message}) == expected, message
    assert recovery.classify_failure("wrong prefix") == "PrefixMismatch"
    assert recovery.classify_failure(None) == "Unknown"
    assert recovery.classify_failure({"tool": "sim_init"}) == "Unknown"


def test_failure_class_inventory():
    assert recovery.FAILURE_CLASSES[-1] == "Unknown"
    assert len(recovery.INJECTABLE_CLASSES) == 5
    assert "Unknown" not in recovery.INJECTABLE_CLASSES


def test_propose_prefix_repair(tmp_path):
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    for suffix in ("000", "001", "002"):
        (inputs / ("GRIBFILE.%s" % suffix)).write_bytes(b"x")
    action = recovery.propose_repair("PrefixMismatch", {"input_dir": inputs})
    assert action == recovery.EditNamelist("prefix", "GRIBFILE")
    assert action.to_json() == {"action": "EditNamelist", "key": "prefix", "value": "GRIBFILE"}
    (inputs / "GRIBFILE.000").unlink()
    (inputs / "GRIBFILE.001").unlink()
    (inputs / "GRIBFILE.002").unlink()
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("PrefixMismatch", {"input_dir": inputs})
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("PrefixMismatch", {})


def test_propose_vtable_repair(tmp_path):
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    vtable = inputs / "Vtable"
    vtable.write_text("000 SKINTEMP K\n")
    action = recovery.propose_repair("MissingVariableTable", {"input_dir": inputs})
    assert action == recovery.RelinkTable(str(vtable))
    # without one beside the inputs, fall back to a workdir-wide search
    vtable.unlink()
    stash = tmp_path / "stash"
    stash.mkdir()
    (stash / "Vtable").write_text("000 SKINTEMP K\n")
    action = recovery.propose_repair(
        "MissingVariableTable", {"input_dir": inputs, "workdir": tmp_path})
    assert action == recovery.RelinkTable(str(stash / "Vtable"))
    (stash / "Vtable").unlink()
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair(
            "MissingVariableTable", {"input_dir": inputs, "workdir": tmp_path})


def test_propose_level_repair(tmp_path):
    fixtures.prepare_workdir(tmp_path, "squall")
    write_namelist(fixtures.squall_namelist_values(), tmp_path / "namelist.input")
    from tianji.minisim.pipeline import preprocess
    preprocess(tmp_path / "namelist.input", tmp_path / "inputs", tmp_path / "ic.masd")
    action = recovery.propose_repair("VerticalLevelMismatch", {"ic": tmp_path / "ic.masd"})
    assert action == recovery.EditNamelist("e_vert", 34)
    assert action.value == inspect_header(tmp_path / "ic.masd")["levels"]
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("VerticalLevelMismatch", {"ic": tmp_path / "absent.masd"})
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("VerticalLevelMismatch", {})


def test_propose_tensor_and_parallel_repairs():
    rng = random.Random(11)
    for _ in range(20):
        a = rng.randrange(2, 200)
        b = rng.randrange(2, 200)
        axis = rng.choice(["x", "y", "time"])
        msg = "shape mismatch: length %d vs %d on axis %s" % (a, b, axis)
        action = recovery.propose_repair("TensorDimMismatch", {"message": msg})
        assert action == recovery.RealignTensor(axis, min(a, b))
    for _ in range(20):
        requested = rng.randrange(1, 64)
        msg = "parallel overflow: requested %d worker processes exceeds cap %d" % (
            requested, max(1, requested // 2))
        action = recovery.propose_repair("ParallelOverflow", {"message": msg})
        assert action == recovery.ReduceParallelism(max(1, requested // 2))
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("TensorDimMismatch", {"message": "dim mismatch"})
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("ParallelOverflow", {"message": "exceeds cap"})
    with pytest.raises(NoRepairKnown):
        recovery.propose_repair("Unknown", {"message": "disk on fire"})


def test_apply_edit_namelist_is_idempotent(tmp_path):
    nml = tmp_path / "namelist.input"
    write_namelist(dict(fixtures.squall_namelist_values(), prefix="FNL"), nml)
    ctx = ToolContext(tmp_path)
    action = recovery.EditNamelist("prefix", "GRIBFILE")
    recovery.apply_repair(action, ctx, {"namelist": nml})
    first = nml.read_bytes()
    assert load_namelist(nml).values["prefix"] == "GRIBFILE"
    recovery.apply_repair(action, ctx, {"namelist": nml})
    assert nml.read_bytes() == first


def test_apply_relink_table(tmp_path):
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    stash = tmp_path / "stash"
    stash.mkdir()
    src = stash / "Vtable"
    src.write_text("000 SKINTEMP K\n")
    ctx = ToolContext(tmp_path)
    recovery.apply_repair(recovery.RelinkTable(str(src)), ctx, {"input_dir": inputs})
    assert (inputs / "Vtable").read_text() == src.read_text()
    # relinking a table onto itself is a no-op rather than a copy error
    recovery.apply_repair(
        recovery.RelinkTable(str(inputs / "Vtable")), ctx, {"input_dir": inputs})
    assert (inputs / "Vtable").read_text() == src.read_text()


def test_apply_context_flag_repairs(tmp_path):
    ctx = ToolContext(tmp_path)
    assert ctx.realign is False
    recovery.apply_repair(recovery.RealignTensor("x", 8), ctx, {})
    assert ctx.realign is True
    recovery.apply_repair(recovery.ReduceParallelism(3), ctx, {})
    assert ctx.workers_requested == 3
    recovery.apply_repair(recovery.RerunStage("sim_init"), ctx, {})
    with pytest.raises(NoRepairKnown):
        recovery.apply_repair(object(), ctx, {})


def test_repair_context_collects_paths(tmp_path):
    ctx = ToolContext(tmp_path)
    out = recovery.repair_context(
        ctx, "sim_preprocess",
        {"namelist": "sim/namelist.input", "input_dir": "inputs", "out": "sim/ic.masd"},
        "wrong prefix")
    assert out["tool"] == "sim_preprocess"
    assert out["message"] == "wrong prefix"
    assert out["workdir"] == ctx.workdir
    assert out["namelist"] == tmp_path / "sim" / "namelist.input"
    assert out["input_dir"] == tmp_path / "inputs"
    assert "ic" not in out
    assert "out" not in out


def test_action_json_shapes():
    assert recovery.RealignTensor("y", 43).to_json() == {
        "action": "RealignTensor", "axis": "y", "length": 43}
    assert recovery.ReduceParallelism(4).to_json() == {
        "action": "ReduceParallelism", "workers": 4}
    assert recovery.RerunStage("sim_init").to_json() == {
        "action": "RerunStage", "stage": "sim_init"}
    assert recovery.RelinkTable("/tmp/Vtable").to_json() == {
        "action": "RelinkTable", "path": "/tmp/Vtable"}
