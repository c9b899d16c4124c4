"""Fixture library: staged files, engineered datasets, pinned reference values."""

import numpy as np
import pytest

from tianji import fixtures
from tianji.analysis import ingest_tensor, locate_feature, track_compare, track_feature, transform_tensor
from tianji.backend import ScriptedBackend, load_script
from tianji.minisim.gridio import read_dataset


def test_write_all_materializes_library(tmp_path):
    out = fixtures.write_all(tmp_path)
    corpus = [k for k in out if k.startswith("corpus/")]
    scenarios = [k for k in out if k.startswith("scenarios/")]
    goals = [k for k in out if k.startswith("goals/")]
    assert len(corpus) == 5
    assert len(scenarios) == 7
    assert len(goals) == 7
    for key in scenarios:
        script = load_script(out[key])
        assert script.entries, key
    names = sorted(p.split("/")[1] for p in scenarios)
    assert names == ["simple_divergence.json", "simple_intensity.json",
                     "simple_precip.json", "simple_track.json",
                     "squall_complex.json", "tc_debate.json",
                     "typhoon_complex.json"]
    topic = out["goals/debate_topic.txt"].read_text()
    assert topic.strip() == fixtures.DEBATE_TOPIC


def test_debate_scenario_step_counts():
    script = fixtures.debate_scenario()
    # proposal + 5 rebuttals + 5 revisions per researcher
    for name in fixtures.DEBATE_BASE_ORDER:
        assert script.steps_for(name) == 11
    assert script.steps_for("Host") == 18
    assert script.steps_for("Chief") == 1
    assert script.steps_for("nobody") == 0


def test_prepare_workdir_cases(tmp_path):
    fixtures.prepare_workdir(tmp_path / "a", "squall")
    assert (tmp_path / "a" / "inputs" / "GRIBFILE.000").is_file()
    assert (tmp_path / "a" / "inputs" / "Vtable").is_file()
    fixtures.prepare_workdir(tmp_path / "b", "typhoon")
    assert (tmp_path / "b" / "inputs" / "GFSFILE.000").is_file()
    fixtures.prepare_workdir(tmp_path / "c", "analysis")
    assert (tmp_path / "c" / fixtures.TY_DATASET_REL).is_file()
    with pytest.raises(ValueError):
        fixtures.prepare_workdir(tmp_path / "d", "monsoon")


def test_analysis_dataset_pins(analysis_dir):
    path = analysis_dir / fixtures.TY_DATASET_REL
    ds = read_dataset(path)
    assert ds.nx == fixtures.TY_GRID["nx"] and ds.ny == fixtures.TY_GRID["ny"]
    assert list(ds.times) == list(fixtures.TY_TIMES)

    slp = ingest_tensor(path, "PSFC")
    series = locate_feature(slp, "min")
    assert series.values == pytest.approx(fixtures.TY_MIN_SERIES, abs=1e-9)
    assert min(series.values) == pytest.approx(922.769, abs=1e-9)
    assert int(np.argmin(series.values)) == 8

    wind = ingest_tensor(path, ["U10", "V10"], time_sel=8)
    div = transform_tensor([wind["U10"], wind["V10"]], "divergence")
    core = locate_feature(div, "min")
    assert core.value == pytest.approx(fixtures.TY_DIV_MIN, abs=5e-5)

    rain = ingest_tensor(path, ["RAINC", "RAINNC"], time_sel=12)
    total = transform_tensor([rain["RAINC"], rain["RAINNC"]], "sum_pair")
    peak = locate_feature(total, "max")
    assert peak.value == pytest.approx(fixtures.TY_RAIN_PEAK, abs=1e-6)

    track = track_feature(path, "PSFC", "min")
    assert [(p.j, p.i) for p in track.points] == fixtures.ty_center_cells()
    assert [p.value for p in track.points] == pytest.approx(fixtures.TY_MIN_SERIES, abs=1e-9)


def test_track_pair_extreme_pin():
    a, b = fixtures.track_pair_fixture()
    cmp = track_compare(a, b)
    assert cmp.extreme_dlat == pytest.approx(fixtures.TRACK_EXTREME_DLAT, abs=1e-12)
    assert cmp.extreme_dlat < 0
    assert cmp.extreme_index == 8
    assert len(cmp.rows) == 13


def test_call_profile_squall_164():
    records = fixtures.call_profile_records("squall_164")
    assert len(records) == 164
    assert [r.seq for r in records] == list(range(1, 165))
    per_agent = {}
    for r in records:
        per_agent[r.agent] = per_agent.get(r.agent, 0) + 1
    assert per_agent == {"TianJi": 28, "wps_configurer": 15, "fnl_processor": 23,
                         "wrf_real_executor": 38, "wrf_main_simulator": 20,
                         "trajectory_analyzer": 40}
    assert all(r.kind == "ReasoningPlanning" for r in records if r.agent == "TianJi")
    walls = [r.wallclock for r in records]
    assert walls == sorted(walls)
    for r in records:
        if r.kind == "ToolExec":
            assert r.tool and r.category
        else:
            assert r.tool is None and r.category is None


def test_call_profile_typhoon_180():
    records = fixtures.call_profile_records("typhoon_180")
    assert len(records) == 180
    per_agent = {}
    for r in records:
        per_agent[r.agent] = per_agent.get(r.agent, 0) + 1
    assert per_agent == fixtures.CALL_PROFILES["typhoon_180"]
    assert per_agent["TianJi"] == 50
    with pytest.raises(KeyError):
        fixtures.call_profile_records("monsoon_99")


def test_simple_scenarios_have_matching_requests():
    assert set(fixtures.SIMPLE_KINDS) == {"intensity", "track", "precip", "divergence"}
    for kind in fixtures.SIMPLE_KINDS:
        script = fixtures.simple_scenario(kind)
        assert script.steps_for("assistant") >= 3
        assert kind in fixtures.SIMPLE_REQUESTS
        assert kind in fixtures.SIMPLE_ARTIFACTS
        assert fixtures.SIMPLE_ARTIFACTS[kind].endswith(".svg")


def test_scenarios_replay_against_engine(analysis_dir):
    # the simple intensity scenario runs as scripted against a live session
    from tianji.orchestrator import Session
    from tianji.backend import RequestTool
    script = fixtures.simple_scenario("intensity")
    scripted_tools = [out.tool for (_, step), out in sorted(script.entries.items())
                      if isinstance(out, RequestTool)]
    session = Session(ScriptedBackend(script), analysis_dir)
    report = session.run_simple(fixtures.SIMPLE_REQUESTS["intensity"])
    assert report["tool_sequence"] == (["enter_easy_task_mode"] + scripted_tools
                                       + ["generate_response"])
    assert (analysis_dir / fixtures.SIMPLE_ARTIFACTS["intensity"]).is_file()
