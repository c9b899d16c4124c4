"""Command-line interface: exit codes, artifact layout, repair plumbing."""

import hashlib
import json

import pytest

from tianji import fixtures
from tianji.backend import (
    FinalResponse,
    PlanRoadmap,
    RequestTool,
    ScenarioScript,
    dump_script,
)
from tianji.cli import main
from tianji.minisim.namelist import write_namelist


def run_cli(*argv):
    return main(list(argv))


def stage(workdir, case="all"):
    assert run_cli("fixtures", "--workdir", str(workdir), "--case", case) == 0
    return workdir


def test_fixtures_staging(tmp_path, capsys):
    stage(tmp_path, "all")
    out = capsys.readouterr().out
    assert "fixtures staged" in out
    assert (tmp_path / "scenarios" / "tc_debate.json").is_file()
    assert (tmp_path / "goals" / "squall_goal.txt").is_file()
    assert (tmp_path / "corpus").is_dir()
    assert (tmp_path / "inputs" / "typhoon_fields.masd").is_file()
    # raw simulator inputs stay out of the shared staging: the prefix scan
    # over inputs/ must stay unambiguous, so they are staged per case
    assert not (tmp_path / "inputs" / "GRIBFILE.000").exists()
    stage(tmp_path / "sq", "squall")
    assert (tmp_path / "sq" / "inputs" / "GRIBFILE.000").is_file()
    assert (tmp_path / "sq" / "inputs" / "Vtable").is_file()


def test_workdir_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("TIANJI_WORKDIR", str(tmp_path / "envwd"))
    assert run_cli("fixtures", "--case", "debate") == 0
    assert (tmp_path / "envwd" / "scenarios" / "tc_debate.json").is_file()


def test_debate_cli_outputs(tmp_path, capsys):
    stage(tmp_path)
    capsys.readouterr()
    code = run_cli(
        "debate", str(tmp_path / "goals" / "debate_topic.txt"),
        "--workdir", str(tmp_path),
        "--backend", "scripted:%s" % (tmp_path / "scenarios" / "tc_debate.json"))
    assert code == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert len(printed) == 4
    for line in printed:
        assert (tmp_path / line).is_file() or line.startswith(str(tmp_path))
    final = (tmp_path / "analysis" / "final_hypothesis.txt").read_text()
    assert "id: 17" in final
    assert "author: Bob" in final
    assert "flagged: no" in final
    lines = (tmp_path / "analysis" / "debate_scores.csv").read_text().splitlines()
    assert lines[0] == "agent,round,total" and len(lines) == 19
    transcript = (tmp_path / "logs" / "debate_transcript.ndjson").read_text().splitlines()
    assert json.loads(transcript[-1])["phase"] == "select"
    assert (tmp_path / "plots" / "debate_score_curve.svg").stat().st_size > 0


def test_verify_simple_pipeline(tmp_path, capsys):
    stage(tmp_path)
    code = run_cli(
        "verify", "--workdir", str(tmp_path),
        "--goal", str(tmp_path / "goals" / "simple_intensity.txt"),
        "--backend", "scripted:%s" % (tmp_path / "scenarios" / "simple_intensity.json"))
    assert code == 0
    assert "simple run complete" in capsys.readouterr().out
    assert (tmp_path / "report.md").is_file()
    assert (tmp_path / fixtures.SIMPLE_ARTIFACTS["intensity"]).is_file()
    assert (tmp_path / "plots" / "telemetry_cumulative.svg").is_file()
    assert (tmp_path / "plots" / "telemetry_per_agent.svg").is_file()
    calls = [json.loads(l) for l in
             (tmp_path / "logs" / "calls.ndjson").read_text().splitlines()]
    assert [c["seq"] for c in calls] == list(range(1, len(calls) + 1))
    assert calls[0]["tool"] == "enter_easy_task_mode"
    assert calls[-1]["tool"] == "generate_response"


def test_verify_complex_pipeline(tmp_path, capsys):
    stage(tmp_path)
    fixtures.prepare_workdir(tmp_path, "squall")
    code = run_cli(
        "verify", "--workdir", str(tmp_path),
        "--goal", str(tmp_path / "goals" / "squall_goal.txt"),
        "--backend", "scripted:%s" % (tmp_path / "scenarios" / "squall_complex.json"))
    assert code == 0
    assert "complex run complete: 5 subtasks done" in capsys.readouterr().out
    assert (tmp_path / "sim" / "squall_run.masd").is_file()
    assert (tmp_path / "plots" / "squall_rain.svg").is_file()
    report = (tmp_path / "report.md").read_text()
    assert "| 5 | trajectory_analyzer | Done |" in report
    events = [json.loads(l) for l in
              (tmp_path / "logs" / "events.ndjson").read_text().splitlines()]
    assert events[0]["event"] == "plan"
    assert sum(1 for e in events if e["event"] == "state_revision") == 5


def test_verify_injected_faults_heal_bit_for_bit(tmp_path):
    digests = {}
    for label, inject in (("clean", []),
                          ("faulty", ["PrefixMismatch", "MissingVariableTable",
                                      "VerticalLevelMismatch"])):
        wd = tmp_path / label
        stage(wd)
        fixtures.prepare_workdir(wd, "squall")
        argv = ["verify", "--workdir", str(wd),
                "--goal", str(wd / "goals" / "squall_goal.txt"),
                "--backend", "scripted:%s" % (wd / "scenarios" / "squall_complex.json")]
        for cls in inject:
            argv += ["--inject", cls]
        assert run_cli(*argv) == 0
        digests[label] = hashlib.sha256(
            (wd / "sim" / "squall_run.masd").read_bytes()).hexdigest()
    assert digests["clean"] == digests["faulty"]
    events = [json.loads(l) for l in
              (tmp_path / "faulty" / "logs" / "events.ndjson").read_text().splitlines()]
    repairs = [e for e in events if e["event"] == "repair"]
    assert len(repairs) == 3
    assert sorted(e["class"] for e in repairs) == [
        "MissingVariableTable", "PrefixMismatch", "VerticalLevelMismatch"]


def test_exit_codes_for_config_errors(tmp_path, capsys):
    goal = tmp_path / "goal.txt"
    goal.write_text("plot something\n")
    # no backend given
    assert run_cli("verify", "--workdir", str(tmp_path), "--goal", str(goal)) == 2
    # unknown backend scheme
    assert run_cli("verify", "--workdir", str(tmp_path), "--goal", str(goal),
                   "--backend", "smoke:signals") == 2
    # goal file missing
    assert run_cli("verify", "--workdir", str(tmp_path),
                   "--goal", str(tmp_path / "absent.txt"),
                   "--backend", "scripted:%s" % (tmp_path / "nothing.json")) == 2
    # argparse rejections: unknown subcommand, bad choice, bad int
    assert run_cli("conjure") == 2
    assert run_cli("verify", "--goal", str(goal), "--mode", "psychic") == 2
    assert run_cli("verify", "--goal", str(goal), "--workers", "many") == 2
    # flag validation beyond argparse
    assert run_cli("verify", "--workdir", str(tmp_path), "--goal", str(goal),
                   "--backend", "scripted:x", "--workers", "0") == 2
    assert run_cli("verify", "--workdir", str(tmp_path), "--goal", str(goal),
                   "--backend", "scripted:x", "--repair-budget", "-1") == 2
    capsys.readouterr()


def test_exit_3_for_scenario_goal_mismatch(tmp_path, capsys):
    stage(tmp_path)
    fixtures.prepare_workdir(tmp_path, "squall")
    # a complex goal against the simple-task script exhausts it immediately
    code = run_cli(
        "verify", "--workdir", str(tmp_path),
        "--goal", str(tmp_path / "goals" / "squall_goal.txt"),
        "--backend", "scripted:%s" % (tmp_path / "scenarios" / "simple_intensity.json"))
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_exit_4_for_exhausted_repair_budget(tmp_path, capsys):
    stage(tmp_path)
    fixtures.prepare_workdir(tmp_path, "squall")
    code = run_cli(
        "verify", "--workdir", str(tmp_path),
        "--goal", str(tmp_path / "goals" / "squall_goal.txt"),
        "--backend", "scripted:%s" % (tmp_path / "scenarios" / "squall_complex.json"),
        "--repair-budget", "0", "--inject", "PrefixMismatch")
    assert code == 4
    assert "repair budget" in capsys.readouterr().err


def test_exit_5_for_failed_state_revision(tmp_path, capsys):
    plan = [{"id": 1, "description": "claims an artifact it never writes",
             "worker_spec": "simple_task", "depends_on": [],
             "artifacts": ["sim/ghost.masd"]}]
    entries = {("TianJi", 0): PlanRoadmap(subtasks=plan)}
    for step in (0, 2):
        entries[("simple_task", step)] = RequestTool("list_directory", {})
        entries[("simple_task", step + 1)] = FinalResponse("nothing to see")
    scenario = tmp_path / "ghost.json"
    dump_script(ScenarioScript(name="ghost", seed=0, entries=entries), scenario)
    goal = tmp_path / "goal.txt"
    goal.write_text("find the ghost\n")
    code = run_cli("verify", "--workdir", str(tmp_path), "--goal", str(goal),
                   "--mode", "complex", "--backend", "scripted:%s" % scenario)
    assert code == 5
    assert "failed state revision twice" in capsys.readouterr().err


def test_sim_stage_cli_with_injection(tmp_path, capsys):
    clean = tmp_path / "clean"
    fixtures.prepare_workdir(clean, "squall")
    (clean / "sim").mkdir()
    write_namelist(fixtures.squall_namelist_values(), clean / "sim" / "namelist.input")
    for stage_args in (
        ("preprocess", "--namelist", "sim/namelist.input"),
        ("init", "--namelist", "sim/namelist.input"),
        ("run", "--namelist", "sim/namelist.input"),
    ):
        assert run_cli("sim", *stage_args, "--workdir", str(clean)) == 0
    assert (clean / "sim" / "run.masd").is_file()
    assert run_cli("sim", "perturb", "--workdir", str(clean),
                   "--src", "sim/ic.masd", "--var", "SKINTEMP",
                   "--op", "add", "--value", "2.0",
                   "--out", "sim/ic_warm.masd") == 0
    assert (clean / "sim" / "ic_warm.masd").is_file()
    capsys.readouterr()

    faulty = tmp_path / "faulty"
    fixtures.prepare_workdir(faulty, "squall")
    (faulty / "sim").mkdir()
    write_namelist(fixtures.squall_namelist_values(), faulty / "sim" / "namelist.input")
    assert run_cli("sim", "preprocess", "--namelist", "sim/namelist.input",
                   "--workdir", str(faulty), "--inject", "PrefixMismatch") == 0
    err = capsys.readouterr().err
    assert "fault PrefixMismatch repaired via EditNamelist" in err
    assert ((faulty / "sim" / "ic.masd").read_bytes()
            == (clean / "sim" / "ic.masd").read_bytes())

    # an overflow injection halves the requested workers and retries
    assert run_cli("sim", "run", "--namelist", "sim/namelist.input",
                   "--workdir", str(clean), "--workers", "4",
                   "--inject", "ParallelOverflow") == 0
    assert "fault ParallelOverflow repaired via ReduceParallelism" in capsys.readouterr().err


def test_analyze_cli_chain(tmp_path, capsys):
    stage(tmp_path)
    data = str(tmp_path / "inputs" / "typhoon_fields.masd")
    capsys.readouterr()

    assert run_cli("analyze", "locate", "--workdir", str(tmp_path),
                   "--data", data, "--var", "PSFC", "--mode", "min") == 0
    series = json.loads(capsys.readouterr().out)
    values = [p["value"] for p in series["points"]]
    assert min(values) == pytest.approx(922.769, abs=1e-9)

    assert run_cli("analyze", "locate", "--workdir", str(tmp_path),
                   "--data", data, "--var", "U10", "--time", "8",
                   "--mode", "max") == 0
    point = json.loads(capsys.readouterr().out)
    assert {"lat", "lon", "value"} <= set(point)

    assert run_cli("analyze", "area-stat", "--workdir", str(tmp_path),
                   "--data", data, "--var", "RAINC", "--time", "12",
                   "--stat", "mean") == 0
    stat = json.loads(capsys.readouterr().out)
    assert stat["stat"] == "mean" and stat["value"] > 0

    assert run_cli("analyze", "track", "--workdir", str(tmp_path),
                   "--data", data, "--var", "PSFC", "--out", "analysis/track.csv") == 0
    traj = json.loads(capsys.readouterr().out)
    assert len(traj["points"]) == 13
    assert (tmp_path / "analysis" / "track.csv").is_file()

    assert run_cli("analyze", "compare", "--workdir", str(tmp_path),
                   "--a", data, "--b", data, "--var", "PSFC") == 0
    cmp = json.loads(capsys.readouterr().out)
    assert cmp["extreme_dlat"] == 0.0

    assert run_cli("analyze", "divergence", "--workdir", str(tmp_path),
                   "--data", data, "--time", "8") == 0
    div = json.loads(capsys.readouterr().out)
    assert div["min"]["value"] == pytest.approx(fixtures.TY_DIV_MIN, abs=5e-5)

    assert run_cli("analyze", "profile", "--workdir", str(tmp_path),
                   "--data", data, "--var", "PSFC", "--time", "8",
                   "--lat", str(div["min"]["lat"]), "--lon", str(div["min"]["lon"]),
                   "--rmax-km", "400", "--bins", "8",
                   "--out", "analysis/profile.csv") == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows and all({"r_km", "mean"} == set(r) for r in rows)
    assert (tmp_path / "analysis" / "profile.csv").is_file()
