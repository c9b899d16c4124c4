"""Shared fixtures: staged workdirs, scenario files, and the pass/fail
line recorder used by the acceptance suite."""

import numpy as np
import pytest

from tianji import fixtures
from tianji.minisim.gridio import GridDataset


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record exactly one [PASS]/[FAIL] line for an acceptance criterion."""
    lines = request.config._acceptance_lines

    def record(name, ok, detail=""):
        tag = "PASS" if ok else "FAIL"
        line = "[%s] %s" % (tag, name)
        if detail:
            line += ": %s" % detail
        lines.append(line)
        print(line)
        assert ok, line

    return record


@pytest.fixture
def squall_dir(tmp_path):
    """Workdir with the squall-line raw inputs staged under inputs/."""
    fixtures.prepare_workdir(tmp_path, "squall")
    return tmp_path


@pytest.fixture
def typhoon_dir(tmp_path):
    fixtures.prepare_workdir(tmp_path, "typhoon")
    return tmp_path


@pytest.fixture
def analysis_dir(tmp_path):
    """Workdir holding the engineered typhoon analysis dataset."""
    fixtures.prepare_workdir(tmp_path, "analysis")
    return tmp_path


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory):
    """Corpus, scenario scripts, and goal texts written once, read-only."""
    root = tmp_path_factory.mktemp("fixture-root")
    fixtures.write_all(root)
    return root


def random_dataset(rng):
    """A small random-but-valid gridded dataset built from an rng."""
    nx = rng.randint(4, 12)
    ny = rng.randint(4, 12)
    n_times = rng.randint(1, 4)
    names = rng.sample(["PSFC", "U10", "V10", "T2", "RAINC", "H"], rng.randint(1, 3))
    times = []
    t = rng.uniform(0.0, 100.0)
    for _ in range(n_times):
        times.append(t)
        t += rng.uniform(0.5, 3600.0)
    arr_rng = np.random.default_rng(rng.randint(0, 2 ** 31))
    data = {name: arr_rng.normal(size=(n_times, ny, nx)) * 100.0 for name in names}
    return GridDataset(
        nx=nx, ny=ny,
        ref_lat=round(rng.uniform(-40.0, 40.0), 3),
        ref_lon=round(rng.uniform(60.0, 160.0), 3),
        d_deg=rng.choice([0.1, 0.25, 0.5, 1.0]),
        levels=rng.randint(0, 40),
        variables=[(name, "unit-%d" % k) for k, name in enumerate(names)],
        times=times,
        data=data,
        comment=rng.choice(["", "case notes", "umlaut ü and degree °"]),
    )
