"""Numerical core: derivative stencils, the step update, and its invariants."""

import numpy as np
import pytest

from tianji import fixtures
from tianji.errors import CflViolation, NonFinite
from tianji.minisim.core import (
    GridState,
    ddx,
    ddy,
    diagnose_psfc,
    diagnostics,
    run_steps,
    step,
)
from tianji.minisim.namelist import load_namelist, write_namelist


def make_namelist(tmp_path, values):
    p = tmp_path / "namelist.input"
    write_namelist(values, p)
    return load_namelist(p)


def make_state(nml, seed=0):
    """A smooth, bounded random state on the namelist grid."""
    ny, nx = nml.ny, nml.nx
    rng = np.random.default_rng(seed)
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ph = rng.uniform(0.0, 2.0 * np.pi, size=6)
    h = nml.h_amb + 8.0 * np.sin(2 * np.pi * ii / nx + ph[0]) * np.cos(2 * np.pi * jj / ny + ph[1])
    u = 3.0 * np.sin(2 * np.pi * jj / ny + ph[2])
    v = 3.0 * np.cos(2 * np.pi * ii / nx + ph[3])
    qv = np.full((ny, nx), nml.get("qv0", 0.0)) + 0.002 * np.cos(2 * np.pi * ii / nx + ph[4])
    tsk = 296.0 + 2.0 * np.sin(2 * np.pi * jj / ny + ph[5])
    smois = np.full((ny, nx), 0.2)
    zero = np.zeros((ny, nx))
    return GridState(0.0, h, u, v, qv, tsk, smois, zero.copy(), zero.copy())


def test_ddx_ddy_match_loop_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        ny, nx = rng.integers(4, 12), rng.integers(4, 12)
        a = rng.normal(size=(ny, nx))
        dx = float(rng.uniform(1e3, 1e5))
        gx = ddx(a, dx)
        gy = ddy(a, dx)
        for j in range(ny):
            for i in range(nx):
                want_x = (a[j, (i + 1) % nx] - a[j, (i - 1) % nx]) / (2.0 * dx)
                want_y = (a[(j + 1) % ny, i] - a[(j - 1) % ny, i]) / (2.0 * dx)
                assert gx[j, i] == want_x
                assert gy[j, i] == want_y


def test_ddx_second_order_accurate():
    # halving the spacing must cut the sin-wave error by about four
    errs = []
    for n in (32, 64):
        x = np.arange(n) * (2 * np.pi / n)
        a = np.sin(x)[np.newaxis, :].repeat(4, axis=0)
        g = ddx(a, 2 * np.pi / n)
        errs.append(np.max(np.abs(g - np.cos(x)[np.newaxis, :])))
    assert errs[1] < errs[0] / 3.5


def test_step_matches_cell_by_cell_oracle(tmp_path):
    values = fixtures.squall_namelist_values()
    values.update(nx=9, ny=7)
    nml = make_namelist(tmp_path, values)
    state = make_state(nml, seed=11)
    new = step(state, nml)

    dt, dx = float(nml.dt), nml.dx_m
    g, f = float(nml.g), float(nml.f_coriolis)
    ny, nx = nml.ny, nml.nx
    h, u, v = state.h, state.u, state.v
    for j in range(ny):
        for i in range(nx):
            ip, im = (i + 1) % nx, (i - 1) % nx
            jp, jm = (j + 1) % ny, (j - 1) % ny
            div = (u[j, ip] - u[j, im]) / (2.0 * dx) + (v[jp, i] - v[jm, i]) / (2.0 * dx)
            dhdx = (h[j, ip] - h[j, im]) / (2.0 * dx)
            dhdy = (h[jp, i] - h[jm, i]) / (2.0 * dx)
            E = nml.c_evap * state.smois[j, i] * max(state.tsk[j, i] - nml.tsk_ref, 0.0)
            P = max(state.qv[j, i] - nml.q_crit, 0.0) / nml.tau_precip
            assert new.h[j, i] == h[j, i] + dt * (
                -nml.h_amb * div - nml.alpha_heat * (state.tsk[j, i] - nml.tsk_ref)
            )
            assert new.u[j, i] == u[j, i] + dt * (f * v[j, i] - g * dhdx - nml.kappa_drag * u[j, i])
            assert new.v[j, i] == v[j, i] + dt * (-f * u[j, i] - g * dhdy - nml.kappa_drag * v[j, i])
            assert new.qv[j, i] == state.qv[j, i] + dt * (E - P)
            assert new.rainc[j, i] == dt * P * nml.conv_frac * 1000.0
            assert new.rainnc[j, i] == dt * P * (1.0 - nml.conv_frac) * 1000.0
    assert new.time == dt


def test_step_does_not_mutate_input(tmp_path):
    nml = make_namelist(tmp_path, fixtures.squall_namelist_values())
    state = make_state(nml, seed=2)
    before = state.copy()
    step(state, nml)
    for name in ("h", "u", "v", "qv", "tsk", "smois", "rainc", "rainnc"):
        assert np.array_equal(getattr(state, name), getattr(before, name))


def test_mass_conservation_without_heating(tmp_path):
    nml = make_namelist(tmp_path, fixtures.conservation_namelist_values())
    assert nml.alpha_heat == 0.0
    state = make_state(nml, seed=4)
    total0 = float(np.sum(state.h))
    for k, st in enumerate(run_steps(state, nml, 200), start=1):
        if k % 50 == 0:
            drift = abs(float(np.sum(st.h)) - total0) / total0
            assert drift <= 1e-12, "drift %.3e at step %d" % (drift, k)


def test_heating_term_changes_mass(tmp_path):
    values = fixtures.conservation_namelist_values()
    values["alpha_heat"] = 2.0e-5
    nml = make_namelist(tmp_path, values)
    state = make_state(nml, seed=4)
    state.tsk = np.full((nml.ny, nml.nx), 298.0)  # uniformly warmer than tsk_ref
    total0 = float(np.sum(state.h))
    for st in run_steps(state, nml, 10):
        pass
    assert float(np.sum(st.h)) < total0


def test_cfl_guard_raises(tmp_path):
    values = fixtures.squall_namelist_values()
    nml = make_namelist(tmp_path, values)
    nml.values["dt"] = 1000.0
    with pytest.raises(CflViolation):
        step(make_state(nml), nml)


def test_non_finite_fields_detected(tmp_path):
    nml = make_namelist(tmp_path, fixtures.squall_namelist_values())
    state = make_state(nml)
    state.u[3, 3] = np.nan
    with pytest.raises(NonFinite):
        step(state, nml)


def test_rain_accumulators_split_by_conv_frac(tmp_path):
    nml = make_namelist(tmp_path, fixtures.squall_namelist_values())
    state = make_state(nml, seed=9)
    state.qv = np.full((nml.ny, nml.nx), nml.q_crit + 0.004)  # active precip
    for st in run_steps(state, nml, 8):
        pass
    assert np.all(st.rainc >= 0.0) and np.all(st.rainnc >= 0.0)
    assert st.rainc.max() > 0.0
    cf = nml.conv_frac
    assert np.allclose(st.rainc * (1.0 - cf), st.rainnc * cf, rtol=1e-12, atol=0.0)


def test_sst_relaxation_mode(tmp_path):
    values = fixtures.squall_namelist_values()
    values["sst_update"] = 1
    nml = make_namelist(tmp_path, values)
    state = make_state(nml, seed=5)
    new = step(state, nml)
    assert np.array_equal(new.tsk, state.tsk + (nml.tsk_ref - state.tsk) / 10.0)
    # and with the flag off the field is frozen
    values["sst_update"] = 0
    nml0 = make_namelist(tmp_path, values)
    assert np.array_equal(step(state, nml0).tsk, state.tsk)


def test_diagnostics_contract(tmp_path):
    nml = make_namelist(tmp_path, fixtures.squall_namelist_values())
    state = make_state(nml, seed=6)
    out = diagnostics(state, nml)
    assert sorted(out) == sorted(
        ["PSFC", "U10", "V10", "T2", "RAINC", "RAINNC", "SKINTEMP", "SMOIS"]
    )
    assert np.array_equal(out["PSFC"], 101325.0 + 100.0 * (state.h - nml.h_amb))
    assert np.array_equal(out["PSFC"], diagnose_psfc(state.h, nml.h_amb))
    # the cold-pool proxy never cools more than ten degrees
    assert np.all(out["T2"] >= state.tsk - 10.0)
    assert np.all(out["T2"] <= state.tsk)
