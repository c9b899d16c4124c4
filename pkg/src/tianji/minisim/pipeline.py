"""Simulator pipeline stages.

preprocess   merge raw input fields into an initial-condition dataset
real_init    build a balanced model state from the initial conditions
run_simulation  integrate and write the output dataset
perturb_field   copy a dataset with one variable modified

Stages raise the classifiable fault types with canonical message shapes (the
recovery rule table matches on them).  Every stage accepts an ``inject``
argument naming a fault class to trigger deterministically before any work,
which is how the self-healing path is exercised without real breakage.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from ..errors import (
    ConfigError,
    MissingVariableTable,
    ParallelOverflow,
    ParseError,
    PrefixMismatch,
    UnknownVariable,
    VerticalLevelMismatch,
)
from .core import (
    DIAGNOSTIC_VARS,
    PROGNOSTIC_VARS,
    GridState,
    ddx,
    ddy,
    diagnostics,
    step,
)
from .gridio import (
    GridDataset,
    read_dataset,
    read_input_field,
    read_vtable,
    write_dataset,
)
from .namelist import EARTH_M_PER_DEG, Namelist, load_namelist

_SUFFIX_RE = re.compile(r"^(?P<stem>.+)\.(?P<suffix>\d{3})$")


def _maybe_inject(inject, stage_faults: dict):
    if inject and inject in stage_faults:
        raise stage_faults[inject]()


def scan_input_prefix(input_dir) -> str | None:
    """Most common file-name stem of NNN-suffixed files in a directory."""
    counts: dict = {}
    for f in sorted(Path(input_dir).iterdir()):
        m = _SUFFIX_RE.match(f.name)
        if m:
            counts[m.group("stem")] = counts.get(m.group("stem"), 0) + 1
    if not counts:
        return None
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def preprocess(namelist_path, input_dir, out_path, inject=None) -> GridDataset:
    """Decode `<prefix>.NNN` input files through the variable table."""
    nml = load_namelist(namelist_path)
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise ConfigError("input directory not found: %s" % input_dir)

    found = scan_input_prefix(input_dir)
    _maybe_inject(
        inject,
        {
            "PrefixMismatch": lambda: PrefixMismatch(
                "input prefix mismatch: namelist expects files '%s.NNN' but directory holds prefix '%s'"
                % (nml.prefix, found or nml.prefix)
            ),
            "MissingVariableTable": lambda: MissingVariableTable(
                "variable table 'Vtable' not found in %s" % input_dir
            ),
        },
    )

    files = sorted(
        f for f in input_dir.iterdir()
        if (m := _SUFFIX_RE.match(f.name)) and m.group("stem") == nml.prefix
    )
    if not files:
        raise PrefixMismatch(
            "input prefix mismatch: namelist expects files '%s.NNN' but directory holds prefix '%s'"
            % (nml.prefix, found or "<none>")
        )

    vtable_path = input_dir / "Vtable"
    if not vtable_path.is_file():
        raise MissingVariableTable("variable table 'Vtable' not found in %s" % input_dir)
    vtable = read_vtable(vtable_path)

    variables = []
    data = {}
    levels = None
    for f in files:
        suffix = _SUFFIX_RE.match(f.name).group("suffix")
        if suffix not in vtable:
            raise ParseError("no variable table entry for input suffix %s (%s)" % (suffix, f.name))
        name, units = vtable[suffix]
        arr, file_levels = read_input_field(f)
        if arr.shape != (nml.ny, nml.nx):
            raise ConfigError(
                "input %s is %dx%d but namelist grid is %dx%d"
                % (f.name, arr.shape[1], arr.shape[0], nml.nx, nml.ny)
            )
        if levels is None:
            levels = file_levels
        elif file_levels != levels:
            raise ParseError(
                "input %s has %d levels, other inputs have %d" % (f.name, file_levels, levels)
            )
        variables.append((name, units))
        data[name] = arr[np.newaxis, :, :]

    ds = GridDataset(
        nx=nml.nx,
        ny=nml.ny,
        ref_lat=nml.ref_lat,
        ref_lon=nml.ref_lon,
        d_deg=nml.d_deg,
        levels=int(levels),
        variables=variables,
        times=[0.0],
        data=data,
        comment="initial conditions from %s" % nml.prefix,
    )
    write_dataset(ds, out_path)
    return ds


def real_init(namelist_path, ic_path, out_path, inject=None) -> GridDataset:
    """Build the t=0 model state: ambient column with a Gaussian depression
    at the configured vortex centre, winds in geostrophic balance with it."""
    nml = load_namelist(namelist_path)
    ic = read_dataset(ic_path)

    _maybe_inject(
        inject,
        {
            "VerticalLevelMismatch": lambda: VerticalLevelMismatch(
                "vertical level mismatch: e_vert=%d but input has %d levels"
                % (max(ic.levels - 2, 1), ic.levels)
            )
        },
    )
    if nml.e_vert != ic.levels:
        raise VerticalLevelMismatch(
            "vertical level mismatch: e_vert=%d but input has %d levels" % (nml.e_vert, ic.levels)
        )
    if (ic.nx, ic.ny) != (nml.nx, nml.ny):
        raise ConfigError(
            "initial conditions are %dx%d but namelist grid is %dx%d"
            % (ic.nx, ic.ny, nml.nx, nml.ny)
        )
    for required in ("SKINTEMP", "SMOIS"):
        if required not in ic.data:
            raise UnknownVariable("initial conditions lack %s" % required)

    lat = ic.lat_axis()[:, np.newaxis]
    lon = ic.lon_axis()[np.newaxis, :]
    r2_km = ((lat - nml.vortex_lat) * 111.0) ** 2 + ((lon - nml.vortex_lon) * 111.0) ** 2
    h = nml.h_amb - nml.vortex_amp * np.exp(-r2_km / nml.vortex_r_km**2)
    h = h + np.zeros((nml.ny, nml.nx))

    dx = nml.d_deg * EARTH_M_PER_DEG
    u = -(nml.g / nml.f_coriolis) * ddy(h, dx) + nml.u_bg
    v = +(nml.g / nml.f_coriolis) * ddx(h, dx) + nml.v_bg

    state_data = {
        "H": h,
        "U": u,
        "V": v,
        "QVAPOR": np.full((nml.ny, nml.nx), float(nml.qv0)),
        "SKINTEMP": ic.data["SKINTEMP"][0].copy(),
        "SMOIS": ic.data["SMOIS"][0].copy(),
        "RAINC": np.zeros((nml.ny, nml.nx)),
        "RAINNC": np.zeros((nml.ny, nml.nx)),
    }
    ds = GridDataset(
        nx=nml.nx,
        ny=nml.ny,
        ref_lat=nml.ref_lat,
        ref_lon=nml.ref_lon,
        d_deg=nml.d_deg,
        levels=ic.levels,
        variables=list(PROGNOSTIC_VARS),
        times=[0.0],
        data={name: state_data[name][np.newaxis, :, :] for name, _ in PROGNOSTIC_VARS},
        comment="model state from %s" % Path(ic_path).name,
    )
    write_dataset(ds, out_path)
    return ds


def state_from_dataset(ds: GridDataset, t_idx: int = 0) -> GridState:
    return GridState(
        time=float(ds.times[t_idx]),
        h=ds.data["H"][t_idx].copy(),
        u=ds.data["U"][t_idx].copy(),
        v=ds.data["V"][t_idx].copy(),
        qv=ds.data["QVAPOR"][t_idx].copy(),
        tsk=ds.data["SKINTEMP"][t_idx].copy(),
        smois=ds.data["SMOIS"][t_idx].copy(),
        rainc=ds.data["RAINC"][t_idx].copy(),
        rainnc=ds.data["RAINNC"][t_idx].copy(),
    )


def run_simulation(
    namelist_path,
    state_path,
    out_path,
    inject=None,
    workers_requested: int = 1,
    worker_cap: int | None = None,
) -> GridDataset:
    """Integrate n_steps forward, writing diagnostics every output_interval
    steps (the initial time included)."""
    nml = load_namelist(namelist_path)
    _maybe_inject(
        inject,
        {
            "ParallelOverflow": lambda: ParallelOverflow(
                "parallel overflow: requested %d worker processes exceeds cap %d"
                % (2 * max(worker_cap or 1, 1), max(worker_cap or 1, 1))
            )
        },
    )
    if worker_cap is not None and workers_requested > worker_cap:
        raise ParallelOverflow(
            "parallel overflow: requested %d worker processes exceeds cap %d"
            % (workers_requested, worker_cap)
        )

    state_ds = read_dataset(state_path)
    if (state_ds.nx, state_ds.ny) != (nml.nx, nml.ny):
        raise ConfigError(
            "state file is %dx%d but namelist grid is %dx%d"
            % (state_ds.nx, state_ds.ny, nml.nx, nml.ny)
        )
    state = state_from_dataset(state_ds)

    times = [state.time]
    frames = [diagnostics(state, nml)]
    for k in range(1, nml.n_steps + 1):
        state = step(state, nml)
        if k % nml.output_interval == 0:
            times.append(state.time)
            frames.append(diagnostics(state, nml))

    data = {
        name: np.stack([fr[name] for fr in frames], axis=0) for name, _ in DIAGNOSTIC_VARS
    }
    ds = GridDataset(
        nx=nml.nx,
        ny=nml.ny,
        ref_lat=nml.ref_lat,
        ref_lon=nml.ref_lon,
        d_deg=nml.d_deg,
        levels=state_ds.levels,
        variables=list(DIAGNOSTIC_VARS),
        times=times,
        data=data,
        comment="minisim run: %d steps, dt=%s s" % (nml.n_steps, nml.dt),
    )
    write_dataset(ds, out_path)
    return ds


def perturb_field(src_path, var: str, op: str, value: float, out_path) -> GridDataset:
    """Copy a dataset with ``var`` modified pointwise at every time level.

    The source file is left untouched; the copy records what was done to it
    in the header comment.
    """
    ds = read_dataset(src_path)
    if var not in ds.data:
        raise UnknownVariable("dataset has no variable %r" % var)
    if op == "add":
        ds.data[var] = ds.data[var] + float(value)
    elif op == "scale":
        ds.data[var] = ds.data[var] * float(value)
    else:
        raise ConfigError("perturb op must be 'add' or 'scale', got %r" % op)
    note = "perturb %s %s %s" % (var, op, value)
    ds.comment = "%s; %s" % (ds.comment, note) if ds.comment else note
    write_dataset(ds, out_path)
    return ds
