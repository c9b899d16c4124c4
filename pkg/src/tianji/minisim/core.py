"""Numerical core: single-layer shallow water plus moisture on a periodic grid.

All fields live on one colocated grid of shape (ny, nx); row j maps to
latitude ref_lat + j*d_deg, column i to longitude ref_lon + i*d_deg.  Space
derivatives are centred differences with periodic wrap, time stepping is one
forward-Euler update per step, and all right-hand sides are evaluated on the
pre-step state.  With alpha_heat = 0 the domain total of h is conserved to
float rounding because the centred divergence telescopes over the torus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CflViolation, NonFinite
from .namelist import Namelist

PSFC_REF = 101325.0  # Pa at h == h_amb
PSFC_PER_M = 100.0   # Pa per metre of column displacement

PROGNOSTIC_VARS = (
    ("H", "m"),
    ("U", "m s-1"),
    ("V", "m s-1"),
    ("QVAPOR", "kg kg-1"),
    ("SKINTEMP", "K"),
    ("SMOIS", "1"),
    ("RAINC", "mm"),
    ("RAINNC", "mm"),
)

DIAGNOSTIC_VARS = (
    ("PSFC", "Pa"),
    ("U10", "m s-1"),
    ("V10", "m s-1"),
    ("T2", "K"),
    ("RAINC", "mm"),
    ("RAINNC", "mm"),
    ("SKINTEMP", "K"),
    ("SMOIS", "1"),
)


@dataclass
class GridState:
    time: float
    h: np.ndarray
    u: np.ndarray
    v: np.ndarray
    qv: np.ndarray
    tsk: np.ndarray
    smois: np.ndarray
    rainc: np.ndarray
    rainnc: np.ndarray

    def copy(self) -> "GridState":
        return GridState(
            self.time,
            self.h.copy(),
            self.u.copy(),
            self.v.copy(),
            self.qv.copy(),
            self.tsk.copy(),
            self.smois.copy(),
            self.rainc.copy(),
            self.rainnc.copy(),
        )

    def check_finite(self) -> None:
        for name in ("h", "u", "v", "qv"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NonFinite("field %s went non-finite at t=%s" % (name, self.time))


def ddx(a: np.ndarray, dx: float) -> np.ndarray:
    """Centred x-derivative with periodic wrap (x is the last axis)."""
    return (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) / (2.0 * dx)


def ddy(a: np.ndarray, dy: float) -> np.ndarray:
    """Centred y-derivative with periodic wrap (y is the second-to-last axis)."""
    return (np.roll(a, -1, axis=-2) - np.roll(a, 1, axis=-2)) / (2.0 * dy)


def precip_rate(qv: np.ndarray, nml: Namelist) -> np.ndarray:
    return np.maximum(qv - nml.q_crit, 0.0) / nml.tau_precip


def evap_rate(tsk, smois, nml: Namelist) -> np.ndarray:
    return nml.c_evap * smois * np.maximum(tsk - nml.tsk_ref, 0.0)


def diagnose_t2(tsk, P, dt: float) -> np.ndarray:
    """Cold-pool 2-m temperature: rain rate cools the surface air, clamped."""
    return np.maximum(tsk - 5.0 * (dt * P) * 1000.0, tsk - 10.0)


def diagnose_psfc(h, h_amb: float) -> np.ndarray:
    return PSFC_REF + PSFC_PER_M * (h - h_amb)


def step(state: GridState, nml: Namelist) -> GridState:
    """Advance one forward-Euler step; returns a new GridState."""
    if nml.cfl() > 0.5:
        raise CflViolation("CFL %.4f exceeds 0.5" % nml.cfl())
    dt = float(nml.dt)
    dx = nml.dx_m
    g = float(nml.g)
    f = float(nml.f_coriolis)

    h, u, v = state.h, state.u, state.v
    qv, tsk, smois = state.qv, state.tsk, state.smois

    div = ddx(u, dx) + ddy(v, dx)
    E = evap_rate(tsk, smois, nml)
    P = precip_rate(qv, nml)

    h_new = h + dt * (-nml.h_amb * div - nml.alpha_heat * (tsk - nml.tsk_ref))
    u_new = u + dt * (f * v - g * ddx(h, dx) - nml.kappa_drag * u)
    v_new = v + dt * (-f * u - g * ddy(h, dx) - nml.kappa_drag * v)
    qv_new = qv + dt * (E - P)
    rainc_new = state.rainc + dt * P * nml.conv_frac * 1000.0
    rainnc_new = state.rainnc + dt * P * (1.0 - nml.conv_frac) * 1000.0

    if nml.sst_update == 1:
        tsk_new = tsk + (nml.tsk_ref - tsk) / 10.0
    else:
        tsk_new = tsk.copy()

    out = GridState(
        time=state.time + dt,
        h=h_new,
        u=u_new,
        v=v_new,
        qv=qv_new,
        tsk=tsk_new,
        smois=smois.copy(),
        rainc=rainc_new,
        rainnc=rainnc_new,
    )
    out.check_finite()
    return out


def diagnostics(state: GridState, nml: Namelist) -> dict:
    """Instantaneous output fields for one time level."""
    P = precip_rate(state.qv, nml)
    return {
        "PSFC": diagnose_psfc(state.h, nml.h_amb),
        "U10": state.u.copy(),
        "V10": state.v.copy(),
        "T2": diagnose_t2(state.tsk, P, float(nml.dt)),
        "RAINC": state.rainc.copy(),
        "RAINNC": state.rainnc.copy(),
        "SKINTEMP": state.tsk.copy(),
        "SMOIS": state.smois.copy(),
    }


def run_steps(state: GridState, nml: Namelist, n_steps: int):
    """Generator yielding the state after each step."""
    for _ in range(n_steps):
        state = step(state, nml)
        yield state
