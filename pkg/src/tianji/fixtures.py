"""Deterministic fixtures: input trees, namelists, an engineered analysis
dataset, a small literature corpus, and scripted scenario files.

Everything here is closed-form or seed-free so the same bytes come out on
every run.  The test-suite, the demo scripts, and the ``tianji fixtures``
subcommand all build from these generators.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import FeaturePoint, Trajectory
from .backend import (
    AgentIdentity,
    FinalResponse,
    PlanRoadmap,
    ProposeHypothesis,
    Rebut,
    RequestTool,
    Revise,
    Role,
    ScenarioScript,
    Score,
    SelectFinal,
    Verdict,
    dump_script,
)
from .debate import DebateConfig
from .minisim.gridio import GridDataset, write_dataset, write_input_field, write_vtable
from .orchestrator import CallLedger

# ---------------------------------------------------------------------------
# Literature corpus
# ---------------------------------------------------------------------------

CORPUS_DOCS = [
    ("binary_interaction.txt",
     "Binary vortex interaction and sudden track deflection of western Pacific typhoons",
     "Observational and idealized evidence that a nearby mesoscale vortex can rotate a "
     "typhoon track cyclonically by several degrees within a day. The deflection scales "
     "with the circulation of the companion vortex and weakens with separation distance."),
    ("monsoon_gyre.txt",
     "Monsoon gyre modulation of tropical cyclone steering flow",
     "Large monsoon gyres superpose a slowly rotating background wind on the steering "
     "flow. Track forecasts that ignore the gyre misplace landfall by hundreds of "
     "kilometers. The gyre also feeds moisture into the outer rainbands."),
    ("terrain_channeling.txt",
     "Terrain-induced channeling and upstream track deflection near steep coastal ranges",
     "Steep coastal mountain ranges block the low-level inflow of an approaching "
     "cyclone. The blocked flow accelerates around the range, displacing the low-level "
     "center poleward before landfall while the midlevel center keeps its heading."),
    ("sst_cold_wake.txt",
     "Sea surface cooling wakes and the intensity of slow-moving tropical cyclones",
     "Slow-moving storms upwell cold water beneath the core. The resulting skin "
     "temperature drop cuts surface enthalpy flux and flattens the deepening rate. A "
     "2 K warm anomaly restores rapid intensification in coupled experiments."),
    ("cold_pool_squall.txt",
     "Cold pool dynamics and the maintenance of long-lived squall lines",
     "Evaporatively driven cold pools spread beneath convective lines. The density "
     "current lifts warm inflow at the gust front, regenerating cells. Reduced soil "
     "moisture weakens evaporation, the cold pool, and the line's rainfall footprint."),
]


def write_corpus(directory) -> list:
    """Write the title+abstract corpus files; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for fname, title, abstract in CORPUS_DOCS:
        p = directory / fname
        p.write_text("%s\n%s\n" % (title, abstract), encoding="utf-8")
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# Debate fixture: 3 researchers, 6 rounds
# ---------------------------------------------------------------------------

DEBATE_TOPIC = (
    "A western Pacific typhoon shows anomalous track deflections while approaching a "
    "steep coastal mountain range. Propose a physical mechanism that explains the "
    "deflection and predicts its sign."
)

DEBATE_BASE_ORDER = ["Alice", "Bob", "Carol"]

_EXPERTISE = {
    "Alice": "moist thermodynamics",
    "Bob": "vortex dynamics",
    "Carol": "boundary layer processes",
}

# one statement per researcher per round (round 1 proposal, rounds 2..6 revisions)
_STATEMENTS = {
    "Alice": [
        "Asymmetric diabatic heating on the upshear flank rotates the beta gyres and "
        "deflects the track toward the heating maximum.",
        "Asymmetric inner-core heating, amplified by warm inshore water, rotates the "
        "beta gyres and pulls the track toward the heating maximum.",
        "Heating asymmetry driven by the inshore warm tongue dominates the deflection "
        "once the core crosses the 26 C isotherm gradient.",
        "The heating-rotated beta gyres explain the poleward turn; the predicted "
        "deflection sign flips with the sign of the cross-track SST gradient.",
        "Heating asymmetry sets the deflection sign while terrain blocking sets its "
        "timing; the SST gradient term dominates beyond 200 km offshore.",
        "Diabatic heating asymmetry from the inshore SST gradient rotates the beta "
        "gyres poleward, with terrain blocking controlling onset timing.",
    ],
    "Bob": [
        "The approaching range acts as an image vortex; potential flow around the "
        "barrier displaces the center poleward before landfall.",
        "Barrier blocking plus the channeled low-level jet advect the low-level center "
        "poleward, decoupling it from the midlevel vortex.",
        "The channeled jet between the core and the range advects the low-level center "
        "poleward at a rate set by the blocking Froude number.",
        "A sub-critical Froude number regime produces upstream poleward deflection; "
        "the deflection reverses when the flow transitions to flow-over.",
        "Froude-number-controlled channeling predicts both the poleward deflection and "
        "its reversal for smaller storms that clear the ridge crest.",
        "Terrain channeling in the sub-critical Froude regime advects the low-level "
        "center poleward, and the deflection sign reverses in the flow-over regime.",
    ],
    "Carol": [
        "Boundary layer friction over the coastal shelf tilts the inflow asymmetry and "
        "nudges the center toward the weaker-friction (offshore) side.",
        "Differential surface drag across the coastline tilts the frictional inflow "
        "and nudges the center offshore, opposing the blocking deflection.",
        "The drag-induced offshore nudge is secondary but measurable; it lags the "
        "blocking deflection by roughly a quarter inertial period.",
        "Frictional inflow asymmetry modulates the amplitude of the deflection set by "
        "blocking, scaling with the land-sea roughness contrast.",
        "Drag asymmetry acts as a damping term on the terrain-induced deflection, "
        "strongest for shallow boundary layers under the eyewall.",
        "Land-sea drag contrast damps and delays the terrain-induced deflection "
        "without changing its sign.",
    ],
}

# rubric rows per researcher per round; each sums to the pinned totals
# Alice 33,34,36,38,38,38  Bob 30,32,34,36,38,39  Carol 28,30,31,33,35,36
_SCORE_PLAN = {
    "Alice": [(9, 8, 8, 8), (9, 9, 8, 8), (9, 9, 9, 9), (10, 10, 9, 9), (10, 10, 9, 9), (10, 10, 9, 9)],
    "Bob": [(8, 8, 7, 7), (8, 8, 8, 8), (9, 9, 8, 8), (9, 9, 9, 9), (10, 10, 9, 9), (10, 10, 9, 10)],
    "Carol": [(7, 7, 7, 7), (8, 8, 7, 7), (8, 8, 8, 7), (9, 8, 8, 8), (9, 9, 9, 8), (9, 9, 9, 9)],
}

# (speaker, target, critique) triples in the realized speaking order of each
# round; the orders below are what speaking_order computes from the previous
# round's rebuttals, so the scenario and the engine walk in lockstep
_REBUTTAL_PLAN = {
    2: [
        ("Alice", "Bob", "An image vortex alone cannot explain deflections that begin 400 km offshore."),
        ("Bob", "Alice", "Heating asymmetry of the observed size rotates the gyres too slowly to match onset."),
        ("Carol", None, ""),
    ],
    3: [
        ("Alice", "Carol", "The frictional nudge is an order of magnitude below the observed deflection rate."),
        ("Bob", "Carol", "Drag asymmetry cannot act before the core reaches the shelf; the deflection starts earlier."),
        ("Carol", "Alice", "The claimed SST gradient is inside the cold wake; its sign is opposite to the assumption."),
    ],
    4: [
        ("Carol", None, ""),
        ("Alice", "Bob", "The Froude argument needs a ridge-height distribution, not a single crest value."),
        ("Bob", None, ""),
    ],
    5: [
        ("Bob", "Alice", "Beyond 200 km offshore the gyre rotation rate is insensitive to the inshore gradient."),
        ("Alice", None, ""),
        ("Carol", None, ""),
    ],
    6: [
        ("Alice", None, ""),
        ("Bob", None, ""),
        ("Carol", None, ""),
    ],
}

# in creation order: round-1 proposals are ids 1..3, each later round adds
# three revisions in the realized speaking order; Bob's round-6 revision is 17
FINAL_HYPOTHESIS_ID = 17


def debate_researchers() -> list:
    return [AgentIdentity(n, Role.Researcher, expertise=_EXPERTISE[n]) for n in DEBATE_BASE_ORDER]


def debate_config(retrieval_enabled: bool = False, rounds: int = 6) -> DebateConfig:
    return DebateConfig(
        researchers=debate_researchers(),
        rounds=rounds,
        base_order=list(DEBATE_BASE_ORDER),
        rebuttal_enabled=True,
        retrieval_enabled=retrieval_enabled,
        topic=DEBATE_TOPIC,
    )


def debate_scenario() -> ScenarioScript:
    """Scenario for the 3-researcher, 6-round debate.

    The entries mirror the engine's consumption order exactly: round-1
    proposals in base order, host scores after every round in base order,
    rebuttal then revision phases in the computed speaking order, and one
    chief selection at the end.
    """
    entries = {}
    steps = {}

    def put(agent, output):
        s = steps.get(agent, 0)
        steps[agent] = s + 1
        entries[(agent, s)] = output

    for name in DEBATE_BASE_ORDER:
        put(name, ProposeHypothesis(
            statement=_STATEMENTS[name][0],
            citations=[CORPUS_DOCS[i][1] for i in ((3,) if name == "Alice" else (2,) if name == "Bob" else (4,))],
        ))
    for name in DEBATE_BASE_ORDER:
        put("Host", Score(values=list(_SCORE_PLAN[name][0])))

    for round_no in range(2, 7):
        plan = _REBUTTAL_PLAN[round_no]
        for speaker, target, critique in plan:
            put(speaker, Rebut(target_name=target, critique=critique))
        for speaker, _, _ in plan:
            put(speaker, Revise(statement=_STATEMENTS[speaker][round_no - 1]))
        for name in DEBATE_BASE_ORDER:
            put("Host", Score(values=list(_SCORE_PLAN[name][round_no - 1])))

    put("Chief", SelectFinal(
        hypothesis_id=FINAL_HYPOTHESIS_ID,
        justification="Highest final rubric total; the Froude-number mechanism makes a testable sign prediction.",
    ))
    return ScenarioScript(name="tc-debate", seed=7, entries=entries)


# ---------------------------------------------------------------------------
# Simulator cases
# ---------------------------------------------------------------------------

def squall_namelist_values() -> dict:
    return {
        "nx": 48, "ny": 48,
        "ref_lat": 30.0, "ref_lon": 110.0, "d_deg": 0.25,
        "e_vert": 34,
        "dt": 30.0, "n_steps": 240, "output_interval": 24,
        "prefix": "GRIBFILE",
        "lsm_scheme": "noahmp_toy", "mp_scheme": "thompson_toy", "pbl_scheme": "ysu_toy",
        "sst_update": 0,
        "f_coriolis": 7.0e-5, "h_amb": 8000.0, "g": 9.81,
        "alpha_heat": 0.0, "tsk_ref": 288.0, "qv0": 0.0115,
        "vortex_amp": 25.0, "vortex_r_km": 250.0,
    }


def typhoon_namelist_values() -> dict:
    return {
        "nx": 64, "ny": 64,
        "ref_lat": 12.0, "ref_lon": 112.0, "d_deg": 0.25,
        "e_vert": 34,
        "dt": 30.0, "n_steps": 360, "output_interval": 36,
        "prefix": "GFSFILE",
        "lsm_scheme": "noahmp_toy", "mp_scheme": "thompson_toy", "pbl_scheme": "ysu_toy",
        "sst_update": 0,
        "f_coriolis": 5.0e-5, "h_amb": 8000.0, "g": 9.81,
        "alpha_heat": 2.0e-5, "tsk_ref": 288.0, "qv0": 0.0115,
        "vortex_amp": 60.0, "vortex_r_km": 200.0,
        "u_bg": -2.0, "v_bg": 1.0,
    }


def conservation_namelist_values() -> dict:
    """A numerically placid 64x64 setup for long conservation runs.

    The explicit time stepping amplifies the fastest gravity wave unless
    surface drag wins; with dt=5 s on a 0.5 degree grid the drag term damps
    about 1.25e-3 per step while the wave mode grows about 3.2e-4, so a
    thousand steps decay smoothly instead of blowing up.
    """
    v = typhoon_namelist_values()
    v.update(
        d_deg=0.5,
        dt=5.0, n_steps=1000, output_interval=1000,
        alpha_heat=0.0,
        vortex_amp=20.0, vortex_r_km=400.0,
        u_bg=0.0, v_bg=0.0,
    )
    return v


def _grid_axes(values: dict):
    lat = values["ref_lat"] + np.arange(values["ny"]) * values["d_deg"]
    lon = values["ref_lon"] + np.arange(values["nx"]) * values["d_deg"]
    return lat[:, np.newaxis], lon[np.newaxis, :]


def write_squall_inputs(input_dir) -> None:
    """GRIBFILE.000 (uniform warm skin temperature) and GRIBFILE.001 (a zonal
    soil moisture band centered at 33N, 116E) plus the variable table."""
    input_dir = Path(input_dir)
    input_dir.mkdir(parents=True, exist_ok=True)
    v = squall_namelist_values()
    lat, lon = _grid_axes(v)
    skintemp = np.full((v["ny"], v["nx"]), 296.0)
    smois = 0.12 + 0.18 * np.exp(-(((lat - 33.0) / 1.0) ** 2)) * np.exp(-(((lon - 116.0) / 3.0) ** 2))
    write_input_field(input_dir / "GRIBFILE.000", skintemp, levels=34)
    write_input_field(input_dir / "GRIBFILE.001", smois, levels=34)
    write_vtable(input_dir / "Vtable", [("000", "SKINTEMP", "K"), ("001", "SMOIS", "1")])


def write_typhoon_inputs(input_dir) -> None:
    """GFSFILE.000/001: a warm pool centered on the vortex and mild soil
    moisture structure."""
    input_dir = Path(input_dir)
    input_dir.mkdir(parents=True, exist_ok=True)
    v = typhoon_namelist_values()
    lat, lon = _grid_axes(v)
    clat = v["ref_lat"] + (v["ny"] - 1) * v["d_deg"] / 2.0
    clon = v["ref_lon"] + (v["nx"] - 1) * v["d_deg"] / 2.0
    skintemp = 300.0 + 2.0 * np.exp(-(((lat - clat) / 3.0) ** 2)) * np.exp(-(((lon - clon) / 4.0) ** 2))
    smois = 0.22 + 0.06 * np.exp(-(((lat - clat) / 5.0) ** 2)) + np.zeros((v["ny"], v["nx"]))
    write_input_field(input_dir / "GFSFILE.000", skintemp, levels=34)
    write_input_field(input_dir / "GFSFILE.001", smois, levels=34)
    write_vtable(input_dir / "Vtable", [("000", "SKINTEMP", "K"), ("001", "SMOIS", "1")])


# ---------------------------------------------------------------------------
# Engineered typhoon analysis dataset
# ---------------------------------------------------------------------------

# per-frame minimum central pressure, hPa; the deepest analysis is frame 8
TY_MIN_SERIES = [
    1004.2, 998.6, 991.3, 983.0, 974.8, 961.5, 948.2, 935.4,
    922.769, 929.3, 938.9, 946.1, 953.7,
]
TY_GRID = {"nx": 56, "ny": 44, "ref_lat": 11.09, "ref_lon": 108.17, "d_deg": 0.25}
TY_TIMES = [21600.0 * t for t in range(13)]
TY_DIV_MIN = -0.00287   # pinned stencil divergence minimum at frame 8, s-1
TY_RAIN_PEAK = 453.68   # pinned RAINC+RAINNC maximum at the final frame, mm


def ty_center_cells() -> list:
    """(j, i) cell of the analyzed center per frame; frame 10 is the
    938.9 hPa analysis at 19.09N 118.17E."""
    return [(12 + 2 * t, 50 - t) for t in range(13)]


def write_typhoon_analysis_dataset(path) -> GridDataset:
    g = TY_GRID
    ny, nx, d = g["ny"], g["nx"], g["d_deg"]
    lat = g["ref_lat"] + np.arange(ny) * d
    lon = g["ref_lon"] + np.arange(nx) * d
    LAT, LON = lat[:, np.newaxis], lon[np.newaxis, :]
    centers = ty_center_cells()

    psfc = np.empty((13, ny, nx))
    u10 = np.empty((13, ny, nx))
    v10 = np.empty((13, ny, nx))
    t2 = np.empty((13, ny, nx))
    footprint = np.zeros((ny, nx))

    for t in range(13):
        jc, ic = centers[t]
        dx_km = (LON - lon[ic]) * 111.0
        dy_km = (LAT - lat[jc]) * 111.0
        r2 = dx_km ** 2 + dy_km ** 2
        m = TY_MIN_SERIES[t]
        field = 1010.0 - (1010.0 - m) * np.exp(-r2 / 200.0 ** 2)
        field[jc, ic] = m  # hard-set so the frame minimum is the pin exactly
        psfc[t] = field
        env = np.exp(-r2 / 60.0 ** 2)
        u10[t] = (-80.0 * dx_km / 60.0 - 40.0 * dy_km / 60.0) * env
        v10[t] = (-80.0 * dy_km / 60.0 + 40.0 * dx_km / 60.0) * env
        t2[t] = 296.0 + 9.0 * np.exp(-r2 / 150.0 ** 2)
        footprint += np.exp(-r2 / 150.0 ** 2)

    # normalize so the frame-8 centered-difference divergence minimum equals
    # the pinned value to float rounding
    dx_m = d * 111000.0
    div8 = (np.roll(u10[8], -1, axis=1) - np.roll(u10[8], 1, axis=1)) / (2.0 * dx_m) \
        + (np.roll(v10[8], -1, axis=0) - np.roll(v10[8], 1, axis=0)) / (2.0 * dx_m)
    scale = TY_DIV_MIN / div8.min()
    u10 *= scale
    v10 *= scale

    # cumulative rain: equal convective and grid-scale shares, shaped by the
    # track footprint; the footprint peak is exactly 1 so each accumulator
    # tops out at half the pinned total
    fn = footprint / footprint.max()
    growth = (np.arange(13) / 12.0) ** 1.5
    rainc = (TY_RAIN_PEAK / 2.0) * growth[:, np.newaxis, np.newaxis] * fn[np.newaxis]
    rainnc = rainc.copy()

    ds = GridDataset(
        nx=nx, ny=ny,
        ref_lat=g["ref_lat"], ref_lon=g["ref_lon"], d_deg=d,
        levels=0,
        variables=[
            ("PSFC", "hPa"), ("U10", "m s-1"), ("V10", "m s-1"),
            ("T2", "K"), ("RAINC", "mm"), ("RAINNC", "mm"),
        ],
        times=list(TY_TIMES),
        data={"PSFC": psfc, "U10": u10, "V10": v10, "T2": t2, "RAINC": rainc, "RAINNC": rainnc},
        comment="synthetic typhoon case: 13 six-hourly analyses on a 0.25 degree grid",
    )
    write_dataset(ds, path)
    return ds


# ---------------------------------------------------------------------------
# Simple-mode scenarios (one per named artifact)
# ---------------------------------------------------------------------------

TY_DATASET_REL = "inputs/typhoon_fields.masd"

SIMPLE_KINDS = ("intensity", "track", "precip", "divergence")

SIMPLE_ARTIFACTS = {
    "intensity": "plots/typhoon_intensity_evolution.svg",
    "track": "plots/typhoon_track_with_slp.svg",
    "precip": "plots/typhoon_total_precipitation.svg",
    "divergence": "plots/typhoon_divergence_zone.svg",
}

SIMPLE_REQUESTS = {
    "intensity": "Plot how the typhoon's minimum sea level pressure evolves over the "
                 "record stored in inputs/typhoon_fields.masd.",
    "track": "Chart the typhoon track on top of the final sea level pressure field "
             "from inputs/typhoon_fields.masd.",
    "precip": "Map the accumulated total rainfall of the typhoon case and mark where "
              "it peaks.",
    "divergence": "Map the low-level divergence around the typhoon core at the time "
                  "of peak intensity and highlight the convergence zone.",
}


def _simple_entries(kind: str) -> list:
    ds = TY_DATASET_REL
    if kind == "intensity":
        return [
            RequestTool("inspect_dataset", {"path": ds}),
            RequestTool("ingest_tensor", {"path": ds, "var": "PSFC", "save_as": "slp"}),
            RequestTool("locate_feature", {"tensor": "$slp", "mode": "min", "save_as": "curve"}),
            RequestTool("plot_cartesian_chart", {
                "series": [{"label": "min PSFC", "x": "$curve.times", "y": "$curve.values"}],
                "out": SIMPLE_ARTIFACTS[kind],
                "title": "Typhoon intensity evolution",
                "xlabel": "time (s)", "ylabel": "minimum PSFC (hPa)",
                "markers": [{"kind": "star", "x": 172800.0, "y": 922.769, "label": "922.769 hPa"}],
            }),
            FinalResponse("Minimum central pressure bottomed out at 922.769 hPa at "
                          "t=172800 s; the curve is saved to %s." % SIMPLE_ARTIFACTS[kind]),
        ]
    if kind == "track":
        return [
            RequestTool("inspect_dataset", {"path": ds}),
            RequestTool("ingest_tensor", {"path": ds, "var": "PSFC", "save_as": "slp"}),
            RequestTool("locate_feature", {"tensor": "$slp", "mode": "min", "save_as": "track"}),
            RequestTool("plot_spatial_map", {
                "tensor": "$slp", "time": 12,
                "out": SIMPLE_ARTIFACTS[kind],
                "colormap": "diverging-bluered",
                "title": "Typhoon track over final sea level pressure",
                "overlays": [
                    {"trajectory": "$track", "label": "center track"},
                    {"star": {"lat": 19.09, "lon": 118.17}, "label": "938.9 hPa"},
                ],
            }),
            FinalResponse("The center tracked northwest then recurved; the 938.9 hPa "
                          "analysis sits at 19.09N 118.17E. Map saved to %s."
                          % SIMPLE_ARTIFACTS[kind]),
        ]
    if kind == "precip":
        return [
            RequestTool("list_directory", {"path": "inputs"}),
            RequestTool("inspect_dataset", {"path": ds}),
            RequestTool("ingest_tensor", {"path": ds, "var": ["RAINC", "RAINNC"], "time": 12,
                                          "save_as": "rain"}),
            RequestTool("transform_tensor", {"inputs": ["$rain.RAINC", "$rain.RAINNC"],
                                             "op": "sum_pair", "save_as": "total"}),
            RequestTool("locate_feature", {"tensor": "$total", "mode": "max", "save_as": "peak"}),
            RequestTool("plot_spatial_map", {
                "tensor": "$total",
                "out": SIMPLE_ARTIFACTS[kind],
                "colormap": "sequential-precip",
                "title": "Accumulated total precipitation (mm)",
                "overlays": [{"star": {"lat": "$peak.lat", "lon": "$peak.lon"},
                              "label": "453.68 mm"}],
            }),
            FinalResponse("Accumulated rainfall (RAINC plus RAINNC) peaks at 453.68 mm "
                          "along the track; map saved to %s." % SIMPLE_ARTIFACTS[kind]),
        ]
    if kind == "divergence":
        return [
            RequestTool("ingest_tensor", {"path": ds, "var": ["U10", "V10"], "time": 8,
                                          "save_as": "wind"}),
            RequestTool("transform_tensor", {"inputs": ["$wind.U10", "$wind.V10"],
                                             "op": "divergence", "save_as": "div"}),
            RequestTool("locate_feature", {"tensor": "$div", "mode": "min", "save_as": "core"}),
            RequestTool("filter_by_geometry", {
                "tensor": "$div",
                "shape": {"circle": {"lat": "$core.lat", "lon": "$core.lon", "radius_km": 300.0}},
                "save_as": "zone",
            }),
            RequestTool("plot_spatial_map", {
                "tensor": "$zone",
                "out": SIMPLE_ARTIFACTS[kind],
                "colormap": "diverging-bluered",
                "title": "Near-core divergence at peak intensity (s-1)",
                "overlays": [{"star": {"lat": "$core.lat", "lon": "$core.lon"},
                              "label": "-0.00287 s-1"}],
            }),
            FinalResponse("Strongest low-level convergence of -0.00287 s-1 sits at the "
                          "typhoon core; the 300 km zone is mapped in %s."
                          % SIMPLE_ARTIFACTS[kind]),
        ]
    raise ValueError("unknown simple task kind %r" % kind)


def simple_scenario(kind: str) -> ScenarioScript:
    entries = {("assistant", step): out for step, out in enumerate(_simple_entries(kind))}
    return ScenarioScript(name="simple-%s" % kind, seed=7, entries=entries)


def simple_request(kind: str) -> str:
    return SIMPLE_REQUESTS[kind]


# ---------------------------------------------------------------------------
# Complex-mode scenarios
# ---------------------------------------------------------------------------

SQUALL_GOAL = (
    "Run the squall-line simulation end to end: configure the namelist, preprocess "
    "the gridded inputs, initialize, integrate, then track the surface low and map "
    "the accumulated rainfall."
)

TYPHOON_GOAL = (
    "Compare a control typhoon simulation against a +2 K sea surface temperature "
    "experiment group: run both, then quantify the track offsets and the intensity "
    "change."
)


def squall_subtask_plan() -> list:
    return [
        {"id": 1, "description": "configure the squall-line namelist",
         "worker_spec": "wps_configurer", "depends_on": [],
         "artifacts": ["sim/namelist.input"]},
        {"id": 2, "description": "decode prefix-named inputs through the variable table",
         "worker_spec": "fnl_processor", "depends_on": [1],
         "artifacts": ["sim/squall_ic.masd"]},
        {"id": 3, "description": "build the balanced initial model state",
         "worker_spec": "wrf_real_executor", "depends_on": [2],
         "artifacts": ["sim/squall_state0.masd"]},
        {"id": 4, "description": "integrate the squall-line case forward",
         "worker_spec": "wrf_main_simulator", "depends_on": [3],
         "artifacts": ["sim/squall_run.masd"]},
        {"id": 5, "description": "track the surface low and map accumulated rain",
         "worker_spec": "trajectory_analyzer", "depends_on": [4],
         "artifacts": ["analysis/squall_track.csv", "plots/squall_rain.svg"]},
    ]


def squall_complex_scenario() -> ScenarioScript:
    entries = {}
    steps = {}

    def put(agent, output):
        s = steps.get(agent, 0)
        steps[agent] = s + 1
        entries[(agent, s)] = output

    put("TianJi", PlanRoadmap(subtasks=squall_subtask_plan()))
    for _ in range(5):
        put("TianJi", Verdict(ok=True, note="artifacts verified"))

    put("wps_configurer", RequestTool("write_namelist", {
        "path": "sim/namelist.input", "values": squall_namelist_values()}))
    put("wps_configurer", FinalResponse("namelist written"))

    put("fnl_processor", RequestTool("sim_preprocess", {
        "namelist": "sim/namelist.input", "input_dir": "inputs", "out": "sim/squall_ic.masd"}))
    put("fnl_processor", FinalResponse("inputs decoded"))

    put("wrf_real_executor", RequestTool("sim_init", {
        "namelist": "sim/namelist.input", "ic": "sim/squall_ic.masd",
        "out": "sim/squall_state0.masd"}))
    put("wrf_real_executor", FinalResponse("initial state built"))

    put("wrf_main_simulator", RequestTool("run_simulation", {
        "namelist": "sim/namelist.input", "state": "sim/squall_state0.masd",
        "out": "sim/squall_run.masd"}))
    put("wrf_main_simulator", FinalResponse("integration finished"))

    put("trajectory_analyzer", RequestTool("track_feature", {
        "source": "sim/squall_run.masd", "var": "PSFC", "mode": "min",
        "out": "analysis/squall_track.csv", "save_as": "track"}))
    put("trajectory_analyzer", RequestTool("ingest_tensor", {
        "path": "sim/squall_run.masd", "var": ["RAINC", "RAINNC"], "time": 10,
        "save_as": "rain"}))
    put("trajectory_analyzer", RequestTool("transform_tensor", {
        "inputs": ["$rain.RAINC", "$rain.RAINNC"], "op": "sum_pair", "save_as": "total"}))
    put("trajectory_analyzer", RequestTool("plot_spatial_map", {
        "tensor": "$total", "out": "plots/squall_rain.svg",
        "colormap": "sequential-precip",
        "title": "Squall-line accumulated rainfall (mm)",
        "overlays": [{"trajectory": "$track.trajectory", "label": "surface low"}]}))
    put("trajectory_analyzer", FinalResponse(
        "Surface low tracked and accumulated rainfall mapped."))

    return ScenarioScript(name="squall-complex", seed=7, entries=entries)


def typhoon_subtask_plan() -> list:
    return [
        {"id": 1, "description": "configure the typhoon namelist",
         "worker_spec": "namelist_configurer", "depends_on": [],
         "artifacts": ["sim/namelist.input"]},
        {"id": 2, "description": "preprocess inputs and build the warm-SST variant",
         "worker_spec": "wps_preprocessor", "depends_on": [1],
         "artifacts": ["sim/ty_ic.masd", "sim/ty_ic_warm.masd"]},
        {"id": 3, "description": "initialize the control and warm states",
         "worker_spec": "wrf_real_executor", "depends_on": [2],
         "artifacts": ["sim/ty_state0.masd", "sim/ty_state0_warm.masd"]},
        {"id": 4, "description": "integrate the control run",
         "worker_spec": "wrf_main_simulator", "depends_on": [3],
         "artifacts": ["sim/ty_ctrl.masd"]},
        {"id": 5, "description": "integrate the warm-SST run",
         "worker_spec": "wrf_main_simulator", "depends_on": [3],
         "artifacts": ["sim/ty_warm.masd"]},
        {"id": 6, "description": "compare tracks and intensity between the runs",
         "worker_spec": "trajectory_analyzer", "depends_on": [4, 5],
         "artifacts": ["analysis/ty_track_ctrl.csv", "analysis/ty_track_warm.csv",
                       "plots/typhoon_intensity_compare.svg", "plots/typhoon_tracks.svg"]},
    ]


def typhoon_complex_scenario() -> ScenarioScript:
    entries = {}
    steps = {}

    def put(agent, output):
        s = steps.get(agent, 0)
        steps[agent] = s + 1
        entries[(agent, s)] = output

    put("TianJi", PlanRoadmap(subtasks=typhoon_subtask_plan()))
    for _ in range(6):
        put("TianJi", Verdict(ok=True, note="artifacts verified"))

    put("namelist_configurer", RequestTool("write_namelist", {
        "path": "sim/namelist.input", "values": typhoon_namelist_values()}))
    put("namelist_configurer", FinalResponse("namelist written"))

    put("wps_preprocessor", RequestTool("sim_preprocess", {
        "namelist": "sim/namelist.input", "input_dir": "inputs", "out": "sim/ty_ic.masd"}))
    put("wps_preprocessor", RequestTool("perturb_field", {
        "src": "sim/ty_ic.masd", "var": "SKINTEMP", "op": "add", "value": 2.0,
        "out": "sim/ty_ic_warm.masd"}))
    put("wps_preprocessor", FinalResponse("control and warm initial conditions ready"))

    put("wrf_real_executor", RequestTool("sim_init", {
        "namelist": "sim/namelist.input", "ic": "sim/ty_ic.masd",
        "out": "sim/ty_state0.masd"}))
    put("wrf_real_executor", RequestTool("sim_init", {
        "namelist": "sim/namelist.input", "ic": "sim/ty_ic_warm.masd",
        "out": "sim/ty_state0_warm.masd"}))
    put("wrf_real_executor", FinalResponse("both states initialized"))

    put("wrf_main_simulator", RequestTool("run_simulation", {
        "namelist": "sim/namelist.input", "state": "sim/ty_state0.masd",
        "out": "sim/ty_ctrl.masd"}))
    put("wrf_main_simulator", FinalResponse("control run finished"))

    put("wrf_main_simulator.5", RequestTool("run_simulation", {
        "namelist": "sim/namelist.input", "state": "sim/ty_state0_warm.masd",
        "out": "sim/ty_warm.masd"}))
    put("wrf_main_simulator.5", FinalResponse("warm run finished"))

    put("trajectory_analyzer", RequestTool("track_feature", {
        "source": "sim/ty_ctrl.masd", "var": "PSFC", "mode": "min",
        "out": "analysis/ty_track_ctrl.csv", "save_as": "tc"}))
    put("trajectory_analyzer", RequestTool("track_feature", {
        "source": "sim/ty_warm.masd", "var": "PSFC", "mode": "min",
        "out": "analysis/ty_track_warm.csv", "save_as": "tw"}))
    put("trajectory_analyzer", RequestTool("track_compare", {
        "a": "$tc.trajectory", "b": "$tw.trajectory", "save_as": "cmp"}))
    put("trajectory_analyzer", RequestTool("plot_cartesian_chart", {
        "series": [
            {"label": "control", "x": "$tc.trajectory.times", "y": "$tc.trajectory.values"},
            {"label": "+2 K SST", "x": "$tw.trajectory.times", "y": "$tw.trajectory.values"},
        ],
        "out": "plots/typhoon_intensity_compare.svg",
        "title": "Minimum PSFC: control vs +2 K SST",
        "xlabel": "time (s)", "ylabel": "min PSFC (Pa)"}))
    put("trajectory_analyzer", RequestTool("ingest_tensor", {
        "path": "sim/ty_warm.masd", "var": "PSFC", "time": 10, "save_as": "pw"}))
    put("trajectory_analyzer", RequestTool("plot_spatial_map", {
        "tensor": "$pw", "out": "plots/typhoon_tracks.svg",
        "colormap": "diverging-bluered",
        "title": "Final PSFC (+2 K SST) with both center tracks",
        "overlays": [
            {"trajectory": "$tc.trajectory", "label": "control"},
            {"trajectory": "$tw.trajectory", "label": "warm"},
        ]}))
    put("trajectory_analyzer", FinalResponse(
        "Warm-SST run deepens further than control; tracks and intensity compared."))

    return ScenarioScript(name="typhoon-complex", seed=7, entries=entries)


# ---------------------------------------------------------------------------
# Scripted call-count profiles
# ---------------------------------------------------------------------------

CALL_PROFILES = {
    "squall_164": {
        "TianJi": 28, "wps_configurer": 15, "fnl_processor": 23,
        "wrf_real_executor": 38, "wrf_main_simulator": 20, "trajectory_analyzer": 40,
    },
    "typhoon_180": {
        "TianJi": 50, "wps_preprocessor": 42, "wrf_main_simulator": 29,
        "namelist_configurer": 17, "wrf_real_executor": 21, "trajectory_analyzer": 21,
    },
}

_PROFILE_CATEGORIES = {
    "wps_configurer": ("Basic",),
    "namelist_configurer": ("Basic",),
    "fnl_processor": ("PhysicalSimulation",),
    "wps_preprocessor": ("PhysicalSimulation",),
    "wrf_real_executor": ("PhysicalSimulation",),
    "wrf_main_simulator": ("PhysicalSimulation",),
    "trajectory_analyzer": ("TensorAnalysis", "Visualization"),
}

_PROFILE_TOOLS = {
    "Basic": "write_namelist",
    "PhysicalSimulation": "run_simulation",
    "TensorAnalysis": "ingest_tensor",
    "Visualization": "plot_spatial_map",
}


def call_profile_records(profile: str) -> list:
    """A synthetic but invariant-respecting call ledger matching one of the
    pinned per-agent call distributions.

    Planner records are all ReasoningPlanning.  Worker records alternate
    reasoning and tool execution the way a real loop does (each tool call is
    preceded by the consultation that requested it).  Wallclocks tick half a
    second per call.
    """
    counts = CALL_PROFILES[profile]
    tick = iter(range(10 ** 6))
    ledger = CallLedger(clock=lambda: 0.5 * next(tick))
    workers = [a for a in counts if a != "TianJi"]

    ledger.append("TianJi", "ReasoningPlanning")  # the roadmap consultation
    for agent in workers:
        cats = _PROFILE_CATEGORIES[agent]
        for k in range(counts[agent]):
            if k % 2 == 0:
                ledger.append(agent, "ReasoningPlanning")
            else:
                cat = cats[(k // 2) % len(cats)]
                ledger.append(agent, "ToolExec", tool=_PROFILE_TOOLS[cat], category=cat)
        ledger.append("TianJi", "ReasoningPlanning")  # the state-revision verdict
    for _ in range(counts["TianJi"] - 1 - len(workers)):
        ledger.append("TianJi", "ReasoningPlanning")  # re-planning consultations
    return ledger.records()


# ---------------------------------------------------------------------------
# Track comparison fixture
# ---------------------------------------------------------------------------

TRACK_EXTREME_DLAT = -0.3387


def track_pair_fixture():
    """Two 13-point trajectories whose extreme latitude deviation is the
    pinned value at index 8."""
    dlats = [0.0, -0.02, -0.05, -0.09, -0.14, -0.20, -0.26, -0.31,
             TRACK_EXTREME_DLAT, -0.32, -0.28, -0.22, -0.15]

    def point(k, lat, lon):
        return FeaturePoint(time_index=k, t=21600.0 * k, i=k, j=k,
                            lat=lat, lon=lon, value=0.0)

    a = Trajectory([point(k, 18.0 + 0.15 * k, 130.0 - 0.2 * k) for k in range(13)],
                   search_radius_km=300.0, mode="min")
    b = Trajectory([point(k, 18.0 + 0.15 * k + dlats[k], 130.0 - 0.2 * k - 0.01 * k)
                    for k in range(13)],
                   search_radius_km=300.0, mode="min")
    return a, b


# ---------------------------------------------------------------------------
# Materialize everything
# ---------------------------------------------------------------------------

def prepare_workdir(workdir, case: str) -> None:
    """Stage the inputs a case needs under workdir/inputs."""
    workdir = Path(workdir)
    if case == "squall":
        write_squall_inputs(workdir / "inputs")
    elif case == "typhoon":
        write_typhoon_inputs(workdir / "inputs")
    elif case == "analysis":
        (workdir / "inputs").mkdir(parents=True, exist_ok=True)
        write_typhoon_analysis_dataset(workdir / TY_DATASET_REL)
    else:
        raise ValueError("unknown fixture case %r" % case)


def write_all(root) -> dict:
    """Write the corpus, every scenario file, and the goal/request texts.

    Returns {label: path}.  Case inputs are staged separately per workdir via
    prepare_workdir, since they belong to a run rather than to the fixture
    library.
    """
    root = Path(root)
    out = {}
    for p in write_corpus(root / "corpus"):
        out["corpus/%s" % p.name] = p

    scen = root / "scenarios"
    scen.mkdir(parents=True, exist_ok=True)
    scripts = {"tc_debate": debate_scenario(),
               "squall_complex": squall_complex_scenario(),
               "typhoon_complex": typhoon_complex_scenario()}
    for kind in SIMPLE_KINDS:
        scripts["simple_%s" % kind] = simple_scenario(kind)
    for label, script in sorted(scripts.items()):
        p = scen / ("%s.json" % label)
        dump_script(script, p)
        out["scenarios/%s" % p.name] = p

    goals = root / "goals"
    goals.mkdir(parents=True, exist_ok=True)
    texts = {"debate_topic": DEBATE_TOPIC, "squall_goal": SQUALL_GOAL,
             "typhoon_goal": TYPHOON_GOAL}
    for kind in SIMPLE_KINDS:
        texts["simple_%s" % kind] = SIMPLE_REQUESTS[kind]
    for label, text in sorted(texts.items()):
        p = goals / ("%s.txt" % label)
        p.write_text(text + "\n", encoding="utf-8")
        out["goals/%s.txt" % label] = p
    return out
