"""MiniAtmos: a deterministic toy atmospheric simulator.

Single-layer shallow water dynamics with bolt-on moisture, precipitation,
skin-temperature and soil-moisture coupling on a doubly periodic lat/lon
grid.  Configured by a Fortran-flavoured namelist, fed by tiny binary input
files plus a variable table, and produces a binary gridded time-series
dataset.  Every run is bit-reproducible for a given configuration.
"""

from .namelist import Namelist, load_namelist, write_namelist, edit_namelist_key
from .gridio import (
    GridDataset,
    read_dataset,
    write_dataset,
    inspect_header,
    read_input_field,
    write_input_field,
)
from .core import GridState, step, run_steps
from .pipeline import preprocess, real_init, run_simulation, perturb_field

__all__ = [
    "Namelist",
    "load_namelist",
    "write_namelist",
    "edit_namelist_key",
    "GridDataset",
    "read_dataset",
    "write_dataset",
    "inspect_header",
    "read_input_field",
    "write_input_field",
    "GridState",
    "step",
    "run_steps",
    "preprocess",
    "real_init",
    "run_simulation",
    "perturb_field",
]
