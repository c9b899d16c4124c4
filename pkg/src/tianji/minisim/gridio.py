"""Binary gridded formats.

GridDataset container (magic ``MASD``, all little-endian)::

    magic      4s   'MASD'
    version    u32  currently 1
    nx, ny     u32  grid size
    ref_lat    f64  latitude of cell (j=0)
    ref_lon    f64  longitude of cell (i=0)
    d_deg      f64  grid spacing in degrees
    levels     u32  vertical level count carried through from the inputs
    n_vars     u32
    n_times    u32
    comment    u32 length + utf-8 bytes (provenance notes)
    var table  n_vars x (u32 len + name, u32 len + units)
    blocks     n_times x (f64 time, then n_vars arrays of ny*nx f64, row-major)

Input fields (magic ``MINP``) carry one 2-D array each behind a 16-byte
header {magic, levels u32, nx u32, ny u32}; a plain-text variable table file
maps input file suffixes to variable names and units.

Readers validate the magic, the version, and that the file length matches the
header arithmetic exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import BadMagic, ParseError, TruncatedFile, UnknownVariable, VersionUnsupported

MAGIC_DATASET = b"MASD"
MAGIC_INPUT = b"MINP"
DATASET_VERSION = 1

_HEAD = struct.Struct("<4sIII d d d III I")  # through comment length


@dataclass
class GridDataset:
    nx: int
    ny: int
    ref_lat: float
    ref_lon: float
    d_deg: float
    levels: int
    variables: list            # [(name, units), ...]
    times: list                # [float, ...] strictly increasing
    data: dict                 # name -> ndarray (n_times, ny, nx)
    comment: str = ""

    @property
    def var_names(self) -> list:
        return [name for name, _ in self.variables]

    def units_of(self, var: str) -> str:
        for name, units in self.variables:
            if name == var:
                return units
        raise UnknownVariable("dataset has no variable %r" % var)

    def lat_axis(self) -> np.ndarray:
        return self.ref_lat + np.arange(self.ny) * self.d_deg

    def lon_axis(self) -> np.ndarray:
        return self.ref_lon + np.arange(self.nx) * self.d_deg

    def validate(self) -> "GridDataset":
        if len(self.times) > 1 and any(
            b <= a for a, b in zip(self.times, self.times[1:])
        ):
            raise ParseError("dataset times must be strictly increasing")
        for name, arr in self.data.items():
            if arr.shape != (len(self.times), self.ny, self.nx):
                raise ParseError(
                    "variable %s has shape %s, expected %s"
                    % (name, arr.shape, (len(self.times), self.ny, self.nx))
                )
        return self


def write_dataset(ds: GridDataset, path) -> None:
    ds.validate()
    comment = ds.comment.encode("utf-8")
    parts = [
        _HEAD.pack(
            MAGIC_DATASET,
            DATASET_VERSION,
            ds.nx,
            ds.ny,
            ds.ref_lat,
            ds.ref_lon,
            ds.d_deg,
            ds.levels,
            len(ds.variables),
            len(ds.times),
            len(comment),
        ),
        comment,
    ]
    for name, units in ds.variables:
        nb, ub = name.encode("utf-8"), units.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)) + nb + struct.pack("<I", len(ub)) + ub)
    for t_idx, t in enumerate(ds.times):
        parts.append(struct.pack("<d", float(t)))
        for name, _ in ds.variables:
            arr = np.ascontiguousarray(ds.data[name][t_idx], dtype="<f8")
            parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


def _read_exact(buf: bytes, offset: int, n: int, path) -> bytes:
    if offset + n > len(buf):
        raise TruncatedFile("%s: truncated at byte %d" % (path, len(buf)))
    return buf[offset : offset + n]


def _parse_header(buf: bytes, path):
    head = _read_exact(buf, 0, _HEAD.size, path)
    (magic, version, nx, ny, ref_lat, ref_lon, d_deg, levels, n_vars, n_times, clen) = _HEAD.unpack(head)
    if magic != MAGIC_DATASET:
        raise BadMagic("%s: bad magic %r (expected %r)" % (path, magic, MAGIC_DATASET))
    if version != DATASET_VERSION:
        raise VersionUnsupported("%s: dataset version %d unsupported" % (path, version))
    pos = _HEAD.size
    comment = _read_exact(buf, pos, clen, path).decode("utf-8")
    pos += clen
    variables = []
    for _ in range(n_vars):
        (ln,) = struct.unpack("<I", _read_exact(buf, pos, 4, path))
        pos += 4
        name = _read_exact(buf, pos, ln, path).decode("utf-8")
        pos += ln
        (lu,) = struct.unpack("<I", _read_exact(buf, pos, 4, path))
        pos += 4
        units = _read_exact(buf, pos, lu, path).decode("utf-8")
        pos += lu
        variables.append((name, units))
    meta = {
        "nx": nx,
        "ny": ny,
        "ref_lat": ref_lat,
        "ref_lon": ref_lon,
        "d_deg": d_deg,
        "levels": levels,
        "n_vars": n_vars,
        "n_times": n_times,
        "comment": comment,
        "variables": variables,
    }
    return meta, pos


def inspect_header(path) -> dict:
    """Read dataset metadata without loading any field data."""
    path = Path(path)
    buf = path.read_bytes()
    meta, pos = _parse_header(buf, path)
    expected = pos + meta["n_times"] * (8 + meta["n_vars"] * meta["ny"] * meta["nx"] * 8)
    if len(buf) != expected:
        raise TruncatedFile(
            "%s: file length %d does not match header arithmetic %d" % (path, len(buf), expected)
        )
    times = []
    block = 8 + meta["n_vars"] * meta["ny"] * meta["nx"] * 8
    for k in range(meta["n_times"]):
        (t,) = struct.unpack("<d", buf[pos + k * block : pos + k * block + 8])
        times.append(t)
    meta["times"] = times
    return meta


def read_dataset(path) -> GridDataset:
    path = Path(path)
    buf = path.read_bytes()
    meta, pos = _parse_header(buf, path)
    nx, ny, n_vars, n_times = meta["nx"], meta["ny"], meta["n_vars"], meta["n_times"]
    expected = pos + n_times * (8 + n_vars * ny * nx * 8)
    if len(buf) != expected:
        raise TruncatedFile(
            "%s: file length %d does not match header arithmetic %d" % (path, len(buf), expected)
        )
    times = []
    data = {name: np.empty((n_times, ny, nx), dtype=np.float64) for name, _ in meta["variables"]}
    for t_idx in range(n_times):
        (t,) = struct.unpack("<d", buf[pos : pos + 8])
        pos += 8
        times.append(t)
        for name, _ in meta["variables"]:
            n = ny * nx * 8
            arr = np.frombuffer(buf[pos : pos + n], dtype="<f8").reshape(ny, nx)
            data[name][t_idx] = arr
            pos += n
    return GridDataset(
        nx=nx,
        ny=ny,
        ref_lat=meta["ref_lat"],
        ref_lon=meta["ref_lon"],
        d_deg=meta["d_deg"],
        levels=meta["levels"],
        variables=meta["variables"],
        times=times,
        data=data,
        comment=meta["comment"],
    ).validate()


# ---------------------------------------------------------------------------
# Input fields and the variable table
# ---------------------------------------------------------------------------

_INPUT_HEAD = struct.Struct("<4sIII")


def write_input_field(path, field2d, levels: int) -> None:
    arr = np.ascontiguousarray(field2d, dtype="<f8")
    ny, nx = arr.shape
    Path(path).write_bytes(_INPUT_HEAD.pack(MAGIC_INPUT, levels, nx, ny) + arr.tobytes())


def read_input_field(path):
    """Returns (array(ny, nx), levels)."""
    path = Path(path)
    buf = path.read_bytes()
    if len(buf) < _INPUT_HEAD.size:
        raise TruncatedFile("%s: shorter than the 16-byte header" % path)
    magic, levels, nx, ny = _INPUT_HEAD.unpack(buf[: _INPUT_HEAD.size])
    if magic != MAGIC_INPUT:
        raise BadMagic("%s: bad magic %r (expected %r)" % (path, magic, MAGIC_INPUT))
    expected = _INPUT_HEAD.size + nx * ny * 8
    if len(buf) != expected:
        raise TruncatedFile(
            "%s: file length %d does not match header arithmetic %d" % (path, len(buf), expected)
        )
    arr = np.frombuffer(buf[_INPUT_HEAD.size :], dtype="<f8").reshape(ny, nx)
    return arr.copy(), levels


def write_vtable(path, rows) -> None:
    """rows: iterable of (suffix, name, units), suffix like '000'."""
    lines = ["# suffix  variable  units"]
    for suffix, name, units in rows:
        lines.append("%s  %s  %s" % (suffix, name, units))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vtable(path) -> dict:
    """Returns {suffix: (name, units)}."""
    path = Path(path)
    table = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise ParseError("%s: line %d: expected 'suffix name units'" % (path, lineno))
        table[parts[0]] = (parts[1], parts[2])
    return table
