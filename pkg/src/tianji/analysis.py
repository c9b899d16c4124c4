"""Spatiotemporal tensor analysis bus.

Tensors are float64 arrays with named dims drawn from {time, y, x} plus
lat/lon/time coordinates.  All distances use a fixed equirectangular model of
111 km per degree in both axes, matching the simulator's meters-per-degree
constant, and extremum ties always break toward the smallest row-major linear
index so results are reproducible.

Every operation is a pure function; the test suite holds these to exact
(bit-level) agreement with brute-force oracles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllMasked,
    EmptyBinSetOnly,
    EmptyIntersection,
    EmptyTensor,
    LostFeature,
    OutOfBounds,
    ShapeMismatch,
    TimeAxisMismatch,
    UnknownVariable,
)
from .minisim.gridio import GridDataset, inspect_header, read_dataset

KM_PER_DEG = 111.0
M_PER_DEG = 111000.0

MASK_SENTINEL = np.nan


@dataclass
class Tensor:
    values: np.ndarray
    dims: list                      # [(name, length), ...]
    time: list = field(default_factory=list)   # seconds, empty for 2D
    lat: np.ndarray | None = None
    lon: np.ndarray | None = None
    d_deg: float = 1.0
    name: str = ""
    units: str = ""
    mask: np.ndarray | None = None  # True where a cell is kept

    @property
    def dim_names(self):
        return [d[0] for d in self.dims]

    @property
    def is_masked(self) -> bool:
        return self.mask is not None

    def spatial_shape(self):
        return self.values.shape[-2], self.values.shape[-1]

    def frame(self, t_idx: int) -> "Tensor":
        """2D slice at one time index."""
        if "time" not in self.dim_names:
            raise OutOfBounds("tensor has no time dim")
        n = self.values.shape[0]
        if not 0 <= t_idx < n:
            raise OutOfBounds("time index %d outside 0..%d" % (t_idx, n - 1))
        return Tensor(
            values=self.values[t_idx],
            dims=self.dims[1:],
            time=[self.time[t_idx]],
            lat=self.lat,
            lon=self.lon,
            d_deg=self.d_deg,
            name=self.name,
            units=self.units,
            mask=None if self.mask is None else self.mask[t_idx],
        )


@dataclass
class FeaturePoint:
    time_index: int
    t: float
    i: int          # x (column) index
    j: int          # y (row) index
    lat: float
    lon: float
    value: float

    def to_json(self) -> dict:
        return {
            "time_index": self.time_index,
            "t": self.t,
            "i": self.i,
            "j": self.j,
            "lat": self.lat,
            "lon": self.lon,
            "value": self.value,
        }


class Trajectory:
    """Ordered feature points, one per analyzed time."""

    def __init__(self, points, search_radius_km=None, mode=""):
        self.points = list(points)
        self.search_radius_km = search_radius_km
        self.mode = mode

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, k):
        return self.points[k]

    @property
    def times(self):
        return [p.t for p in self.points]

    @property
    def lats(self):
        return [p.lat for p in self.points]

    @property
    def lons(self):
        return [p.lon for p in self.points]

    @property
    def values(self):
        return [p.value for p in self.points]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time_index", "t", "i", "j", "lat", "lon", "value"])
            for p in self.points:
                w.writerow([p.time_index, p.t, p.i, p.j, p.lat, p.lon, p.value])


# same properties for a per-time extremum listing, so chart specs can
# reference .times/.values off either
FeatureSeries = Trajectory


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------

def inspect_dataset(path) -> dict:
    """Header metadata without loading arrays."""
    meta = inspect_header(path)
    times = meta["times"]
    return {
        "vars": meta["variables"],
        "dims": {"time": meta["n_times"], "y": meta["ny"], "x": meta["nx"]},
        "time_range": [times[0], times[-1]] if times else [],
        "grid": {
            "ref_lat": meta["ref_lat"],
            "ref_lon": meta["ref_lon"],
            "d_deg": meta["d_deg"],
        },
        "levels": meta["levels"],
        "comment": meta["comment"],
    }


def _resolve_slice(sel, n, axis_name):
    """None = everything; int = single index; [a, b] = half-open range."""
    if sel is None:
        return slice(0, n), False
    if isinstance(sel, int):
        if not -n <= sel < n:
            raise OutOfBounds("%s index %d outside 0..%d" % (axis_name, sel, n - 1))
        return sel % n, True
    if isinstance(sel, (list, tuple)) and len(sel) == 2:
        a, b = int(sel[0]), int(sel[1])
        if not (0 <= a < b <= n):
            raise OutOfBounds("%s range [%d, %d) outside 0..%d" % (axis_name, a, b, n))
        return slice(a, b), False
    raise OutOfBounds("bad %s selector %r" % (axis_name, sel))


def tensor_from_dataset(ds: GridDataset, var: str, time_sel=None, region=None) -> Tensor:
    if var not in ds.data:
        raise UnknownVariable("dataset has no variable %r" % var)
    region = region or {}
    t_idx, t_scalar = _resolve_slice(time_sel, len(ds.times), "time")
    y_idx, y_scalar = _resolve_slice(region.get("y"), ds.ny, "y")
    x_idx, x_scalar = _resolve_slice(region.get("x"), ds.nx, "x")
    if y_scalar or x_scalar:
        raise OutOfBounds("region selectors must be ranges, not single indices")
    values = ds.data[var][t_idx, y_idx, x_idx].astype(np.float64, copy=True)
    lat = ds.lat_axis()[y_idx]
    lon = ds.lon_axis()[x_idx]
    if t_scalar:
        dims = [("y", values.shape[0]), ("x", values.shape[1])]
        times = [ds.times[t_idx]]
    else:
        dims = [("time", values.shape[0]), ("y", values.shape[1]), ("x", values.shape[2])]
        times = list(np.asarray(ds.times)[t_idx])
    return Tensor(
        values=values,
        dims=dims,
        time=times,
        lat=lat,
        lon=lon,
        d_deg=ds.d_deg,
        name=var,
        units=ds.units_of(var),
    )


def ingest_tensor(path, var, time_sel=None, region=None):
    """Load one variable (or several, when ``var`` is a list) as Tensor(s).

    A list of names returns a dict name -> Tensor so one ingest call can feed
    two-input transforms like divergence or sum_pair.
    """
    ds = read_dataset(path)
    if isinstance(var, (list, tuple)):
        return {v: tensor_from_dataset(ds, v, time_sel, region) for v in var}
    return tensor_from_dataset(ds, var, time_sel, region)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def _check_same_shape(a: Tensor, b: Tensor, realign: bool):
    """Raise ShapeMismatch on axis disagreement; optionally truncate tails."""
    if a.values.shape == b.values.shape:
        return a, b
    for axis, (da, db) in enumerate(zip(a.dims, b.dims)):
        if da[1] != db[1]:
            if realign:
                return _truncate_pair(a, b, axis, min(da[1], db[1]))
            raise ShapeMismatch(
                "shape mismatch: length %d vs %d on axis %s" % (da[1], db[1], da[0])
            )
    raise ShapeMismatch(
        "shape mismatch: rank %d vs %d" % (a.values.ndim, b.values.ndim)
    )


def _truncate_pair(a: Tensor, b: Tensor, axis: int, n: int):
    def cut(t: Tensor) -> Tensor:
        idx = [slice(None)] * t.values.ndim
        idx[axis] = slice(0, n)
        out = Tensor(
            values=t.values[tuple(idx)],
            dims=[(name, n if k == axis else ln) for k, (name, ln) in enumerate(t.dims)],
            time=t.time[:n] if t.dims[axis][0] == "time" else t.time,
            lat=t.lat[:n] if t.dims[axis][0] == "y" and t.lat is not None else t.lat,
            lon=t.lon[:n] if t.dims[axis][0] == "x" and t.lon is not None else t.lon,
            d_deg=t.d_deg,
            name=t.name,
            units=t.units,
            mask=None if t.mask is None else t.mask[tuple(idx)],
        )
        return out
    return cut(a), cut(b)


def _like(t: Tensor, values, name="", units="") -> Tensor:
    return Tensor(
        values=values,
        dims=[(n, ln) for (n, _), ln in zip(t.dims, values.shape)],
        time=t.time,
        lat=t.lat,
        lon=t.lon,
        d_deg=t.d_deg,
        name=name or t.name,
        units=units or t.units,
        mask=t.mask,
    )


def divergence(u: Tensor, v: Tensor, realign: bool = False) -> Tensor:
    """du/dx + dv/dy with periodic wrap, centred differences, dx = d_deg*111000 m."""
    u, v = _check_same_shape(u, v, realign)
    dx = u.d_deg * M_PER_DEG
    div = (np.roll(u.values, -1, axis=-1) - np.roll(u.values, 1, axis=-1)) / (2.0 * dx) + (
        np.roll(v.values, -1, axis=-2) - np.roll(v.values, 1, axis=-2)
    ) / (2.0 * dx)
    return _like(u, div, name="divergence", units="s-1")


def transform_tensor(inputs, op: str, c: float | None = None, realign: bool = False) -> Tensor:
    """ops: add, scale(c), sum_pair, divergence, magnitude."""
    if op in ("add", "sum_pair"):
        a, b = inputs
        a, b = _check_same_shape(a, b, realign)
        return _like(a, a.values + b.values, name="%s+%s" % (a.name, b.name))
    if op == "scale":
        (a,) = inputs if isinstance(inputs, (list, tuple)) else (inputs,)
        if c is None:
            raise OutOfBounds("scale needs a constant c")
        return _like(a, a.values * float(c))
    if op == "divergence":
        u, v = inputs
        return divergence(u, v, realign=realign)
    if op == "magnitude":
        u, v = inputs
        u, v = _check_same_shape(u, v, realign)
        return _like(u, np.sqrt(u.values**2 + v.values**2), name="magnitude")
    raise OutOfBounds("unknown transform op %r" % op)


# ---------------------------------------------------------------------------
# Feature location and tracking
# ---------------------------------------------------------------------------

def _masked_for_search(values, mask, mode):
    if mask is None:
        return values
    fill = np.inf if mode == "min" else -np.inf
    return np.where(mask, values, fill)


def _locate2d(values2d, mask2d, mode, lat, lon, t_idx, t) -> FeaturePoint:
    if values2d.size == 0:
        raise EmptyTensor("cannot locate features in an empty tensor")
    search = _masked_for_search(values2d, mask2d, mode)
    if mask2d is not None and not mask2d.any():
        raise AllMasked("every cell is masked")
    flat = int(np.argmin(search) if mode == "min" else np.argmax(search))
    ny, nx = values2d.shape
    j, i = divmod(flat, nx)
    return FeaturePoint(
        time_index=t_idx,
        t=float(t),
        i=i,
        j=j,
        lat=float(lat[j]) if lat is not None else float(j),
        lon=float(lon[i]) if lon is not None else float(i),
        value=float(values2d[j, i]),
    )


def locate_feature(tensor: Tensor, mode: str):
    """Extremum cell; 3D input returns one FeaturePoint per time."""
    if mode not in ("min", "max"):
        raise OutOfBounds("mode must be 'min' or 'max', got %r" % mode)
    if tensor.values.size == 0:
        raise EmptyTensor("cannot locate features in an empty tensor")
    if tensor.values.ndim == 2:
        t = tensor.time[0] if tensor.time else 0.0
        return _locate2d(tensor.values, tensor.mask, mode, tensor.lat, tensor.lon, 0, t)
    points = []
    for k in range(tensor.values.shape[0]):
        mask_k = None if tensor.mask is None else tensor.mask[k]
        t = tensor.time[k] if tensor.time else float(k)
        points.append(_locate2d(tensor.values[k], mask_k, mode, tensor.lat, tensor.lon, k, t))
    return FeatureSeries(points, mode=mode)


def km_between(lat1, lon1, lat2, lon2):
    return np.sqrt(((lat1 - lat2) * KM_PER_DEG) ** 2 + ((lon1 - lon2) * KM_PER_DEG) ** 2)


def track_feature(source, var: str | None = None, mode: str = "min", search_radius_km: float = 300.0) -> Trajectory:
    """Track an extremum through time.

    t=0 takes the global extremum; later times search only cells within
    search_radius_km of the previous point.  ``source`` is a dataset path, a
    GridDataset, or a 3D Tensor (then ``var`` is ignored).
    """
    if isinstance(source, Tensor):
        tensor = source
    else:
        ds = source if isinstance(source, GridDataset) else read_dataset(source)
        tensor = tensor_from_dataset(ds, var)
    if tensor.values.ndim != 3:
        raise OutOfBounds("tracking needs a (time, y, x) tensor")
    lat2d = np.asarray(tensor.lat)[:, np.newaxis]
    lon2d = np.asarray(tensor.lon)[np.newaxis, :]
    points = []
    prev = None
    for k in range(tensor.values.shape[0]):
        frame = tensor.values[k]
        if prev is None:
            pt = _locate2d(frame, None, mode, tensor.lat, tensor.lon, k, tensor.time[k])
        else:
            near = km_between(lat2d, lon2d, prev.lat, prev.lon) <= search_radius_km
            if not near.any():
                raise LostFeature(
                    "no cell within %.1f km of (%.3f, %.3f) at time index %d"
                    % (search_radius_km, prev.lat, prev.lon, k)
                )
            pt = _locate2d(frame, near, mode, tensor.lat, tensor.lon, k, tensor.time[k])
        points.append(pt)
        prev = pt
    return Trajectory(points, search_radius_km=search_radius_km, mode=mode)


# ---------------------------------------------------------------------------
# Geometry masks and statistics
# ---------------------------------------------------------------------------

def filter_by_geometry(tensor: Tensor, shape: dict) -> Tensor:
    """Mask cells outside a circle or lat/lon box.

    Masked cells become the NaN sentinel in ``values``; the boolean keep-mask
    rides along in ``mask`` so later stats know exactly which cells count.
    """
    lat2d = np.asarray(tensor.lat)[:, np.newaxis]
    lon2d = np.asarray(tensor.lon)[np.newaxis, :]
    if "circle" in shape:
        c = shape["circle"]
        keep2d = km_between(lat2d, lon2d, float(c["lat"]), float(c["lon"])) <= float(c["radius_km"])
    elif "box" in shape:
        b = shape["box"]
        keep2d = (
            (lat2d >= float(b["lat0"]))
            & (lat2d <= float(b["lat1"]))
            & (lon2d >= float(b["lon0"]))
            & (lon2d <= float(b["lon1"]))
        )
    else:
        raise OutOfBounds("shape must contain 'circle' or 'box', got %r" % sorted(shape))
    if not keep2d.any():
        raise EmptyIntersection("geometry selects no cells")
    keep = np.broadcast_to(keep2d, tensor.values.shape).copy()
    if tensor.mask is not None:
        keep &= tensor.mask
        if not keep.any():
            raise EmptyIntersection("geometry selects no unmasked cells")
    values = np.where(keep, tensor.values, MASK_SENTINEL)
    out = _like(tensor, values)
    out.mask = keep
    return out


def area_stat(tensor: Tensor, stat: str) -> float:
    """mean | min | max over unmasked cells."""
    if tensor.mask is None:
        selected = tensor.values.ravel()
    else:
        if not tensor.mask.any():
            raise AllMasked("every cell is masked")
        selected = tensor.values[tensor.mask]
    if selected.size == 0:
        raise AllMasked("no cells to aggregate")
    if stat == "mean":
        return float(np.sum(selected) / selected.size)
    if stat == "min":
        return float(np.min(selected))
    if stat == "max":
        return float(np.max(selected))
    raise OutOfBounds("stat must be mean|min|max, got %r" % stat)


def deficit(masked: Tensor, full: Tensor) -> float:
    """Masked-area mean minus full-domain mean (cold-pool deficit metric)."""
    return area_stat(masked, "mean") - area_stat(full, "mean")


def radial_profile(tensor: Tensor, center, r_max_km: float, n_bins: int):
    """Azimuthal-mean profile: rows of (bin_center_km, mean value).

    ``center`` is a FeaturePoint or a (lat, lon) pair.  Cells at distance
    >= r_max_km are excluded; empty bins are absent from the table.
    """
    if r_max_km <= 0 or n_bins < 1:
        raise OutOfBounds("need r_max_km > 0 and n_bins >= 1")
    if tensor.values.ndim != 2:
        raise OutOfBounds("radial_profile works on a 2D tensor")
    clat, clon = (center.lat, center.lon) if isinstance(center, FeaturePoint) else center
    lat2d = np.asarray(tensor.lat)[:, np.newaxis]
    lon2d = np.asarray(tensor.lon)[np.newaxis, :]
    dist = km_between(lat2d, lon2d, float(clat), float(clon))
    dist = np.broadcast_to(dist, tensor.values.shape)
    width = r_max_km / n_bins
    inside = dist < r_max_km
    if tensor.mask is not None:
        inside = inside & tensor.mask
    if not inside.any():
        raise EmptyBinSetOnly("no cell within %.1f km of (%.3f, %.3f)" % (r_max_km, clat, clon))
    bins = np.floor(dist / width).astype(np.int64)
    rows = []
    for k in range(n_bins):
        sel = inside & (bins == k)
        if not sel.any():
            continue
        vals = tensor.values[sel]
        rows.append(((k + 0.5) * width, float(np.sum(vals) / vals.size)))
    return rows


def write_profile_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center_km", "mean"])
        for r_km, mean in rows:
            w.writerow([r_km, mean])


# ---------------------------------------------------------------------------
# Track comparison
# ---------------------------------------------------------------------------

@dataclass
class TrackComparison:
    rows: list              # [(t, dlat, dlon), ...]
    extreme_dlat: float     # signed, largest |dlat|
    extreme_time: float
    extreme_index: int

    def to_json(self) -> dict:
        return {
            "rows": [list(r) for r in self.rows],
            "extreme_dlat": self.extreme_dlat,
            "extreme_time": self.extreme_time,
            "extreme_index": self.extreme_index,
        }


def track_compare(a: Trajectory, b: Trajectory) -> TrackComparison:
    """Per-time (b − a) offsets plus the signed extreme latitude deviation."""
    if len(a) != len(b) or any(pa.t != pb.t for pa, pb in zip(a, b)):
        raise TimeAxisMismatch("trajectories cover different time axes")
    if len(a) == 0:
        raise EmptyTensor("cannot compare empty trajectories")
    rows = []
    best_idx = 0
    for k, (pa, pb) in enumerate(zip(a, b)):
        dlat = pb.lat - pa.lat
        dlon = pb.lon - pa.lon
        rows.append((pa.t, dlat, dlon))
        if abs(dlat) > abs(rows[best_idx][1]):
            best_idx = k
    return TrackComparison(
        rows=rows,
        extreme_dlat=rows[best_idx][1],
        extreme_time=rows[best_idx][0],
        extreme_index=best_idx,
    )


# ---------------------------------------------------------------------------
# Masked-tensor serialization: dataset container plus a mask bitmap block
# ---------------------------------------------------------------------------

def save_masked_tensor(tensor: Tensor, path) -> None:
    from .minisim.gridio import write_dataset

    if tensor.values.ndim == 2:
        values = tensor.values[np.newaxis]
        mask = None if tensor.mask is None else tensor.mask[np.newaxis]
        times = [tensor.time[0] if tensor.time else 0.0]
    else:
        values = tensor.values
        mask = tensor.mask
        times = list(tensor.time)
    ny, nx = values.shape[-2], values.shape[-1]
    ds = GridDataset(
        nx=nx,
        ny=ny,
        ref_lat=float(tensor.lat[0]) if tensor.lat is not None else 0.0,
        ref_lon=float(tensor.lon[0]) if tensor.lon is not None else 0.0,
        d_deg=tensor.d_deg,
        levels=0,
        variables=[(tensor.name or "FIELD", tensor.units or "1")],
        times=times,
        data={tensor.name or "FIELD": np.nan_to_num(values, nan=0.0) if mask is not None else values},
        comment="masked tensor" if mask is not None else "tensor",
    )
    write_dataset(ds, path)
    if mask is not None:
        bits = np.packbits(mask.astype(np.uint8).ravel())
        with open(path, "ab") as fh:
            fh.write(b"MASK" + len(bits).to_bytes(4, "little") + bits.tobytes())


def load_masked_tensor(path) -> Tensor:
    import struct

    from .minisim.gridio import _HEAD

    raw = open(path, "rb").read()
    mask = None
    core = raw
    tail_at = raw.rfind(b"MASK")
    if tail_at > 0 and tail_at >= _HEAD.size:
        (nbits,) = struct.unpack("<I", raw[tail_at + 4 : tail_at + 8])
        if tail_at + 8 + nbits == len(raw):
            core = raw[:tail_at]
            packed = np.frombuffer(raw[tail_at + 8 :], dtype=np.uint8)
            mask_flat = np.unpackbits(packed)
            mask = mask_flat
    import tempfile

    with tempfile.NamedTemporaryFile(suffix=".masd", delete=False) as fh:
        fh.write(core)
        tmp = fh.name
    ds = read_dataset(tmp)
    import os

    os.unlink(tmp)
    var = ds.var_names[0]
    tensor = tensor_from_dataset(ds, var)
    if mask is not None:
        m = mask[: tensor.values.size].reshape(tensor.values.shape).astype(bool)
        tensor.mask = m
        tensor.values = np.where(m, tensor.values, MASK_SENTINEL)
    return tensor
