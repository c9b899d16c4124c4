"""Deterministic SVG rendering, no plotting dependencies.

Two entry points: plot_spatial_map draws one grid cell per data cell with a
9-stop colormap, optional trajectory/star/rect overlays, 1-degree gridlines
and a 5-tick colorbar; plot_cartesian_chart draws line series with optional
point markers and text annotations.  All numbers are formatted with a fixed
locale-independent "%.6g" so the same inputs always produce the same bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptySeries, EmptyTensor, UnknownColormap

# 9 stops each, linearly interpolated in RGB space.
COLORMAPS = {
    "diverging-bluered": [
        (5, 48, 97),
        (33, 102, 172),
        (103, 169, 207),
        (209, 229, 240),
        (247, 247, 247),
        (253, 219, 199),
        (239, 138, 98),
        (178, 24, 43),
        (103, 0, 31),
    ],
    "sequential-precip": [
        (255, 255, 255),
        (237, 248, 251),
        (204, 236, 230),
        (153, 216, 201),
        (102, 194, 164),
        (65, 174, 118),
        (35, 139, 69),
        (0, 109, 44),
        (0, 68, 27),
    ],
    "sequential-gray": [
        (255, 255, 255),
        (223, 223, 223),
        (191, 191, 191),
        (159, 159, 159),
        (127, 127, 127),
        (95, 95, 95),
        (63, 63, 63),
        (31, 31, 31),
        (0, 0, 0),
    ],
}

CELL_PX = 12
MARGIN = 56
CBAR_W = 18
CBAR_GAP = 24


def fmt(x) -> str:
    """Locale-independent %.6g with integral floats kept short."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    s = "%.6g" % float(x)
    return s


def color_at(name: str, frac: float) -> str:
    """Interpolate the 9-stop map at frac in [0, 1], returning #rrggbb."""
    if name not in COLORMAPS:
        raise UnknownColormap("no colormap named %r" % name)
    stops = COLORMAPS[name]
    f = min(max(float(frac), 0.0), 1.0)
    pos = f * (len(stops) - 1)
    k = min(int(pos), len(stops) - 2)
    w = pos - k
    r0, g0, b0 = stops[k]
    r1, g1, b1 = stops[k + 1]
    r = round(r0 + (r1 - r0) * w)
    g = round(g0 + (g1 - g0) * w)
    b = round(b0 + (b1 - b0) * w)
    return "#%02x%02x%02x" % (r, g, b)


def _norm(values, vmin, vmax, diverging):
    if diverging:
        # centre the map on zero so vanishing values hit the middle stop
        bound = max(abs(vmin), abs(vmax))
        if bound == 0.0:
            return np.full_like(values, 0.5, dtype=np.float64)
        return (values + bound) / (2.0 * bound)
    if vmax == vmin:
        return np.full_like(values, 0.5, dtype=np.float64)
    return (values - vmin) / (vmax - vmin)


class _Svg:
    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.parts = [
            '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
            'viewBox="0 0 %d %d">' % (width, height, width, height)
        ]

    def add(self, s):
        self.parts.append(s)

    def rect(self, x, y, w, h, fill, cls=None, stroke=None):
        attrs = 'x="%s" y="%s" width="%s" height="%s" fill="%s"' % (
            fmt(x), fmt(y), fmt(w), fmt(h), fill,
        )
        if cls:
            attrs += ' class="%s"' % cls
        if stroke:
            attrs += ' stroke="%s" stroke-width="1"' % stroke
        self.add("<rect %s/>" % attrs)

    def line(self, x1, y1, x2, y2, stroke, width=1, dash=None):
        attrs = 'x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" stroke-width="%s"' % (
            fmt(x1), fmt(y1), fmt(x2), fmt(y2), stroke, fmt(width),
        )
        if dash:
            attrs += ' stroke-dasharray="%s"' % dash
        self.add("<line %s/>" % attrs)

    def polyline(self, pts, stroke, width=2, cls=None):
        body = " ".join("%s,%s" % (fmt(x), fmt(y)) for x, y in pts)
        attrs = 'points="%s" fill="none" stroke="%s" stroke-width="%s"' % (body, stroke, fmt(width))
        if cls:
            attrs += ' class="%s"' % cls
        self.add("<polyline %s/>" % attrs)

    def text(self, x, y, s, size=11, anchor="start", cls=None):
        attrs = 'x="%s" y="%s" font-size="%d" font-family="monospace" text-anchor="%s"' % (
            fmt(x), fmt(y), size, anchor,
        )
        if cls:
            attrs += ' class="%s"' % cls
        self.add("<text %s>%s</text>" % (attrs, _escape(s)))

    def star(self, cx, cy, r, fill, cls=None):
        pts = []
        for k in range(10):
            ang = -np.pi / 2 + k * np.pi / 5
            rad = r if k % 2 == 0 else r * 0.45
            pts.append((cx + rad * np.cos(ang), cy + rad * np.sin(ang)))
        body = " ".join("%s,%s" % (fmt(x), fmt(y)) for x, y in pts)
        attrs = 'points="%s" fill="%s" stroke="black" stroke-width="0.5"' % (body, fill)
        if cls:
            attrs += ' class="%s"' % cls
        self.add("<polygon %s/>" % attrs)

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# Spatial map
# ---------------------------------------------------------------------------

def plot_spatial_map(tensor, path, colormap="diverging-bluered", title="", overlays=None):
    """Render a 2D tensor as an SVG heatmap.

    ``overlays`` is a list of dicts:
      {"trajectory": Trajectory-like with .lats/.lons}    polyline + dots
      {"star": {"lat": .., "lon": ..}, "label": ".."}     star marker
      {"rect": {"lat": .., "lon": .., "half_lat": .., "half_lon": ..}}
    Overlay geometry outside the grid is clipped to the frame, never an error.
    """
    if colormap not in COLORMAPS:
        raise UnknownColormap("no colormap named %r" % colormap)
    values = np.asarray(tensor.values, dtype=np.float64)
    if values.ndim == 3:
        if values.shape[0] != 1:
            raise EmptyTensor("spatial map needs one time level, got %d" % values.shape[0])
        values = values[0]
    if values.size == 0:
        raise EmptyTensor("cannot draw an empty tensor")
    ny, nx = values.shape
    mask = getattr(tensor, "mask", None)
    if mask is not None:
        mask = np.asarray(mask).reshape(values.shape)

    lat = np.asarray(tensor.lat, dtype=np.float64)
    lon = np.asarray(tensor.lon, dtype=np.float64)
    d = float(tensor.d_deg)

    finite = values[mask] if mask is not None else values
    finite = finite[np.isfinite(finite)]
    if finite.size == 0:
        vmin = vmax = 0.0
    else:
        vmin = float(np.min(finite))
        vmax = float(np.max(finite))
    diverging = colormap.startswith("diverging")
    frac = _norm(values, vmin, vmax, diverging)

    plot_w = nx * CELL_PX
    plot_h = ny * CELL_PX
    width = MARGIN + plot_w + CBAR_GAP + CBAR_W + MARGIN
    height = MARGIN + plot_h + MARGIN
    svg = _Svg(width, height)

    def cx(lon_v):
        # clip into the frame so off-grid overlay points stay drawable
        x = MARGIN + ((lon_v - lon[0]) / d + 0.5) * CELL_PX
        return min(max(x, MARGIN), MARGIN + plot_w)

    def cy(lat_v):
        y = MARGIN + plot_h - ((lat_v - lat[0]) / d + 0.5) * CELL_PX
        return min(max(y, MARGIN), MARGIN + plot_h)

    if title:
        svg.text(MARGIN, MARGIN - 20, title, size=13)

    # cells, row j drawn with north upward
    for j in range(ny):
        y = MARGIN + plot_h - (j + 1) * CELL_PX
        for i in range(nx):
            x = MARGIN + i * CELL_PX
            if mask is not None and not mask[j, i]:
                fill = "#ffffff"
            elif not np.isfinite(values[j, i]):
                fill = "#ffffff"
            else:
                fill = color_at(colormap, frac[j, i])
            svg.rect(x, y, CELL_PX, CELL_PX, fill, cls="cell")

    # integer-degree gridlines
    for lon_deg in range(int(np.ceil(lon[0])), int(np.floor(lon[-1])) + 1):
        x = cx(float(lon_deg))
        svg.line(x, MARGIN, x, MARGIN + plot_h, "#888888", width=0.5, dash="2,3")
        svg.text(x, MARGIN + plot_h + 14, "%dE" % lon_deg, size=9, anchor="middle")
    for lat_deg in range(int(np.ceil(lat[0])), int(np.floor(lat[-1])) + 1):
        y = cy(float(lat_deg))
        svg.line(MARGIN, y, MARGIN + plot_w, y, "#888888", width=0.5, dash="2,3")
        svg.text(MARGIN - 4, y + 3, "%dN" % lat_deg, size=9, anchor="end")

    for ov in overlays or []:
        if "trajectory" in ov:
            tr = ov["trajectory"]
            pts = [(cx(lo), cy(la)) for la, lo in zip(tr.lats, tr.lons)]
            svg.polyline(pts, stroke="black", width=2, cls="trajectory")
            for px, py in pts:
                svg.add(
                    '<circle cx="%s" cy="%s" r="2.5" fill="black" class="trackpoint"/>'
                    % (fmt(px), fmt(py))
                )
        if "star" in ov:
            st = ov["star"]
            svg.star(cx(float(st["lon"])), cy(float(st["lat"])), 8, "#ffd700", cls="marker-star")
            if ov.get("label"):
                svg.text(cx(float(st["lon"])) + 10, cy(float(st["lat"])) - 6, ov["label"], size=10)
        if "rect" in ov:
            rc = ov["rect"]
            x0 = cx(float(rc["lon"]) - float(rc["half_lon"]))
            x1 = cx(float(rc["lon"]) + float(rc["half_lon"]))
            y0 = cy(float(rc["lat"]) + float(rc["half_lat"]))
            y1 = cy(float(rc["lat"]) - float(rc["half_lat"]))
            svg.add(
                '<rect x="%s" y="%s" width="%s" height="%s" fill="none" '
                'stroke="black" stroke-width="1.5" stroke-dasharray="6,3" class="region"/>'
                % (fmt(x0), fmt(y0), fmt(x1 - x0), fmt(y1 - y0))
            )
            if ov.get("label"):
                svg.text(x0, y0 - 4, ov["label"], size=10)

    # colorbar with 5 tick labels
    bx = MARGIN + plot_w + CBAR_GAP
    n_seg = 64
    seg_h = plot_h / n_seg
    if diverging:
        bound = max(abs(vmin), abs(vmax))
        lo, hi = -bound, bound
    else:
        lo, hi = vmin, vmax
    for s in range(n_seg):
        f = (s + 0.5) / n_seg
        y = MARGIN + plot_h - (s + 1) * seg_h
        svg.rect(bx, y, CBAR_W, seg_h + 0.5, color_at(colormap, f))
    svg.rect(bx, MARGIN, CBAR_W, plot_h, "none", stroke="black")
    for k in range(5):
        f = k / 4.0
        val = lo + f * (hi - lo)
        y = MARGIN + plot_h - f * plot_h
        svg.line(bx + CBAR_W, y, bx + CBAR_W + 4, y, "black")
        svg.text(bx + CBAR_W + 6, y + 3, fmt(val), size=9)

    name = getattr(tensor, "name", "")
    units = getattr(tensor, "units", "")
    if name or units:
        svg.text(bx, MARGIN - 8, ("%s (%s)" % (name, units)).strip(), size=10)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg.render())
    return path


# ---------------------------------------------------------------------------
# Cartesian chart
# ---------------------------------------------------------------------------

def plot_cartesian_chart(series, path, title="", xlabel="", ylabel="", markers=None, width=640, height=400):
    """Line chart of one or more series.

    series: [{"label": str, "x": [...], "y": [...], "color": "#hex"?}, ...]
    markers: [{"kind": "star"|"dot"|"vline", "x": .., "y": ..?, "label": ..?}]
    Raises EmptySeries when no series has at least one point.
    """
    series = list(series or [])
    cleaned = []
    for s in series:
        xs = [float(v) for v in s.get("x", [])]
        ys = [float(v) for v in s.get("y", [])]
        if len(xs) != len(ys):
            raise EmptySeries("series %r has %d x values but %d y values" % (s.get("label", "?"), len(xs), len(ys)))
        if xs:
            cleaned.append({"label": s.get("label", ""), "x": xs, "y": ys, "color": s.get("color")})
    if not cleaned:
        raise EmptySeries("chart needs at least one non-empty series")

    all_x = [v for s in cleaned for v in s["x"]]
    all_y = [v for s in cleaned for v in s["y"]]
    for m in markers or []:
        if "x" in m and m["x"] is not None:
            all_x.append(float(m["x"]))
        if m.get("y") is not None:
            all_y.append(float(m["y"]))
    xmin, xmax = min(all_x), max(all_x)
    ymin, ymax = min(all_y), max(all_y)
    # 5% padding on each side; degenerate ranges widen to a unit span
    xpad = (xmax - xmin) * 0.05 or 0.5
    ypad = (ymax - ymin) * 0.05 or 0.5
    xmin, xmax = xmin - xpad, xmax + xpad
    ymin, ymax = ymin - ypad, ymax + ypad

    ml, mr, mt, mb = 64, 20, 36, 44
    pw = width - ml - mr
    ph = height - mt - mb

    def px(x):
        return ml + (x - xmin) / (xmax - xmin) * pw

    def py(y):
        return mt + ph - (y - ymin) / (ymax - ymin) * ph

    svg = _Svg(width, height)
    svg.rect(ml, mt, pw, ph, "none", stroke="black")
    if title:
        svg.text(ml, mt - 12, title, size=13)

    for k in range(5):
        f = k / 4.0
        xv = xmin + f * (xmax - xmin)
        yv = ymin + f * (ymax - ymin)
        gx = ml + f * pw
        gy = mt + ph - f * ph
        svg.line(gx, mt, gx, mt + ph, "#dddddd", width=0.5)
        svg.line(ml, gy, ml + pw, gy, "#dddddd", width=0.5)
        svg.text(gx, mt + ph + 16, fmt(xv), size=9, anchor="middle")
        svg.text(ml - 6, gy + 3, fmt(yv), size=9, anchor="end")
    if xlabel:
        svg.text(ml + pw / 2, height - 8, xlabel, size=11, anchor="middle")
    if ylabel:
        svg.text(14, mt - 12, ylabel, size=11)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    for idx, s in enumerate(cleaned):
        color = s["color"] or palette[idx % len(palette)]
        pts = [(px(x), py(y)) for x, y in zip(s["x"], s["y"])]
        if len(pts) == 1:
            svg.add('<circle cx="%s" cy="%s" r="3" fill="%s"/>' % (fmt(pts[0][0]), fmt(pts[0][1]), color))
        else:
            svg.polyline(pts, stroke=color, width=1.5, cls="series")
        if s["label"]:
            svg.text(ml + pw - 4, mt + 14 + idx * 14, s["label"], size=10, anchor="end", cls="legend")
            svg.line(ml + pw - 70, mt + 10 + idx * 14, ml + pw - 56, mt + 10 + idx * 14, color, width=2)

    for m in markers or []:
        kind = m.get("kind", "dot")
        if kind == "vline":
            x = px(float(m["x"]))
            svg.line(x, mt, x, mt + ph, "#555555", width=1, dash="4,3")
            if m.get("label"):
                svg.text(x + 4, mt + 12, m["label"], size=10)
        elif kind == "star":
            svg.star(px(float(m["x"])), py(float(m["y"])), 7, "#ffd700", cls="marker-star")
            if m.get("label"):
                svg.text(px(float(m["x"])) + 9, py(float(m["y"])) - 7, m["label"], size=10)
        else:
            svg.add(
                '<circle cx="%s" cy="%s" r="3.5" fill="#d62728" class="marker-dot"/>'
                % (fmt(px(float(m["x"]))), fmt(py(float(m["y"]))))
            )
            if m.get("label"):
                svg.text(px(float(m["x"])) + 6, py(float(m["y"])) - 6, m["label"], size=10)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg.render())
    return path


def plot_bar_chart(labels, values, path, title="", ylabel="", width=560, height=360):
    """Simple vertical bar chart used for per-agent call distributions."""
    labels = list(labels)
    vals = [float(v) for v in values]
    if not vals:
        raise EmptySeries("bar chart needs at least one bar")
    vmax = max(vals) or 1.0
    ml, mr, mt, mb = 56, 20, 36, 64
    pw = width - ml - mr
    ph = height - mt - mb
    bw = pw / len(vals)
    svg = _Svg(width, height)
    svg.rect(ml, mt, pw, ph, "none", stroke="black")
    if title:
        svg.text(ml, mt - 12, title, size=13)
    if ylabel:
        svg.text(14, mt - 12, ylabel, size=11)
    for k in range(5):
        f = k / 4.0
        yv = f * vmax
        gy = mt + ph - f * ph
        svg.line(ml, gy, ml + pw, gy, "#dddddd", width=0.5)
        svg.text(ml - 6, gy + 3, fmt(yv), size=9, anchor="end")
    for idx, (lab, v) in enumerate(zip(labels, vals)):
        h = v / vmax * ph
        x = ml + idx * bw + bw * 0.15
        svg.rect(x, mt + ph - h, bw * 0.7, h, "#1f77b4", cls="bar")
        svg.text(x + bw * 0.35, mt + ph - h - 4, fmt(v), size=9, anchor="middle")
        svg.text(ml + idx * bw + bw / 2, mt + ph + 16, str(lab), size=9, anchor="middle")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg.render())
    return path
