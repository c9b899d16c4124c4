"""Namelist configuration for MiniAtmos.

Grammar (a small Fortran-namelist dialect)::

    ! comment
    &section
      key = value   ! trailing comment
    /

Sections are &domain, &physics and &run.  Values are integers, floats or
strings (single- or double-quoted; bare words also read as strings).  A
namelist written by write_namelist() always serializes the same way byte for
byte, so editing a key and writing back is idempotent.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import CflViolation, ConfigError, ParseError

EARTH_M_PER_DEG = 111000.0

SECTIONS = ("domain", "physics", "run")

# canonical section layout; order here is the canonical write order
SECTION_KEYS = {
    "domain": [
        "nx", "ny", "ref_lat", "ref_lon", "d_deg", "e_vert",
        "vortex_lat", "vortex_lon", "vortex_amp", "vortex_r_km",
    ],
    "physics": [
        "lsm_scheme", "mp_scheme", "pbl_scheme", "sst_update",
        "f_coriolis", "h_amb", "g", "kappa_drag",
        "q_crit", "tau_precip", "c_evap", "conv_frac",
        "alpha_heat", "tsk_ref", "qv0", "u_bg", "v_bg",
    ],
    "run": ["dt", "n_steps", "output_interval", "prefix"],
}

REQUIRED_KEYS = (
    "nx", "ny", "ref_lat", "ref_lon", "d_deg", "e_vert",
    "dt", "n_steps", "output_interval", "prefix",
    "lsm_scheme", "mp_scheme", "pbl_scheme", "sst_update",
    "f_coriolis", "h_amb", "g", "kappa_drag",
    "q_crit", "tau_precip", "c_evap", "conv_frac",
    "alpha_heat", "tsk_ref",
)

# Physics scheme selectors rebind constant defaults; explicit namelist keys win.
LSM_SCHEMES = {
    "noahmp_toy": {"c_evap": 2.0e-6},
    "slab_toy": {"c_evap": 8.0e-7},
}
MP_SCHEMES = {
    "thompson_toy": {"q_crit": 0.012, "tau_precip": 1800.0, "conv_frac": 0.4},
    "kessler_toy": {"q_crit": 0.010, "tau_precip": 900.0, "conv_frac": 0.6},
}
PBL_SCHEMES = {
    "ysu_toy": {"kappa_drag": 5.0e-4},
    "mynn_toy": {"kappa_drag": 1.0e-3},
}

_OPTIONAL_DEFAULTS = {
    "vortex_lat": None,   # domain centre when unset
    "vortex_lon": None,
    "vortex_amp": 0.0,
    "vortex_r_km": 200.0,
    "qv0": 0.0,
    "u_bg": 0.0,
    "v_bg": 0.0,
}

_KEY_SECTION = {k: s for s, keys in SECTION_KEYS.items() for k in keys}

_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$")


@dataclass
class Namelist:
    values: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def get(self, key, default=None):
        return self.values.get(key, default)

    def copy(self) -> "Namelist":
        return Namelist(dict(self.values))

    @property
    def dx_m(self) -> float:
        return self.values["d_deg"] * EARTH_M_PER_DEG

    def cfl(self) -> float:
        v = self.values
        return v["dt"] * math.sqrt(v["g"] * v["h_amb"]) / self.dx_m

    def validate(self) -> "Namelist":
        v = self.values
        missing = [k for k in REQUIRED_KEYS if k not in v]
        if missing:
            raise ConfigError("namelist missing required keys: %s" % ", ".join(missing))
        if v["nx"] < 4 or v["ny"] < 4:
            raise ConfigError("grid must be at least 4x4, got %dx%d" % (v["nx"], v["ny"]))
        if v["d_deg"] <= 0 or v["dt"] <= 0:
            raise ConfigError("d_deg and dt must be positive")
        if not 0.0 <= v["conv_frac"] <= 1.0:
            raise ConfigError("conv_frac must lie in [0, 1], got %r" % v["conv_frac"])
        if v["sst_update"] not in (0, 1):
            raise ConfigError("sst_update must be 0 or 1, got %r" % v["sst_update"])
        cfl = self.cfl()
        if cfl > 0.5:
            raise CflViolation(
                "gravity-wave CFL %.4f exceeds 0.5 (dt=%g, d_deg=%g)" % (cfl, v["dt"], v["d_deg"])
            )
        return self


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith(("'", '"')) and raw.endswith(raw[0]) and len(raw) >= 2:
        return raw[1:-1]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_namelist_text(text: str, origin: str = "<namelist>") -> dict:
    values: dict = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("!", 1)[0].rstrip()
        if not body.strip():
            continue
        stripped = body.strip()
        if stripped.startswith("&"):
            name = stripped[1:].strip().lower()
            if name not in SECTIONS:
                raise ParseError("%s: line %d: unknown section &%s" % (origin, lineno, name))
            if section is not None:
                raise ParseError("%s: line %d: nested section &%s" % (origin, lineno, name))
            section = name
            continue
        if stripped == "/":
            if section is None:
                raise ParseError("%s: line %d: stray '/' outside a section" % (origin, lineno))
            section = None
            continue
        if section is None:
            raise ParseError("%s: line %d: statement outside any section" % (origin, lineno))
        m = _LINE_RE.match(body)
        if not m:
            raise ParseError("%s: line %d: expected 'key = value'" % (origin, lineno))
        key = m.group(1).lower()
        expected = _KEY_SECTION.get(key)
        if expected is not None and expected != section:
            raise ParseError(
                "%s: line %d: key %s belongs in &%s, found in &%s"
                % (origin, lineno, key, expected, section)
            )
        values[key] = _parse_value(m.group(2))
    if section is not None:
        raise ParseError("%s: unterminated section &%s" % (origin, section))
    return values


def _apply_schemes(values: dict) -> dict:
    out = dict(values)
    for key, table in (("lsm_scheme", LSM_SCHEMES), ("mp_scheme", MP_SCHEMES), ("pbl_scheme", PBL_SCHEMES)):
        name = out.get(key)
        if name is None:
            continue
        if name not in table:
            raise ConfigError("unknown %s %r (known: %s)" % (key, name, ", ".join(sorted(table))))
        for const, default in table[name].items():
            out.setdefault(const, default)
    for key, default in _OPTIONAL_DEFAULTS.items():
        out.setdefault(key, default)
    if out.get("vortex_lat") is None:
        out["vortex_lat"] = out["ref_lat"] + (out["ny"] - 1) * out["d_deg"] / 2.0
    if out.get("vortex_lon") is None:
        out["vortex_lon"] = out["ref_lon"] + (out["nx"] - 1) * out["d_deg"] / 2.0
    return out


def load_namelist(path) -> Namelist:
    """Parse, resolve scheme constants, and validate a namelist file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("namelist not found: %s" % path)
    raw = parse_namelist_text(path.read_text(encoding="utf-8"), origin=str(path))
    return Namelist(_apply_schemes(raw)).validate()


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "1" if val else "0"
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float):
        return repr(val)
    return "'%s'" % val


def namelist_text(values: dict) -> str:
    """Canonical serialization: fixed section order, fixed key order."""
    lines = []
    for section in SECTIONS:
        lines.append("&%s" % section)
        for key in SECTION_KEYS[section]:
            if key in values and values[key] is not None:
                lines.append("  %s = %s" % (key, _format_value(values[key])))
        lines.append("/")
    return "\n".join(lines) + "\n"


def write_namelist(values, path) -> None:
    if isinstance(values, Namelist):
        values = values.values
    Path(path).write_text(namelist_text(values), encoding="utf-8")


def edit_namelist_key(path, key: str, value) -> None:
    """Set one key and rewrite the file canonically.  Idempotent."""
    path = Path(path)
    raw = parse_namelist_text(path.read_text(encoding="utf-8"), origin=str(path))
    raw[str(key).lower()] = value
    write_namelist(raw, path)
