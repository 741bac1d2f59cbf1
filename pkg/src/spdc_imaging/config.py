"""Experiment configuration files.

The format is line oriented: ``[section]`` headers followed by
``key = value`` lines. ``#`` starts a comment. Every length needs a unit
suffix (``m``, ``cm``, ``mm``, ``um``, ``nm``)::

    [geometry]
    z1 = 34 cm
    z2 = 7 cm
    z = auto          # place the detectors on the image plane
    f = 25 cm         # leave out for the lens-free geometry

    [pump]
    wavelength = 442 nm
    illumination = plane        # or gaussian, with waist = 1 mm

    [object]
    type = double_slit          # or file, with path = mask.txt
    d = 300 um
    a = 100 um

    [grid]
    n = 4096
    dx = auto
    bandlimit = 0.5

    [detection]
    mode = same                 # fixed-signal, fixed-idler, same, opposite
    slit_width = 0.2 mm
    range = 1.2 mm              # scan runs from -range to +range
    steps = 101
    fixed = 0 mm

    [noise]
    enabled = false
    mean_counts = 10000
    seed = 0
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import SCAN_MODES, Experiment, Noise, ScanConfig, auto_dx
from .geometry import ExperimentGeometry
from .grid import Grid, GridError
from .optics import DoubleSlit, OpenMask, TabulatedMask, load_mask
from .pump import Gaussian, PlaneWave, PumpSpec

# decimal exponent of each unit; "34 cm" is read as float("34e-2") so it rounds once
UNITS = {"m": 0, "cm": -2, "mm": -3, "um": -6, "µm": -6, "nm": -9}

LENGTH, INT, FLOAT, BOOL, WORD = "length", "int", "float", "bool", "word"

SCHEMA: dict[str, dict[str, str]] = {
    "geometry": {"z1": LENGTH, "z2": LENGTH, "z": LENGTH, "f": LENGTH},
    "pump": {"wavelength": LENGTH, "illumination": WORD, "waist": LENGTH},
    "object": {"type": WORD, "d": LENGTH, "a": LENGTH, "path": WORD},
    "grid": {"n": INT, "dx": LENGTH, "bandlimit": FLOAT},
    "detection": {
        "mode": WORD,
        "slit_width": LENGTH,
        "range": LENGTH,
        "steps": INT,
        "fixed": LENGTH,
    },
    "noise": {"enabled": BOOL, "mean_counts": FLOAT, "seed": INT},
}

AUTO_OK = {("geometry", "z"), ("grid", "dx")}


class ConfigError(ValueError):
    """A configuration problem, tagged with the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment description.

    ``z_auto`` and ``dx_auto`` remember that those values were derived
    (image plane and sampling rule) so serialisation can say so.
    """

    geometry: ExperimentGeometry
    pump: PumpSpec
    n: int
    dx: float
    bandlimit: float
    mode: str
    slit_width: float
    scan_range: float
    steps: int
    fixed: float
    noise_enabled: bool
    mean_counts: float
    seed: int
    z_auto: bool = False
    dx_auto: bool = True
    mask_path: str | None = None

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.dx)

    @property
    def positions(self) -> np.ndarray:
        return np.linspace(-self.scan_range, self.scan_range, self.steps)

    def experiment(self) -> Experiment:
        return Experiment(self.geometry, self.pump, self.grid, self.bandlimit)

    def scan_config(self, mode: str | None = None) -> ScanConfig:
        noise = Noise(self.mean_counts, self.seed) if self.noise_enabled else None
        return ScanConfig(mode or self.mode, self.positions, self.slit_width, self.fixed, noise)

    def with_overrides(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


def reach(mode: str, scan_range: float, fixed: float, slit_width: float) -> float:
    """Largest |detector position| a scan visits, slit included."""
    far = max(scan_range, abs(fixed)) if mode.startswith("fixed") else scan_range
    return far + slit_width / 2


# ------------------------------------------------------------- parsing

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LENGTH_RE = re.compile(rf"^({_NUMBER})\s*([a-zµ]+)$")


def _convert(kind: str, raw: str, key: str, line: int):
    if kind == LENGTH:
        m = _LENGTH_RE.match(raw)
        if not m:
            if re.fullmatch(_NUMBER, raw):
                raise ConfigError(f"{key} = {raw!r} needs a unit (m, cm, mm, um, nm)", line)
            raise ConfigError(f"cannot read a length from {raw!r} for {key}", line)
        value, unit = m.groups()
        if unit not in UNITS:
            raise ConfigError(f"unknown unit {unit!r} for {key}; use m, cm, mm, um or nm", line)
        if "e" in value.lower():
            return float(value) * 10.0 ** UNITS[unit]
        return float(f"{value}e{UNITS[unit]}")
    if kind == INT:
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}", line) from None
        if value != int(value):
            raise ConfigError(f"{key} must be an integer, got {raw!r}", line)
        return int(value)
    if kind == FLOAT:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {raw!r}", line) from None
    if kind == BOOL:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key} must be true or false, got {raw!r}", line)
    return raw


def _tokenize(text: str) -> dict[tuple[str, str], tuple[object, int]]:
    entries: dict[tuple[str, str], tuple[object, int]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}]; expected one of {sorted(SCHEMA)}", lineno
                )
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in [{section}]; expected one of {sorted(SCHEMA[section])}",
                lineno,
            )
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        if value.lower() == "auto":
            if (section, key) not in AUTO_OK:
                raise ConfigError(f"{key} cannot be 'auto'", lineno)
            entries[(section, key)] = ("auto", lineno)
            continue
        entries[(section, key)] = (_convert(SCHEMA[section][key], value, key, lineno), lineno)
    return entries


def parse_config(text: str, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Parse and validate configuration text; missing values take defaults.

    ``base_dir`` resolves a relative mask ``path``. Errors are raised as
    :class:`ConfigError` naming the line they come from.
    """
    e = _tokenize(text)

    def get(section, key, default=None):
        return e[(section, key)][0] if (section, key) in e else default

    def line(section, key):
        return e[(section, key)][1] if (section, key) in e else None

    for key in ("z1", "z2"):
        if ("geometry", key) not in e:
            raise ConfigError(f"[geometry] needs {key}")

    f = get("geometry", "f")
    if f is not None and f == 0:
        raise ConfigError("ThinLens requires a finite nonzero focal length (f != 0)", line("geometry", "f"))
    for key in ("z1", "z2", "z"):
        v = get("geometry", key)
        if isinstance(v, float) and v <= 0 and not (key == "z2" and v == 0 and f is None):
            raise ConfigError(f"{key} must be positive, got {v} m", line("geometry", key))

    wavelength = get("pump", "wavelength", 442e-9)
    if wavelength <= 0:
        raise ConfigError("wavelength must be positive", line("pump", "wavelength"))
    illum_name = str(get("pump", "illumination", "plane")).lower()
    if illum_name == "plane":
        illumination = PlaneWave()
        if ("pump", "waist") in e:
            raise ConfigError("waist only applies to gaussian illumination", line("pump", "waist"))
    elif illum_name == "gaussian":
        waist = get("pump", "waist")
        if waist is None or waist <= 0:
            raise ConfigError("gaussian illumination needs a positive waist", line("pump", "illumination"))
        illumination = Gaussian(waist)
    else:
        raise ConfigError(f"illumination must be plane or gaussian, got {illum_name!r}", line("pump", "illumination"))

    kind = str(get("object", "type", "double_slit")).lower()
    mask_path = None
    if kind == "double_slit":
        d, a = get("object", "d", 300e-6), get("object", "a", 100e-6)
        try:
            mask = DoubleSlit(d, a)
        except ValueError as exc:
            raise ConfigError(str(exc), line("object", "a") or line("object", "d")) from None
    elif kind == "file":
        mask_path = get("object", "path")
        if mask_path is None:
            raise ConfigError("object type 'file' needs a path", line("object", "type"))
        p = Path(mask_path)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        try:
            mask = load_mask(p)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load mask: {exc}", line("object", "path")) from None
    elif kind == "open":
        mask = OpenMask()
    else:
        raise ConfigError(f"object type must be double_slit, file or open, got {kind!r}", line("object", "type"))
    pump = PumpSpec(wavelength, illumination, mask)

    z1, z2 = get("geometry", "z1"), get("geometry", "z2")
    z = get("geometry", "z", "auto" if f is not None else None)
    z_auto = z == "auto"
    try:
        if z_auto:
            if f is None:
                raise ConfigError("z = auto needs a lens focal length f", line("geometry", "z"))
            geometry = ExperimentGeometry.at_imaging_condition(z1, z2, f, wavelength)
        else:
            if z is None:
                raise ConfigError("[geometry] needs z when there is no lens")
            geometry = ExperimentGeometry(z1, z2, z, f, wavelength)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), line("geometry", "z") or line("geometry", "f")) from None

    mode = str(get("detection", "mode", "same")).lower()
    if mode not in SCAN_MODES:
        raise ConfigError(f"mode must be one of {', '.join(SCAN_MODES)}; got {mode!r}", line("detection", "mode"))
    slit = get("detection", "slit_width", 0.2e-3)
    if slit < 0:
        raise ConfigError("slit_width must be non-negative", line("detection", "slit_width"))
    scan_range = get("detection", "range", 1.2e-3 if f is not None else 6e-3)
    if scan_range <= 0:
        raise ConfigError("range must be positive", line("detection", "range"))
    steps = get("detection", "steps", 101)
    if steps < 2:
        raise ConfigError("steps must be at least 2", line("detection", "steps"))
    fixed = get("detection", "fixed", 0.0)

    n = get("grid", "n", 4096)
    bandlimit = get("grid", "bandlimit", 0.5)
    if not 0 < bandlimit <= 0.5:
        raise ConfigError("bandlimit must lie in (0, 0.5]", line("grid", "bandlimit"))
    dx = get("grid", "dx", "auto")
    dx_auto = dx == "auto"
    far = reach(mode, scan_range, fixed, slit)
    try:
        if dx_auto:
            Grid(n, 1.0)
            dx = auto_dx(geometry, pump, n, far, bandlimit)
        grid = Grid(n, dx)
    except GridError as exc:
        raise ConfigError(str(exc), line("grid", "n") if "n must" in str(exc) else line("grid", "dx")) from None
    if far > grid.span / 8 * (1 + 1e-12):
        raise ConfigError(
            f"scan reaches {far * 1e3:.4g} mm but the guard band allows {grid.span / 8e-3:.4g} mm "
            "(n*dx/8); enlarge n or dx, or shrink the range",
            line("detection", "range") or line("grid", "dx"),
        )

    enabled = get("noise", "enabled", False)
    mean_counts = get("noise", "mean_counts", 1e4)
    if mean_counts <= 0:
        raise ConfigError("mean_counts must be positive", line("noise", "mean_counts"))
    seed = get("noise", "seed", 0)

    return ExperimentConfig(
        geometry=geometry,
        pump=pump,
        n=grid.n,
        dx=grid.dx,
        bandlimit=float(bandlimit),
        mode=mode,
        slit_width=float(slit),
        scan_range=float(scan_range),
        steps=int(steps),
        fixed=float(fixed),
        noise_enabled=bool(enabled),
        mean_counts=float(mean_counts),
        seed=int(seed),
        z_auto=z_auto,
        dx_auto=dx_auto,
        mask_path=mask_path,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


# ------------------------------------------------------------- writing


def _m(value: float) -> str:
    return f"{value!r} m"


def serialize(cfg: ExperimentConfig, resolved: bool = False) -> str:
    """Config text that parses back to ``cfg``.

    Lengths are written in metres with full float precision. With
    ``resolved=True`` derived values (``z``, ``dx``) are written as numbers
    instead of ``auto``, which pins them for later re-runs.
    """
    g, p = cfg.geometry, cfg.pump
    out = ["[geometry]", f"z1 = {_m(g.z1)}", f"z2 = {_m(g.z2)}"]
    out.append("z = auto" if cfg.z_auto and not resolved else f"z = {_m(g.z)}")
    if g.f is not None:
        out.append(f"f = {_m(g.f)}")
    out += ["", "[pump]", f"wavelength = {_m(p.wavelength)}"]
    if isinstance(p.illumination, Gaussian):
        out += ["illumination = gaussian", f"waist = {_m(p.illumination.waist)}"]
    else:
        out.append("illumination = plane")
    out += ["", "[object]"]
    if isinstance(p.mask, DoubleSlit):
        out += ["type = double_slit", f"d = {_m(p.mask.d)}", f"a = {_m(p.mask.a)}"]
    elif isinstance(p.mask, TabulatedMask):
        out += ["type = file", f"path = {cfg.mask_path or p.mask.source}"]
    else:
        out.append("type = open")
    out += [
        "",
        "[grid]",
        f"n = {cfg.n}",
        "dx = auto" if cfg.dx_auto and not resolved else f"dx = {_m(cfg.dx)}",
        f"bandlimit = {cfg.bandlimit!r}",
        "",
        "[detection]",
        f"mode = {cfg.mode}",
        f"slit_width = {_m(cfg.slit_width)}",
        f"range = {_m(cfg.scan_range)}",
        f"steps = {cfg.steps}",
        f"fixed = {_m(cfg.fixed)}",
        "",
        "[noise]",
        f"enabled = {str(cfg.noise_enabled).lower()}",
        f"mean_counts = {cfg.mean_counts!r}",
        f"seed = {cfg.seed}",
    ]
    return "\n".join(out) + "\n"
