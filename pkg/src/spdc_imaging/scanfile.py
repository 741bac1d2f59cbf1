"""Two-column scan files with a commented header.

Layout::

    # spdc-imaging scan
    # version: 0.1.0
    # created: 2026-01-01T00:00:00Z
    # mode: same
    # normalization: max-normalized
    # meta.window_leakage: 1.2e-15
    # config: [geometry]
    # config: z1 = 0.34 m
    # ...
    # columns: position_mm rate
    -1.2 0.0132...

The ``config:`` lines hold the fully resolved configuration, so feeding
them back to :func:`~spdc_imaging.config.parse_config` reproduces the run.
``created`` follows ``SOURCE_DATE_EPOCH`` when it is set, which makes
repeated runs byte-identical.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .detection import ScanResult

MAGIC = "# spdc-imaging scan"


class ScanFileError(ValueError):
    pass


def timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_scan(result: ScanResult, config_text: str = "", created: str | None = None) -> str:
    x, y = result.positions, result.rates
    if np.any(np.diff(x) <= 0):
        raise ScanFileError("scan positions must be strictly increasing")
    if np.any(y < 0):
        raise ScanFileError("rates must be non-negative")
    lines = [
        MAGIC,
        f"# version: {__version__}",
        f"# created: {created or timestamp()}",
        f"# mode: {result.mode}",
        f"# normalization: {result.normalization}",
    ]
    for key in sorted(result.meta):
        lines.append(f"# meta.{key}: {_fmt(result.meta[key])}")
    for key in sorted(result.config):
        lines.append(f"# scan.{key}: {_fmt(result.config[key])}")
    lines += [f"# config: {ln}" if ln else "# config:" for ln in config_text.splitlines()]
    lines.append("# columns: position_mm rate")
    lines += [f"{p * 1e3!r} {r!r}" for p, r in zip(x.tolist(), y.tolist())]
    return "\n".join(lines) + "\n"


def write_scan(path: str | Path, result: ScanResult, config_text: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_scan(result, config_text))
    return path


@dataclass
class ScanFile:
    positions: np.ndarray
    rates: np.ndarray
    header: dict = field(default_factory=dict)
    config_text: str = ""

    def to_result(self) -> ScanResult:
        return ScanResult(
            self.positions,
            self.rates,
            self.header.get("mode", "unknown"),
            self.header.get("normalization", ""),
        )


def read_scan(path: str | Path) -> ScanFile:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise ScanFileError(f"{path}: not a scan file (missing {MAGIC!r} line)")
    header: dict[str, str] = {}
    config: list[str] = []
    rows = []
    for n, ln in enumerate(lines[1:], start=2):
        if ln.startswith("# config:"):
            config.append(ln[len("# config:"):].removeprefix(" "))
        elif ln.startswith("#"):
            key, _, value = ln[1:].partition(":")
            header[key.strip()] = value.strip()
        elif ln.strip():
            parts = ln.split()
            if len(parts) != 2:
                raise ScanFileError(f"{path}:{n}: expected two columns")
            rows.append((float(parts[0]), float(parts[1])))
    data = np.array(rows, dtype=float).reshape(-1, 2)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ScanFileError(f"{path}: positions are not strictly increasing")
    if np.any(data[:, 1] < 0):
        raise ScanFileError(f"{path}: negative rate")
    return ScanFile(data[:, 0] * 1e-3, data[:, 1], header, "\n".join(config) + "\n")
