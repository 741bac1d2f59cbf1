"""Scan results, finite detector slits and counting noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODES = ("pump", "fixed-signal", "fixed-idler", "same", "opposite")


@dataclass
class ScanResult:
    """Rates along a detector scan.

    ``rates`` are max-normalised unless noise was added, in which case
    they are integer counts stored as floats.
    """

    positions: np.ndarray
    rates: np.ndarray
    mode: str
    normalization: str = "max-normalized"
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.positions.shape != self.rates.shape:
            raise ValueError("positions and rates must have the same shape")
        if np.any(self.rates < 0):
            raise ValueError("rates must be non-negative")


def normalize_max(rates: np.ndarray) -> np.ndarray:
    peak = np.max(rates, initial=0.0)
    return rates / peak if peak > 0 else np.zeros_like(rates)


def gauss_legendre_offsets(width: float, points: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Nodes across ``[-width/2, width/2]`` and weights summing to one."""
    if width == 0:
        return np.zeros(1), np.ones(1)
    t, w = np.polynomial.legendre.leggauss(points)
    return t * width / 2, w / 2


def _cumulative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def _antiderivative(x, y, F, t):
    # exact integral of the piecewise-linear interpolant from x[0] to t
    j = np.clip(np.searchsorted(x, t, side="right") - 1, 0, len(x) - 2)
    h = x[j + 1] - x[j]
    tau = t - x[j]
    return F[j] + y[j] * tau + (y[j + 1] - y[j]) * tau**2 / (2 * h)


def integrate_slit(positions: np.ndarray, profile: np.ndarray, slit_width: float) -> np.ndarray:
    """Average the profile over a top-hat slit of ``slit_width`` centred on each position.

    The profile is treated as piecewise linear and integrated exactly. Near
    the ends of the sampled range the window is clipped to the data.
    """
    if slit_width < 0:
        raise ValueError("slit width must be non-negative")
    x = np.asarray(positions, dtype=float)
    y = np.asarray(profile, dtype=float)
    if slit_width == 0 or x.size < 2:
        return y.copy()
    F = _cumulative(x, y)
    lo = np.clip(x - slit_width / 2, x[0], x[-1])
    hi = np.clip(x + slit_width / 2, x[0], x[-1])
    width = hi - lo
    out = (_antiderivative(x, y, F, hi) - _antiderivative(x, y, F, lo)) / np.where(width > 0, width, 1)
    return np.where(width > 0, out, y)


def dense_path(positions: np.ndarray, slit_width: float, oversample: int = 8):
    """Uniform fine positions covering every slit window around ``positions``.

    Returns ``(dense, index)`` where ``dense[index]`` reproduces the requested
    positions exactly when they are uniformly spaced.
    """
    x = np.asarray(positions, dtype=float)
    if slit_width == 0:
        return x.copy(), np.arange(x.size)
    fine = slit_width / oversample
    if x.size > 1:
        steps = np.diff(x)
        if np.any(steps <= 0):
            raise ValueError("scan positions must be strictly increasing")
        uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0)
    else:
        steps, uniform = np.array([fine]), True
    if uniform:
        h = steps[0] / int(np.ceil(steps[0] / fine))
        pad = int(np.ceil(slit_width / 2 / h))
        count = int(round((x[-1] - x[0]) / h))
        dense = x[0] + h * np.arange(-pad, count + pad + 1)
        index = pad + np.round((x - x[0]) / h).astype(int)
        dense[index] = x
        return dense, index
    h = min(fine, steps.min())
    dense = np.arange(x[0] - slit_width / 2, x[-1] + slit_width / 2 + h, h)
    dense = np.union1d(dense, x)
    return dense, np.searchsorted(dense, x)


def add_poisson_noise(rates: np.ndarray, mean_counts: float, seed: int | None) -> np.ndarray:
    """Replace each rate by a Poisson draw with mean ``rate * mean_counts``."""
    if not mean_counts > 0:
        raise ValueError(f"mean_counts must be positive, got {mean_counts}")
    rng = np.random.default_rng(seed)
    return rng.poisson(np.asarray(rates, dtype=float) * mean_counts).astype(float)
