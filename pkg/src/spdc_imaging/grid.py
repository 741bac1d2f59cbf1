"""Uniform 1D sampling and a continuous-calibrated Fourier transform.

Conventions used throughout the package::

    V(q) = integral f(x) exp(-i q x) dx
    f(x) = (1 / 2 pi) integral V(q) exp(+i q x) dq

Both axes are centred: ``x_j = (j - n/2) dx`` and ``q_j = (j - n/2) dq`` with
``dq = 2 pi / (n dx)``. Lengths are metres, wavenumbers rad/m.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Domain = Literal["position", "momentum"]


class GridError(ValueError):
    """Invalid grid parameters or incompatible grids."""


class DomainError(ValueError):
    """A field was passed in the wrong domain."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Symmetric uniform grid of ``n`` samples spaced ``dx`` apart."""

    n: int
    dx: float

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise GridError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < 8 or not _is_power_of_two(self.n):
            raise GridError(f"n must be a power of two >= 8, got {self.n}")
        if not np.isfinite(self.dx) or self.dx <= 0:
            raise GridError(f"dx must be positive, got {self.dx}")
        object.__setattr__(self, "dx", float(self.dx))

    @property
    def dq(self) -> float:
        return 2 * np.pi / (self.n * self.dx)

    @property
    def span(self) -> float:
        """Period of the grid, ``n * dx``."""
        return self.n * self.dx

    @property
    def q_max(self) -> float:
        """Nyquist wavenumber ``pi / dx``."""
        return np.pi / self.dx

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    @property
    def q(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dq

    def compatible(self, other: Grid) -> bool:
        return self.n == other.n and np.isclose(self.dx, other.dx, rtol=1e-12, atol=0)


def make_grid(n: int, dx: float) -> Grid:
    """Build a :class:`Grid`; raises :class:`GridError` on bad input."""
    return Grid(n, dx)


@dataclass(frozen=True)
class SampledField:
    """Complex amplitude on a grid, tagged with its domain and wavenumber.

    ``k`` is the wavenumber of the light the field describes; it may be
    ``None`` for purely mathematical fields that are never propagated.
    """

    grid: Grid
    values: np.ndarray
    domain: Domain = "position"
    k: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise GridError(
                f"values must have shape ({self.grid.n},), got {values.shape}"
            )
        if self.domain not in ("position", "momentum"):
            raise DomainError(f"unknown domain {self.domain!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def axis(self) -> np.ndarray:
        return self.grid.x if self.domain == "position" else self.grid.q

    def with_values(self, values: np.ndarray, **changes) -> SampledField:
        kw = dict(grid=self.grid, values=values, domain=self.domain, k=self.k, meta=self.meta)
        kw.update(changes)
        return SampledField(**kw)

    def energy(self) -> float:
        """Parseval-normalised energy, identical in both domains."""
        w = self.grid.dx if self.domain == "position" else self.grid.dq / (2 * np.pi)
        return float(np.sum(np.abs(self.values) ** 2) * w)


def _require(f: SampledField, domain: Domain) -> None:
    if f.domain != domain:
        raise DomainError(f"expected a {domain}-domain field, got {f.domain}")


def forward_spectrum(f: SampledField) -> SampledField:
    """Centred DFT scaled by ``dx`` so it approximates the continuous transform."""
    _require(f, "position")
    v = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(f.values))) * f.grid.dx
    return f.with_values(v, domain="momentum")


def inverse_spectrum(V: SampledField) -> SampledField:
    """Inverse of :func:`forward_spectrum`."""
    _require(V, "momentum")
    v = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(V.values))) / V.grid.dx
    return V.with_values(v, domain="position")


def evaluate_spectrum(V: SampledField, x: np.ndarray) -> np.ndarray:
    """Evaluate ``(1/2pi) sum_q V(q) exp(i q x) dq`` at arbitrary positions.

    This is the band-limited (trigonometric) interpolant of
    ``inverse_spectrum(V)``; on grid points the two agree to rounding.
    """
    _require(V, "momentum")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phase = np.exp(1j * np.outer(x, V.grid.q))
    return phase @ V.values * (V.grid.dq / (2 * np.pi))
