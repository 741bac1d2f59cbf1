"""Pump field after the object, its angular spectrum, and the pump-only scan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detection import ScanResult, dense_path, integrate_slit, normalize_max
from .geometry import ExperimentGeometry
from .grid import Grid, SampledField, forward_spectrum, inverse_spectrum
from .optics import DoubleSlit, Mask, OpenMask, SamplingError, build_arm_kernel, soft_window


@dataclass(frozen=True)
class PlaneWave:
    def __call__(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def describe(self) -> str:
        return "plane"


@dataclass(frozen=True)
class Gaussian:
    """Amplitude ``exp(-x^2 / waist^2)``."""

    waist: float

    def __post_init__(self) -> None:
        if not self.waist > 0:
            raise ValueError("Gaussian waist must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-(x**2) / self.waist**2)

    def describe(self) -> str:
        return f"gaussian waist={self.waist * 1e3:g}mm"


@dataclass(frozen=True)
class PumpSpec:
    wavelength: float = 442e-9
    illumination: PlaneWave | Gaussian = field(default_factory=PlaneWave)
    mask: Mask = field(default_factory=lambda: DoubleSlit(300e-6, 100e-6))

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValueError("pump wavelength must be positive")

    @property
    def k_p(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def k_s(self) -> float:
        return self.k_p / 2

    @property
    def k_i(self) -> float:
        return self.k_p / 2

    @property
    def extent(self) -> float:
        """Half-width of the region where the object transmits light."""
        ext = getattr(self.mask, "extent", np.inf)
        if np.isinf(ext) and isinstance(self.illumination, Gaussian):
            ext = 6 * self.illumination.waist
        return float(ext)


@dataclass(frozen=True)
class PumpSpectrum:
    """Angular spectrum of the pump at the object or at the crystal."""

    V: SampledField
    plane: str
    z1: float = 0.0
    extent: float = np.inf

    def __post_init__(self) -> None:
        if self.V.domain != "momentum":
            raise ValueError("PumpSpectrum holds a momentum-domain field")
        if self.plane not in ("object", "crystal"):
            raise ValueError(f"unknown plane {self.plane!r}")


MIN_SAMPLES_PER_FEATURE = 8


def _render(spec: PumpSpec, x: np.ndarray) -> np.ndarray:
    t = np.asarray(spec.mask(x), dtype=float)
    if np.any(np.abs(t) > 1 + 1e-12):
        raise ValueError("mask amplitude exceeds 1")
    return spec.illumination(x) * t


def object_spectrum(
    spec: PumpSpec, grid: Grid, bandlimit: float = 0.5, oversample: int | None = None
) -> SampledField:
    """Band-limited angular spectrum ``V0`` of the field just after the object.

    The object is rendered on a grid ``oversample`` times finer (chosen so
    the smallest mask feature gets at least eight samples), transformed, and
    the central band ``|q| < bandlimit * q_max`` of the coarse grid is kept
    with a smooth roll-off. Anything the coarse grid cannot hold is removed
    instead of aliasing back.
    """
    if not 0 < bandlimit <= 1:
        raise ValueError("bandlimit must be in (0, 1]")
    feature = getattr(spec.mask, "min_feature", np.inf)
    if oversample is None:
        need = MIN_SAMPLES_PER_FEATURE * grid.dx / feature if np.isfinite(feature) else 1
        oversample = 1 << max(0, int(np.ceil(np.log2(max(need, 1)))))
    if grid.n * oversample > 1 << 23:
        raise SamplingError(
            f"object needs {oversample}x oversampling of a {grid.n}-point grid; use a finer grid"
        )
    fine = Grid(grid.n * oversample, grid.dx / oversample)
    if np.isfinite(feature) and feature / fine.dx < MIN_SAMPLES_PER_FEATURE:
        raise SamplingError(
            f"object feature {feature:g} m has only {feature / fine.dx:.1f} samples "
            f"(need {MIN_SAMPLES_PER_FEATURE}); raise oversample"
        )
    W = SampledField(fine, _render(spec, fine.x), "position", spec.k_p)
    V = forward_spectrum(W).values
    lo = fine.n // 2 - grid.n // 2
    V = V[lo : lo + grid.n] * soft_window(grid.q, bandlimit * grid.q_max)
    return SampledField(grid, V, "momentum", spec.k_p, meta={"extent": spec.extent})


def object_field(
    spec: PumpSpec, grid: Grid, bandlimit: float | None = None, oversample: int | None = None
) -> SampledField:
    """Pump field ``W0`` right after the object.

    With ``bandlimit=None`` this is the pointwise product of illumination and
    mask on the grid, which must resolve every mask feature with eight
    samples. Otherwise it is the band-limited rendering whose spectrum is
    :func:`object_spectrum`.
    """
    if bandlimit is None:
        feature = getattr(spec.mask, "min_feature", np.inf)
        if np.isfinite(feature) and feature / grid.dx < MIN_SAMPLES_PER_FEATURE:
            raise SamplingError(
                f"mask feature {feature:g} m is under-resolved at dx={grid.dx:g} m "
                f"({feature / grid.dx:.1f} samples, need {MIN_SAMPLES_PER_FEATURE})"
            )
        return SampledField(grid, _render(spec, grid.x), "position", spec.k_p,
                            meta={"extent": spec.extent})
    return inverse_spectrum(object_spectrum(spec, grid, bandlimit, oversample))


def _chirp_step(grid: Grid, V: np.ndarray, z: float, k: float, tol: float = 1e-9) -> float:
    mag = np.abs(V)
    idx = np.flatnonzero(mag > tol * mag.max(initial=0.0))
    if idx.size == 0:
        return 0.0
    q_edge = np.max(np.abs(grid.q[idx]))
    return abs(z) * grid.dq * (2 * q_edge - grid.dq) / (2 * k)


def spectrum_at_crystal(W0: SampledField, z1: float, k_p: float | None = None) -> PumpSpectrum:
    """Angular spectrum at the crystal: ``V0(q) exp(-i q^2 z1 / 2 k_p)``.

    ``W0`` may be given in either domain; a momentum-domain input is taken
    to be ``V0`` itself.
    """
    k_p = W0.k if k_p is None else k_p
    if k_p is None:
        raise ValueError("pump wavenumber required")
    V0 = forward_spectrum(W0) if W0.domain == "position" else W0
    g = V0.grid
    step = _chirp_step(g, V0.values, z1, k_p)
    if step >= np.pi:
        lam = 2 * np.pi / k_p
        raise SamplingError(
            f"object-to-crystal chirp aliases (step {step:.3g} rad); need n*dx^2 > "
            f"{lam * z1:.3g} m^2, have {g.n * g.dx**2:.3g}"
        )
    V = V0.values * np.exp(-1j * g.q**2 * z1 / (2 * k_p))
    extent = W0.meta.get("extent", np.inf)
    return PumpSpectrum(V0.with_values(V, k=k_p), "crystal", z1, extent)


def pump_detector_field(
    V0: SampledField, geometry: ExperimentGeometry, rho: np.ndarray, extent: float = np.inf
) -> np.ndarray:
    """Complex pump amplitude at the detector plane for an object spectrum ``V0``.

    Each plane-wave component of ``V0`` is carried through the pump chain
    (object, lens, detector) in closed form and summed at ``rho``.
    """
    g = V0.grid
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    chain = geometry.pump_chain()
    kern = build_arm_kernel(chain, rho, g.q)
    band = np.abs(V0.values) > 0
    q_sup = float(np.max(np.abs(g.q[band]))) if band.any() else 0.0
    freq = kern.state.local_frequency(float(np.max(np.abs(rho))), q_sup)
    if np.isfinite(extent):
        freq += extent
    if freq >= g.span / 2:
        raise SamplingError(
            f"pump transfer aliases: local frequency {freq:.3g} m exceeds half the "
            f"grid span {g.span / 2:.3g} m; enlarge n*dx"
        )
    return kern.h @ V0.values * (g.dq / (2 * np.pi))


def pump_intensity_scan(
    spec: PumpSpec,
    geometry: ExperimentGeometry,
    grid: Grid,
    positions: np.ndarray,
    slit_width: float = 0.0,
    bandlimit: float = 0.5,
) -> ScanResult:
    """Pump intensity |W(rho)|^2 seen by a slit detector scanned across ``positions``."""
    V0 = object_spectrum(spec, grid, bandlimit)
    dense, index = dense_path(positions, slit_width)
    W = pump_detector_field(V0, geometry, dense, spec.extent)
    profile = integrate_slit(dense, np.abs(W) ** 2, slit_width)[index]
    return ScanResult(
        np.asarray(positions, dtype=float),
        normalize_max(profile),
        "pump",
        meta={"n": grid.n, "dx": grid.dx, "slit_width": slit_width, "bandlimit": bandlimit},
    )
