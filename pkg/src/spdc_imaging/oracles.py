"""Closed-form predictions and scan analysis used to check the numerics.

Nothing here calls the biphoton engine; the formulas are written out
independently so they can serve as oracles for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .detection import ScanResult, normalize_max
from .geometry import ExperimentGeometry
from .grid import SampledField, evaluate_spectrum, forward_spectrum

IMAGING_TOL = 1e-12


@dataclass(frozen=True)
class ImagingGeometry:
    """Object distance ``O``, image distance ``I`` and focal length ``f`` (metres)."""

    O: float
    I: float
    f: float

    def __post_init__(self) -> None:
        if not (self.O > 0 and self.I > 0):
            raise ValueError("object and image distances must be positive")
        if self.f == 0 or not np.isfinite(self.f):
            raise ValueError("focal length must be finite and nonzero")

    @property
    def m(self) -> float:
        return self.I / self.O

    @property
    def residual(self) -> float:
        """Relative thin-lens residual ``f (1/f - 1/O - 1/I)``."""
        return self.f * (1 / self.f - 1 / self.O - 1 / self.I)

    @property
    def at_imaging(self) -> bool:
        return abs(self.residual) <= IMAGING_TOL

    @classmethod
    def from_experiment(cls, geometry: ExperimentGeometry) -> ImagingGeometry:
        if geometry.f is None:
            raise ValueError("geometry has no lens, so it has no image plane")
        return cls(geometry.O, geometry.I, geometry.f)


def thin_lens_solve(
    O: float | None = None, I: float | None = None, f: float | None = None
) -> ImagingGeometry:
    """Complete ``1/f = 1/O + 1/I`` from any two of the three distances.

    Raises ``ValueError`` when the requested combination has no real image.
    """
    given = [v is not None for v in (O, I, f)]
    if sum(given) != 2:
        raise ValueError("give exactly two of O, I, f")
    for name, v in (("O", O), ("I", I), ("f", f)):
        if v is not None and not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if I is None:
        if O <= f:
            raise ValueError(f"O={O} m <= f={f} m: the image is virtual")
        I = 1 / (1 / f - 1 / O)
    elif O is None:
        if I <= f:
            raise ValueError(f"I={I} m <= f={f} m: no real object distance")
        O = 1 / (1 / f - 1 / I)
    else:
        f = 1 / (1 / O + 1 / I)
    return ImagingGeometry(O, I, f)


def linear_scale(geometry: ExperimentGeometry | ImagingGeometry) -> float:
    """Coefficient ``f / (I - f)`` of the ``q' rho`` phase in the arm kernel."""
    g = geometry if isinstance(geometry, ImagingGeometry) else ImagingGeometry.from_experiment(geometry)
    if g.I == g.f:
        raise ValueError("lens-to-detector distance equals f: coefficient diverges")
    return g.f / (g.I - g.f)


# ----------------------------------------------------------- image shapes


def _object_amplitude(W0, x: np.ndarray) -> np.ndarray:
    if isinstance(W0, SampledField):
        V0 = W0 if W0.domain == "momentum" else forward_spectrum(W0)
        return evaluate_spectrum(V0, x)
    return np.asarray(W0(x), dtype=complex)


def predict_coincidence_profile(
    W0,
    geometry: ExperimentGeometry | ImagingGeometry,
    mode: str,
    positions: np.ndarray,
    fixed: float = 0.0,
) -> np.ndarray:
    """Max-normalised image predicted on the imaging condition.

    ``W0`` is the field just after the object: a callable of position, or a
    :class:`SampledField` (evaluated by band-limited interpolation).

    * ``pump`` and ``same``: ``|W0(-rho / m)|^2``
    * ``fixed-signal`` / ``fixed-idler``: ``|W0(-(rho + fixed) / 2m)|^2``
    * ``opposite``: constant
    """
    g = geometry if isinstance(geometry, ImagingGeometry) else ImagingGeometry.from_experiment(geometry)
    if not g.at_imaging:
        raise ValueError(
            f"geometry is off the imaging condition (thin-lens residual {g.residual:.3g})"
        )
    x = np.asarray(positions, dtype=float)
    if mode in ("pump", "same"):
        arg = -x / g.m
    elif mode in ("fixed-signal", "fixed-idler"):
        arg = -(x + fixed) / (2 * g.m)
    elif mode == "opposite":
        return np.ones_like(x)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return normalize_max(np.abs(_object_amplitude(W0, arg)) ** 2)


def fraunhofer_double_slit(d: float, a: float, wavelength: float, D: float, x) -> np.ndarray:
    """Far-field double-slit intensity ``cos^2(pi d x / lambda D) sinc^2(pi a x / lambda D)``.

    Normalised to one at ``x = 0``.
    """
    u = np.asarray(x, dtype=float) / (wavelength * D)
    return np.cos(np.pi * d * u) ** 2 * np.sinc(a * u) ** 2


# ------------------------------------------------------ arm kernel forms


def closed_form_arm_kernel(
    z2: float,
    f: float,
    z: float,
    k: float,
    rho,
    q,
    printed: bool = False,
) -> np.ndarray:
    """Plane wave ``exp(i q' x)`` carried through free ``z2``, lens ``f``, free ``z - z2``.

    Evaluated by doing the Fresnel integral over the lens plane in closed
    form. Returns ``h[rho, q']``.

    With ``printed=True`` the per-photon factor is returned exactly as it
    is usually quoted, ``exp[-i q'^2 (z2 - f + f^2/(I - f)) / 2k]
    exp[-i f q' rho / (I - f)]``, which drops the constant and the
    ``rho^2`` phase and carries the opposite sign on ``f^2/(I - f)``.
    """
    I = z - z2
    if np.isclose(I, f, rtol=1e-15, atol=0):
        raise ValueError("z - z2 equals f: the closed-form coefficients diverge")
    rho = np.atleast_1d(np.asarray(rho, dtype=float))[:, None]
    q = np.atleast_1d(np.asarray(q, dtype=float))[None, :]
    lin = f / (I - f)
    if printed:
        quad = z2 - f + f * f / (I - f)
        return np.exp(-1j * q**2 * quad / (2 * k) - 1j * lin * q * rho)
    quad = z2 - f - f * f / (I - f)
    # sqrt(k / 2 pi i I) * sqrt(i pi / alpha), alpha = k (f - I) / (2 f I)
    const = -1j * np.sqrt(f / (I - f)) if (I - f) / f > 0 else np.sqrt(f / (f - I)) + 0j
    return const * np.exp(
        -1j * q**2 * quad / (2 * k) - 1j * lin * q * rho + 1j * k * rho**2 / (2 * (I - f))
    )


def printed_kernel_residual(z1: float, z2: float, f: float, z: float, k_p: float) -> dict:
    """Compare both arm-kernel forms against the pair phase ``z1 (q_i - q_s)^2 / 2 k_p``.

    Adding the crystal-plane pump chirp ``-z1 (q_i + q_s)^2 / 2 k_p`` to the
    two per-photon quadratic phases (``k = k_p / 2``) should leave only the
    relative-momentum term on the imaging condition. Returned values are the
    coefficients multiplying ``-(q_i^2 + q_s^2) / k_p`` in each form and their
    offset from the value ``-z1`` that the reduction needs.
    """
    I = z - z2
    derived = z2 - f - f * f / (I - f)
    printed = z2 - f + f * f / (I - f)
    return {
        "derived_coefficient": derived,
        "printed_coefficient": printed,
        "required_coefficient": -z1,
        "derived_residual": derived + z1,
        "printed_residual": printed + z1,
        "linear_scale": f / (I - f),
        "O_over_I": (z1 + z2) / I,
    }


def relative_phase_factor(
    rho_minus, z1: float, O: float, I: float, k_p: float, printed: bool = False
) -> np.ndarray:
    """``(1/2pi) integral exp(i z1 D^2 / 2 k_p - i s D rho_-) dD`` in closed form.

    ``s = O / 2I`` (the value that follows from the coincidence amplitude);
    ``printed=True`` uses ``s = O / I``. The result is
    ``sqrt(k_p / 2 pi z1) exp(i pi/4) exp(-i s^2 rho_-^2 k_p / 2 z1)``.
    """
    if not z1 > 0:
        raise ValueError("the relative-momentum integral needs z1 > 0")
    s = O / I if printed else O / (2 * I)
    r = np.asarray(rho_minus, dtype=float)
    return np.sqrt(k_p / (2 * np.pi * z1)) * np.exp(1j * np.pi / 4) * np.exp(
        -1j * s**2 * r**2 * k_p / (2 * z1)
    )


# --------------------------------------------------------- scan analysis


class ScanAnalysisError(ValueError):
    """The scan does not have the structure the analysis needs."""


def _xy(scan) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(scan, ScanResult):
        return scan.positions, scan.rates
    x, y = scan
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def fringe_period(scan: ScanResult | tuple, pad: int = 64, min_fringes: float = 3.0) -> float:
    """Dominant fringe period of a uniformly sampled scan.

    The mean-subtracted scan is tapered with a Hann window (which keeps the
    mirror-frequency leakage of a short record from pulling the peak),
    zero-padded and transformed. The strongest spectral bin above two
    cycles per record is refined by fitting a parabola through it and its
    neighbours.
    """
    x, y = _xy(scan)
    if x.size < 8:
        raise ScanAnalysisError("too few samples to measure a fringe period")
    if np.ptp(y) <= 1e-12 * np.max(np.abs(y), initial=0.0):
        raise ScanAnalysisError("scan is constant: no fringes")
    y = (y - y.mean()) * np.hanning(y.size)
    step = (x[-1] - x[0]) / (x.size - 1)
    span = x[-1] - x[0]
    m = pad * x.size
    spec = np.abs(np.fft.rfft(y, m))
    freq = np.fft.rfftfreq(m, step)
    lo = np.searchsorted(freq, 2.0 / span)
    j = lo + int(np.argmax(spec[lo:]))
    if 0 < j < spec.size - 1:
        a, b, c = spec[j - 1], spec[j], spec[j + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    period = 1.0 / ((j + shift) * (freq[1] - freq[0]))
    if span / period < min_fringes:
        raise ScanAnalysisError(
            f"scan covers {span / period:.2f} fringes; need at least {min_fringes:g}"
        )
    return float(period)


def peak_separation(scan: ScanResult | tuple, smooth: float = 1.0) -> float:
    """Distance between the centroids of the two peaks of a scan.

    The scan is lightly smoothed and split into the connected regions that
    lie above half its maximum. Exactly two regions must exist. Each
    centroid is taken over its region using the unsmoothed rates.
    """
    x, y = _xy(scan)
    ys = ndimage.gaussian_filter1d(y, smooth, mode="nearest") if smooth > 0 else y
    if np.ptp(ys) == 0:
        raise ScanAnalysisError("scan is constant: no peaks")
    labels, count = ndimage.label(ys >= 0.5 * ys.max())
    if count != 2:
        raise ScanAnalysisError(f"expected two peaks above half maximum, found {count}")
    centres = []
    for lab in (1, 2):
        sel = labels == lab
        centres.append(np.sum(x[sel] * y[sel]) / np.sum(y[sel]))
    return float(abs(centres[1] - centres[0]))
