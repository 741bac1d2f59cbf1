"""Optical elements, paraxial propagation and per-arm transfer kernels.

Sign conventions: free propagation multiplies the angular spectrum by
``exp(-i q^2 z / 2k)`` and a thin lens multiplies the position field by
``exp(-i k x^2 / 2f)``. In momentum space the lens is a convolution with
``exp(+i f (q - q')^2 / 2k)`` up to a constant.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import erfc

from .grid import (
    GridError,
    SampledField,
    evaluate_spectrum,
    forward_spectrum,
    inverse_spectrum,
)


class SamplingError(ValueError):
    """A quadratic phase would alias on the current grid."""


class UnsupportedElementError(TypeError):
    """An element type is not allowed where it was used."""


# ---------------------------------------------------------------- masks


@dataclass(frozen=True)
class DoubleSlit:
    """Two slits of width ``a`` whose centres are ``d`` apart."""

    d: float
    a: float

    def __post_init__(self) -> None:
        if self.a <= 0 or self.d <= 0:
            raise ValueError("slit separation and width must be positive")
        if self.a >= self.d:
            raise ValueError(f"slits overlap: width {self.a} >= separation {self.d}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        # widen by a rounding margin so edges that fall on grid points are
        # included on both sides and the sampled slit stays centred
        half = self.a / 2 * (1 + 1e-9)
        inside = (np.abs(x - self.d / 2) <= half) | (np.abs(x + self.d / 2) <= half)
        return inside.astype(float)

    @property
    def extent(self) -> float:
        return (self.d + self.a) / 2

    @property
    def min_feature(self) -> float:
        return min(self.a, self.d - self.a)

    def describe(self) -> str:
        return f"double_slit d={self.d * 1e6:g}um a={self.a * 1e6:g}um"


@dataclass(frozen=True)
class OpenMask:
    """Unit transmission everywhere."""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.ones_like(np.asarray(x, dtype=float))

    extent = np.inf
    min_feature = np.inf

    def describe(self) -> str:
        return "open"


@dataclass(frozen=True, eq=False)
class TabulatedMask:
    """Amplitude transmission interpolated linearly from samples; zero outside."""

    x: np.ndarray
    t: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if x.ndim != 1 or x.shape != t.shape or x.size < 2:
            raise ValueError("mask table needs two equal-length columns with >= 2 rows")
        if np.any(np.diff(x) <= 0):
            raise ValueError("mask positions must be strictly increasing")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("mask transmission must lie in [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x, self.t, left=0.0, right=0.0)

    @property
    def extent(self) -> float:
        nz = self.x[self.t > 0]
        return float(np.max(np.abs(nz))) if nz.size else 0.0

    @property
    def min_feature(self) -> float:
        # shortest run between transmission edges
        edges = self.x[np.flatnonzero(np.diff(self.t > 0.5)) + 1]
        return float(np.min(np.diff(edges))) if edges.size > 1 else float(np.ptp(self.x))

    def describe(self) -> str:
        return f"file {self.source}" if self.source else "tabulated"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TabulatedMask):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.t, other.t)

    def __hash__(self) -> int:
        return hash((self.x.tobytes(), self.t.tobytes()))


Mask = Union[DoubleSlit, OpenMask, TabulatedMask, Callable[[np.ndarray], np.ndarray]]


def load_mask(path: str | Path) -> TabulatedMask:
    """Read a two-column text mask: x position in mm, amplitude transmission."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, found {data.shape[1]}")
    order = np.argsort(data[:, 0], kind="stable")
    return TabulatedMask(data[order, 0] * 1e-3, data[order, 1], source=str(path))


# ---------------------------------------------------------------- elements


@dataclass(frozen=True)
class FreeSpace:
    z: float

    def __post_init__(self) -> None:
        if not self.z > 0:
            raise ValueError(f"FreeSpace requires z > 0, got {self.z}")


@dataclass(frozen=True)
class ThinLens:
    f: float

    def __post_init__(self) -> None:
        if self.f == 0 or not np.isfinite(self.f):
            raise ValueError(f"ThinLens requires a finite nonzero focal length, got {self.f}")


@dataclass(frozen=True)
class Aperture:
    mask: Mask


Element = Union[FreeSpace, ThinLens, Aperture]


def apply_aperture(f: SampledField, mask: Mask | Aperture) -> SampledField:
    """Multiply a position-domain field by a transmission mask."""
    if f.domain != "position":
        raise GridError("apertures act on position-domain fields")
    if isinstance(mask, Aperture):
        mask = mask.mask
    t = np.asarray(mask(f.grid.x))
    if np.any(np.abs(t) > 1 + 1e-12):
        raise ValueError("mask amplitude exceeds 1")
    return f.with_values(f.values * t)


# ------------------------------------------------------- grid propagators


def _support_edge(values: np.ndarray, axis: np.ndarray, tol: float) -> float:
    mag = np.abs(values)
    peak = mag.max(initial=0.0)
    if peak == 0:
        return 0.0
    idx = np.flatnonzero(mag > tol * peak)
    return float(np.max(np.abs(axis[idx])))


def _wavenumber(f: SampledField, k: float | None) -> float:
    k = f.k if k is None else k
    if k is None or not k > 0:
        raise ValueError("a positive wavenumber is required (set field.k or pass k)")
    return float(k)


def propagate_free(
    f: SampledField, z: float, k: float | None = None, support_tol: float = 1e-9
) -> SampledField:
    """Paraxial free-space propagation by ``z`` (negative ``z`` back-propagates).

    The spectral chirp must change by less than pi between neighbouring
    samples out to the edge of the spectrum's support (samples above
    ``support_tol`` times the peak); otherwise :class:`SamplingError`.
    """
    if z == 0:
        return f
    k = _wavenumber(f, k)
    V = forward_spectrum(f) if f.domain == "position" else f
    g = f.grid
    q_edge = _support_edge(V.values, g.q, support_tol)
    step = abs(z) * g.dq * (2 * q_edge - g.dq) / (2 * k) if q_edge > 0 else 0.0
    if step >= np.pi:
        lam = 2 * np.pi / k
        need_n = 1 << int(np.ceil(np.log2(lam * abs(z) / g.dx**2)))
        need_dx = np.sqrt(lam * abs(z) / g.n)
        raise SamplingError(
            f"free propagation over {z:g} m aliases: spectral phase step {step:.3g} rad "
            f">= pi at the spectrum edge; need n >= {need_n} at dx={g.dx:g} m "
            f"or dx >= {need_dx:.3g} m at n={g.n}"
        )
    out = V.with_values(V.values * np.exp(-1j * g.q**2 * z / (2 * k)), k=k)
    return inverse_spectrum(out) if f.domain == "position" else out


def apply_thin_lens(
    f: SampledField, f_len: float, k: float | None = None, support_tol: float = 1e-9
) -> SampledField:
    """Multiply by the lens chirp ``exp(-i k x^2 / 2 f_len)``.

    The chirp step is checked at the outermost sample carrying field
    (above ``support_tol`` of the peak); zero-amplitude samples cannot alias.
    """
    if f.domain != "position":
        raise GridError("thin lens acts on position-domain fields")
    k = _wavenumber(f, k)
    g = f.grid
    x_edge = _support_edge(f.values, g.x, support_tol)
    step = k * g.dx * (2 * x_edge - g.dx) / (2 * abs(f_len)) if x_edge > 0 else 0.0
    if step >= np.pi:
        lam = 2 * np.pi / k
        raise SamplingError(
            f"lens chirp (f={f_len:g} m) aliases: phase step {step:.3g} rad >= pi at "
            f"x={x_edge:g} m; need dx < {lam * abs(f_len) / (2 * x_edge):.3g} m "
            f"or a field confined to |x| < {lam * abs(f_len) / (2 * g.dx):.3g} m"
        )
    return f.with_values(f.values * np.exp(-1j * k * g.x**2 / (2 * f_len)), k=k)


def soft_window(q: np.ndarray, limit: float, rolloff: float = 0.03) -> np.ndarray:
    """Smooth low-pass weight: 1 well inside ``|q| < limit``, < 1e-16 beyond it.

    The edge is an erfc step of width ``rolloff * limit`` placed six widths
    inside ``limit``. Unlike a hard cut, its contribution to oscillatory
    sums decays faster than any power of the local frequency.
    """
    s = rolloff * limit
    w = 0.5 * erfc((np.abs(q) - (limit - 6 * s)) / s)
    w[np.abs(q) >= limit] = 0.0
    return w


# ----------------------------------------------------------- arm kernels


@dataclass(frozen=True)
class ArmChain:
    """Ordered elements from the source plane to the detection plane."""

    k: float
    elements: tuple[Element, ...] = ()

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ValueError("ArmChain wavenumber must be positive")
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def length(self) -> float:
        return float(sum(e.z for e in self.elements if isinstance(e, FreeSpace)))

    @property
    def has_lens(self) -> bool:
        return any(isinstance(e, ThinLens) for e in self.elements)


@dataclass(frozen=True)
class ChirpState:
    """Closed-form image of the plane wave ``exp(i q' x)`` after a lens/free chain.

    The propagated column is ``amp * exp(a rho^2 + beta q' rho + gamma q'^2)``;
    each element updates the four coefficients exactly, so no grid is involved.
    """

    a: complex = 0j
    beta: complex = 1j
    gamma: complex = 0j
    amp: complex = 1 + 0j

    def free(self, z: float, k: float) -> ChirpState:
        a = self.a
        den = 1 - 2j * a * z / k
        if a == 0:
            pref = 1.0 + 0j
        else:
            # principal roots of each Gaussian integral give the continuous branch
            p = den / (4 * a)
            pref = 1 / (2 * np.sqrt(-a + 0j) * np.sqrt(-p + 0j))
        return ChirpState(
            a=a / den,
            beta=self.beta / den,
            gamma=self.gamma + 1j * self.beta**2 * z / (2 * k * den),
            amp=self.amp * pref,
        )

    def lens(self, f: float, k: float) -> ChirpState:
        return ChirpState(self.a - 1j * k / (2 * f), self.beta, self.gamma, self.amp)

    def evaluate(self, rho: np.ndarray, q: np.ndarray) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))[:, None]
        q = np.asarray(q, dtype=float)[None, :]
        return self.amp * np.exp(self.a * rho**2 + self.beta * q * rho + self.gamma * q**2)

    def local_frequency(self, rho_max: float, q_max: float) -> float:
        """Upper bound of |d phase / d q'| over |rho| <= rho_max, |q'| <= q_max."""
        return abs(self.beta.imag) * rho_max + 2 * abs(self.gamma.imag) * q_max


def chirp_state(chain: ArmChain) -> ChirpState:
    state = ChirpState()
    for el in chain.elements:
        if isinstance(el, FreeSpace):
            state = state.free(el.z, chain.k)
        elif isinstance(el, ThinLens):
            state = state.lens(el.f, chain.k)
        else:
            raise UnsupportedElementError(
                f"{type(el).__name__} is not supported in an arm chain"
            )
    return state


@dataclass(frozen=True)
class ArmKernel:
    """``h[j, m]``: amplitude at ``rho[j]`` for the plane wave ``q[m]`` at the source."""

    h: np.ndarray
    rho: np.ndarray
    q: np.ndarray
    k: float
    state: ChirpState | None = field(default=None, compare=False)

    def rows(self, idx) -> ArmKernel:
        idx = np.atleast_1d(idx)
        return ArmKernel(self.h[idx], self.rho[idx], self.q, self.k, self.state)


def _fft_column(chain: ArmChain, grid, qp: float, rho: np.ndarray) -> np.ndarray:
    u = SampledField(grid, np.exp(1j * qp * grid.x), "position", chain.k)
    for el in chain.elements:
        if isinstance(el, FreeSpace):
            u = propagate_free(u, el.z)
        else:
            u = apply_thin_lens(u, el.f)
    return evaluate_spectrum(forward_spectrum(u), rho)


def build_arm_kernel(
    chain: ArmChain,
    rho: Sequence[float] | np.ndarray,
    q: np.ndarray,
    method: str = "analytic",
    grid=None,
    workers: int = 1,
) -> ArmKernel:
    """Propagate each plane-wave column ``exp(i q' x)`` through ``chain``.

    ``method="analytic"`` composes the elements exactly (:class:`ChirpState`).
    ``method="fft"`` propagates every column on ``grid`` with the FFT
    propagators; it is exact for lens-free chains but a lens chirp over a
    full-width plane wave normally violates the sampling criterion.
    """
    for el in chain.elements:
        if not isinstance(el, (FreeSpace, ThinLens)):
            raise UnsupportedElementError(
                f"{type(el).__name__} is not supported in an arm chain"
            )
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    q = np.asarray(q, dtype=float)
    state = chirp_state(chain)
    if method == "analytic":
        h = state.evaluate(rho, q)
    elif method == "fft":
        if grid is None:
            raise ValueError("method='fft' needs the grid the q axis belongs to")
        if q.shape != (grid.n,) or not np.allclose(q, grid.q, rtol=0, atol=1e-9 * grid.dq):
            raise GridError("q axis does not match the grid's momentum axis")
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                cols = list(ex.map(lambda qp: _fft_column(chain, grid, qp, rho), q))
        else:
            cols = [_fft_column(chain, grid, qp, rho) for qp in q]
        h = np.stack(cols, axis=1)
    else:
        raise ValueError(f"unknown kernel method {method!r}")
    return ArmKernel(h, rho, q, chain.k, state)
