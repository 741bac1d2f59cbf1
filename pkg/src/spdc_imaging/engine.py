"""Coincidence amplitudes of the twin photons and detector scans.

The two-photon amplitude for detectors at ``rho_i`` and ``rho_s`` is::

    A = sum_{q_i, q_s} V(q_i + q_s) h_i(rho_i, q_i) h_s(rho_s, q_s) (dq / 2 pi)^2

with ``V`` the pump angular spectrum at the crystal and ``h`` the arm
kernels. The coincidence rate is ``|A|^2``. Sums over ``q_i + q_s`` use
index arithmetic; sums that fall outside the grid contribute nothing.

Each photon's transverse momentum is weighted by a smooth acceptance
window (see :meth:`Experiment.acceptance`). It is flat wherever the sums
are well sampled and rolls off before aliasing sets in, which removes the
truncation ripple a hard grid edge would leave in the oscillatory sums.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .detection import (
    ScanResult,
    add_poisson_noise,
    dense_path,
    gauss_legendre_offsets,
    integrate_slit,
    normalize_max,
)
from .geometry import ExperimentGeometry
from .grid import Grid, GridError, SampledField, evaluate_spectrum
from .optics import (
    ArmKernel,
    ChirpState,
    SamplingError,
    build_arm_kernel,
    chirp_state,
    soft_window,
)
from .pump import PumpSpec, PumpSpectrum, object_spectrum, spectrum_at_crystal

__all__ = [
    "Experiment",
    "Noise",
    "ScanConfig",
    "SupportError",
    "add_poisson_noise",
    "auto_dx",
    "coincidence_amplitude_direct",
    "coincidence_amplitude_fast",
    "factored_amplitude",
    "integrate_slit",
    "minus_factor",
    "plus_factor",
    "relative_factor",
    "run_scan",
]

CHUNK = 64
SUPPORT_TOL = 1e-10


class SupportError(ValueError):
    """The pump spectrum reaches beyond half the momentum grid."""


def _spectrum(V) -> SampledField:
    return V.V if isinstance(V, PumpSpectrum) else V


def _check_inputs(V: SampledField, h_i: ArmKernel, h_s: ArmKernel) -> None:
    if V.domain != "momentum":
        raise GridError("the pump spectrum must be a momentum-domain field")
    g = V.grid
    for h in (h_i, h_s):
        if h.q.shape != (g.n,) or not np.allclose(h.q, g.q, rtol=0, atol=1e-9 * g.dq):
            raise GridError("arm kernel momentum axis does not match the pump grid")
    mag = np.abs(V.values)
    outer = np.abs(g.q) > g.q_max / 2
    if mag[outer].max(initial=0.0) > SUPPORT_TOL * mag.max(initial=0.0):
        raise SupportError(
            "pump spectrum extends beyond half the momentum grid; sums over "
            "q_i + q_s would be truncated (band-limit the object or refine dx)"
        )


def _weighted(h: ArmKernel, acceptance: np.ndarray | None) -> np.ndarray:
    return h.h if acceptance is None else h.h * acceptance[None, :]


def coincidence_amplitude_direct(
    V: PumpSpectrum | SampledField,
    h_i: ArmKernel,
    h_s: ArmKernel,
    acceptance_i: np.ndarray | None = None,
    acceptance_s: np.ndarray | None = None,
    full_map: bool = False,
    block: int = 256,
) -> np.ndarray:
    """Brute-force double sum over both photons' momenta.

    Row ``j`` of ``h_i`` pairs with row ``j`` of ``h_s``. With
    ``full_map=True`` every idler row is paired with every signal row and
    a 2D array ``A[idler, signal]`` is returned.
    """
    V = _spectrum(V)
    _check_inputs(V, h_i, h_s)
    n = V.grid.n
    a = _weighted(h_i, acceptance_i)
    b = _weighted(h_s, acceptance_s)
    if not full_map and a.shape[0] != b.shape[0]:
        raise ValueError("paired evaluation needs the same number of idler and signal rows")
    v = V.values
    js = np.arange(n)
    out = np.zeros((a.shape[0], b.shape[0]) if full_map else a.shape[0], dtype=complex)
    for start in range(0, n, block):
        ji = np.arange(start, min(start + block, n))
        idx = ji[:, None] + js[None, :] - n // 2
        M = np.where((idx >= 0) & (idx < n), v[np.clip(idx, 0, n - 1)], 0)
        part = a[:, ji] @ M
        out += part @ b.T if full_map else np.sum(part * b, axis=1)
    return out * (V.grid.dq / (2 * np.pi)) ** 2


def _fast_rows(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = v.size
    fa = np.fft.fft(a, 2 * n, axis=-1)
    fb = np.fft.fft(b, 2 * n, axis=-1)
    c = np.fft.ifft(fa * fb, axis=-1)[..., n // 2 : n // 2 + n]
    return np.sum(c * v, axis=-1)


def coincidence_amplitude_fast(
    V: PumpSpectrum | SampledField,
    h_i: ArmKernel,
    h_s: ArmKernel,
    acceptance_i: np.ndarray | None = None,
    acceptance_s: np.ndarray | None = None,
    full_map: bool = False,
) -> np.ndarray:
    """Same sum as :func:`coincidence_amplitude_direct`, in ``O(n log n)`` per pair.

    For fixed total momentum ``Q`` the inner sum over ``q_s`` is the linear
    convolution of the two kernel rows, obtained for every ``Q`` at once
    with one zero-padded FFT product.
    """
    V = _spectrum(V)
    _check_inputs(V, h_i, h_s)
    a = _weighted(h_i, acceptance_i)
    b = _weighted(h_s, acceptance_s)
    scale = (V.grid.dq / (2 * np.pi)) ** 2
    if full_map:
        return np.stack([_fast_rows(V.values, row[None, :], b) for row in a]) * scale
    if a.shape[0] != b.shape[0]:
        raise ValueError("paired evaluation needs the same number of idler and signal rows")
    return _fast_rows(V.values, a, b) * scale


# ------------------------------------------------------------ experiment


@dataclass(frozen=True)
class Experiment:
    """Everything needed to evaluate coincidence scans for one configuration.

    ``bandlimit`` is the fraction of the Nyquist wavenumber kept in the
    object spectrum; ``safety`` scales the half-span budget used when sizing
    the acceptance windows.
    """

    geometry: ExperimentGeometry
    pump: PumpSpec
    grid: Grid
    bandlimit: float = 0.5
    safety: float = 0.9

    def __post_init__(self) -> None:
        if not np.isclose(self.geometry.wavelength, self.pump.wavelength, rtol=1e-12):
            raise ValueError("geometry and pump disagree on the pump wavelength")
        if not 0 < self.bandlimit <= 0.5:
            raise ValueError("bandlimit must lie in (0, 0.5] so q_i + q_s stays on the grid")

    @cached_property
    def object_spectrum(self) -> SampledField:
        return object_spectrum(self.pump, self.grid, self.bandlimit)

    @cached_property
    def crystal_spectrum(self) -> PumpSpectrum:
        return spectrum_at_crystal(self.object_spectrum, self.geometry.z1, self.geometry.k_p)

    @property
    def extent(self) -> float:
        ext = self.pump.extent
        return ext if np.isfinite(ext) else 0.0

    @cached_property
    def states(self) -> tuple[ChirpState, ChirpState]:
        return chirp_state(self.geometry.idler_chain()), chirp_state(self.geometry.signal_chain())

    def spectrum_frequency(self) -> float:
        """Bound on |d phase / dq| of the crystal spectrum (object extent plus chirp)."""
        q_sup = self.bandlimit * self.grid.q_max
        return self.extent + self.geometry.z1 * q_sup / self.geometry.k_p

    def acceptance_limit(self, arm: str, rho_max: float) -> float:
        """Largest |q'| for which the summand stays sampled below pi per step."""
        state = self.states[0 if arm == "idler" else 1]
        g = self.grid
        budget = self.safety * g.span / 2 - self.spectrum_frequency()
        budget -= abs(state.beta.imag) * rho_max
        curv = 2 * abs(state.gamma.imag)
        limit = g.q_max if curv == 0 else min(g.q_max, budget / curv)
        if budget <= 0 or limit <= self.bandlimit * g.q_max / 2:
            raise SamplingError(
                f"{arm} arm: grid span {g.span:.3g} m is too small for detector "
                f"positions up to {rho_max:.3g} m (acceptance limit {max(limit, 0):.3g} rad/m); "
                "increase n or dx"
            )
        return float(limit)

    def acceptance(self, arm: str, rho_max: float, shrink: float = 1.0) -> np.ndarray:
        return soft_window(self.grid.q, shrink * self.acceptance_limit(arm, rho_max))

    def kernels(self, rho_i, rho_s) -> tuple[ArmKernel, ArmKernel]:
        q = self.grid.q
        return (
            build_arm_kernel(self.geometry.idler_chain(), rho_i, q),
            build_arm_kernel(self.geometry.signal_chain(), rho_s, q),
        )

    def guard_limit(self) -> float:
        """Detector positions must stay within |rho| <= span / 8."""
        return self.grid.span / 8

    def amplitudes(
        self,
        rho_i: np.ndarray,
        rho_s: np.ndarray,
        method: str = "fast",
        workers: int = 1,
        shrink: float = 1.0,
        rho_max: tuple[float, float] | None = None,
    ) -> np.ndarray:
        """Paired amplitudes ``A(rho_i[j], rho_s[j])``.

        Pairs are processed in fixed chunks of :data:`CHUNK`, so the result
        is bit-identical for any ``workers``.
        """
        rho_i = np.atleast_1d(np.asarray(rho_i, dtype=float))
        rho_s = np.atleast_1d(np.asarray(rho_s, dtype=float))
        if rho_max is None:
            rho_max = (float(np.max(np.abs(rho_i))), float(np.max(np.abs(rho_s))))
        w_i = self.acceptance("idler", rho_max[0], shrink)
        w_s = self.acceptance("signal", rho_max[1], shrink)
        V = self.crystal_spectrum
        func = {"fast": coincidence_amplitude_fast, "direct": coincidence_amplitude_direct}[method]

        def chunk(start: int) -> np.ndarray:
            sl = slice(start, start + CHUNK)
            hi, hs = self.kernels(rho_i[sl], rho_s[sl])
            return func(V, hi, hs, w_i, w_s)

        starts = range(0, rho_i.size, CHUNK)
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                parts = list(ex.map(chunk, starts))
        else:
            parts = [chunk(s) for s in starts]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


# ----------------------------------------------------------------- scans


@dataclass(frozen=True)
class Noise:
    mean_counts: float
    seed: int | None = 0

    def __post_init__(self) -> None:
        if not self.mean_counts > 0:
            raise ValueError("mean_counts must be positive")


SCAN_MODES = ("fixed-signal", "fixed-idler", "same", "opposite")


@dataclass(frozen=True)
class ScanConfig:
    """Detector path for a coincidence scan.

    ``fixed-signal`` scans the idler detector (D1) with the signal detector
    held at ``fixed``; ``same`` moves both with ``rho_i = rho_s``;
    ``opposite`` moves them with ``rho_i = -rho_s``.
    """

    mode: str
    positions: np.ndarray
    slit_width: float = 0.0
    fixed: float = 0.0
    noise: Noise | None = None
    quadrature_points: int = 5

    def __post_init__(self) -> None:
        if self.mode not in SCAN_MODES:
            raise ValueError(f"unknown scan mode {self.mode!r}; expected one of {SCAN_MODES}")
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if pos.size < 2:
            raise ValueError("a scan needs at least two positions")
        if self.slit_width < 0:
            raise ValueError("slit width must be non-negative")
        object.__setattr__(self, "positions", pos)


def _scan_pairs(cfg: ScanConfig):
    """Quadrature nodes ``(rho_i, rho_s, weight, target)`` along the scan path.

    ``target`` indexes the profile each node contributes to; for fixed
    modes that profile lives on a dense path that is later slit-averaged.
    """
    w = cfg.slit_width
    t, g = gauss_legendre_offsets(w, cfg.quadrature_points)
    if cfg.mode in ("fixed-signal", "fixed-idler"):
        dense, index = dense_path(cfg.positions, w)
        scan = np.repeat(dense, t.size)
        other = np.tile(cfg.fixed + t, dense.size)
        weight = np.tile(g, dense.size)
        target = np.repeat(np.arange(dense.size), t.size)
        pair = (scan, other) if cfg.mode == "fixed-signal" else (other, scan)
        return pair[0], pair[1], weight, target, dense, index
    p = cfg.positions
    ta, tb = np.meshgrid(t, t, indexing="ij")
    ga = np.outer(g, g).ravel()
    rho_i = (p[:, None] + ta.ravel()[None, :]).ravel()
    sign = 1.0 if cfg.mode == "same" else -1.0
    rho_s = (sign * p[:, None] + tb.ravel()[None, :]).ravel()
    weight = np.tile(ga, p.size)
    target = np.repeat(np.arange(p.size), ta.size)
    return rho_i, rho_s, weight, target, p, np.arange(p.size)


def run_scan(
    config: ScanConfig,
    experiment: Experiment,
    method: str = "fast",
    workers: int = 1,
    leakage_points: int = 7,
) -> ScanResult:
    """Slit-integrated coincidence rates along the scan path, max-normalised.

    When ``config.noise`` is set, Poisson counts are drawn afterwards from a
    single seeded stream. ``leakage_points`` spot checks repeat the sum with
    a 15% narrower acceptance window; the largest change relative to the
    peak is reported as ``meta["window_leakage"]``.
    """
    rho_i, rho_s, weight, target, dense, index = _scan_pairs(config)
    guard = experiment.guard_limit()
    reach = max(np.max(np.abs(rho_i)), np.max(np.abs(rho_s)))
    if reach > guard:
        raise GridError(
            f"detector positions reach {reach:.4g} m, outside the guard band "
            f"|rho| <= span/8 = {guard:.4g} m; enlarge n*dx"
        )
    rho_max = (float(np.max(np.abs(rho_i))), float(np.max(np.abs(rho_s))))
    A = experiment.amplitudes(rho_i, rho_s, method, workers, rho_max=rho_max)
    C = np.abs(A) ** 2
    profile = np.bincount(target, weights=weight * C, minlength=dense.size)
    if config.mode in ("fixed-signal", "fixed-idler"):
        profile = integrate_slit(dense, profile, config.slit_width)
    rates = normalize_max(profile[index])

    meta: dict = {
        "n": experiment.grid.n,
        "dx": experiment.grid.dx,
        "method": method,
        "acceptance_limit_idler": experiment.acceptance_limit("idler", rho_max[0]),
        "acceptance_limit_signal": experiment.acceptance_limit("signal", rho_max[1]),
        "degenerate": bool(experiment.geometry.degenerate),
    }
    if not experiment.geometry.degenerate:
        meta["warning"] = "nondegenerate wavenumbers: not checked against closed-form predictions"
    if leakage_points:
        spot = np.unique(np.linspace(0, rho_i.size - 1, leakage_points).round().astype(int))
        A2 = experiment.amplitudes(rho_i[spot], rho_s[spot], method, shrink=0.85, rho_max=rho_max)
        peak = C.max() if C.max() > 0 else 1.0
        meta["window_leakage"] = float(np.max(np.abs(np.abs(A2) ** 2 - C[spot])) / peak)

    normalization = "max-normalized"
    if config.noise is not None:
        rates = add_poisson_noise(rates, config.noise.mean_counts, config.noise.seed)
        normalization = f"poisson counts, mean_counts={config.noise.mean_counts:g} at peak"
    echo = {
        "mode": config.mode,
        "slit_width": config.slit_width,
        "fixed": config.fixed,
        "quadrature_points": config.quadrature_points,
    }
    return ScanResult(config.positions, rates, config.mode, normalization, echo, meta)


# ----------------------------------------------------- factored fast path


def _require_factorable(geometry: ExperimentGeometry) -> None:
    if not geometry.is_imaging(1e-9):
        raise ValueError("the factored path needs a geometry on the imaging condition")
    if not geometry.degenerate:
        raise ValueError("the factored path needs degenerate twins (k_s = k_i = k_p/2)")


def plus_factor(V0: SampledField, geometry: ExperimentGeometry, rho_plus: np.ndarray) -> np.ndarray:
    """``sum_Q V0(Q) exp(-i (O/I) Q rho_+ / 2) dQ / 2pi``: the object field at the image coordinate."""
    _require_factorable(geometry)
    rho_plus = np.asarray(rho_plus, dtype=float)
    return evaluate_spectrum(V0, -rho_plus * geometry.O / (2 * geometry.I))


def minus_factor(
    geometry: ExperimentGeometry,
    grid: Grid,
    rho_minus: np.ndarray,
    limit: float | None = None,
    safety: float = 0.9,
) -> np.ndarray:
    """``sum_D exp(i z1 D^2 / 2k_p) exp(-i (O/2I) D rho_-) dD / 2pi`` over the relative momentum.

    The sum runs over a grid with spacing ``dq`` and ``2n`` points, weighted
    by a soft window sized so the summand stays sampled. Its modulus is
    ``sqrt(k_p / (2 pi z1))`` for every ``rho_-``.
    """
    _require_factorable(geometry)
    rho_minus = np.atleast_1d(np.asarray(rho_minus, dtype=float))
    g = geometry
    D = (np.arange(2 * grid.n) - grid.n) * grid.dq
    scale = g.O / (2 * g.I)
    if limit is None:
        budget = safety * grid.span / 2 - scale * float(np.max(np.abs(rho_minus)))
        if budget <= 0:
            raise SamplingError("relative-coordinate range exceeds the grid span")
        limit = min(2 * grid.q_max, budget * g.k_p / g.z1)
    w = soft_window(D, limit) * np.exp(1j * g.z1 * D**2 / (2 * g.k_p))
    phase = np.exp(-1j * scale * np.outer(rho_minus, D))
    return phase @ w * (grid.dq / (2 * np.pi))


def factored_amplitude(experiment: Experiment, rho_i: np.ndarray, rho_s: np.ndarray) -> np.ndarray:
    """Amplitude on the imaging condition as a product of sum and difference factors.

    ``A = (1/2) c_i c_s exp(a rho_i^2 + a rho_s^2) P(rho_+) M(rho_-)``; the
    quadratic prefactor comes from the closed-form arm kernels.
    """
    geo = experiment.geometry
    _require_factorable(geo)
    rho_i = np.atleast_1d(np.asarray(rho_i, dtype=float))
    rho_s = np.atleast_1d(np.asarray(rho_s, dtype=float))
    si, ss = experiment.states
    pre = 0.5 * si.amp * ss.amp * np.exp(si.a * rho_i**2 + ss.a * rho_s**2)
    P = plus_factor(experiment.object_spectrum, geo, rho_i + rho_s)
    M = minus_factor(geo, experiment.grid, rho_i - rho_s)
    return pre * P * M


def auto_dx(
    geometry: ExperimentGeometry,
    pump: PumpSpec,
    n: int,
    rho_max: float,
    bandlimit: float = 0.5,
    safety: float = 0.9,
    margin: float = 1.1,
) -> float:
    """Grid spacing for which the acceptance windows reach the Nyquist wavenumber.

    Solves ``safety * n dx / 2 - extent - |beta| rho_max - (z1 bandlimit / k_p
    + 2 |gamma|) pi / dx = 0`` for the smallest ``dx``, scales it by
    ``margin`` and also respects the guard band ``rho_max <= n dx / 8``.
    The result is rounded up to 0.1 um.
    """
    ext = pump.extent if np.isfinite(pump.extent) else 0.0
    states = (chirp_state(geometry.idler_chain()), chirp_state(geometry.signal_chain()))
    beta = max(abs(s.beta.imag) for s in states)
    gamma = max(abs(s.gamma.imag) for s in states)
    a = safety * n / 2
    b = ext + beta * rho_max
    c = np.pi * (geometry.z1 * bandlimit / geometry.k_p + 2 * gamma)
    dx = margin * (b + np.sqrt(b * b + 4 * a * c)) / (2 * a)
    dx = max(dx, 8 * rho_max / n)
    return float(np.ceil(dx * 1e7) / 1e7)


def relative_factor(experiment: Experiment, rho_plus: float, rho_minus: np.ndarray) -> np.ndarray:
    """The ``rho_-``-dependent factor recovered from full engine amplitudes.

    The amplitude at ``rho_i = (rho_+ + rho_-)/2``, ``rho_s = (rho_+ - rho_-)/2``
    is divided by the closed-form prefactor and the ``rho_+`` factor, which
    leaves the relative-momentum integral. ``rho_+`` should sit where the
    image is bright so the division is well conditioned.
    """
    geo = experiment.geometry
    _require_factorable(geo)
    rho_minus = np.atleast_1d(np.asarray(rho_minus, dtype=float))
    rho_i = (rho_plus + rho_minus) / 2
    rho_s = (rho_plus - rho_minus) / 2
    A = experiment.amplitudes(rho_i, rho_s)
    si, ss = experiment.states
    pre = 0.5 * si.amp * ss.amp * np.exp(si.a * rho_i**2 + ss.a * rho_s**2)
    P = plus_factor(experiment.object_spectrum, geo, np.full(rho_minus.shape, rho_plus))
    return A / (pre * P)
