"""Experiment geometry: object, crystal, lens and detector distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics import ArmChain, FreeSpace, ThinLens


@dataclass(frozen=True)
class ExperimentGeometry:
    """Distances in metres measured along the pump axis.

    ``z1`` object to crystal, ``z2`` crystal to lens, ``z`` crystal to the
    detectors, ``f`` focal length (``None`` when no lens is present). The
    object-lens distance is ``O = z1 + z2`` and the lens-detector distance
    ``I = z - z2``.
    """

    z1: float
    z2: float
    z: float
    f: float | None = None
    wavelength: float = 442e-9
    signal_wavelength: float | None = None
    idler_wavelength: float | None = None

    def __post_init__(self) -> None:
        if not self.z1 > 0:
            raise ValueError(f"z1 must be positive, got {self.z1}")
        if not self.z > 0:
            raise ValueError(f"z must be positive, got {self.z}")
        if not self.wavelength > 0:
            raise ValueError("pump wavelength must be positive")
        if self.f is not None:
            if self.f == 0 or not np.isfinite(self.f):
                raise ValueError("ThinLens requires a finite nonzero focal length (f != 0)")
            if not 0 < self.z2 < self.z:
                raise ValueError(
                    f"the lens must sit between crystal and detectors: 0 < z2 < z "
                    f"(z2={self.z2}, z={self.z})"
                )
        elif self.z2 < 0:
            raise ValueError("z2 must be non-negative")

    @classmethod
    def at_imaging_condition(
        cls, z1: float, z2: float, f: float, wavelength: float = 442e-9
    ) -> ExperimentGeometry:
        """Place the detectors on the image plane of the object."""
        o = z1 + z2
        if o <= f:
            raise ValueError(f"object distance {o} m <= focal length {f} m: no real image")
        i = 1.0 / (1.0 / f - 1.0 / o)
        return cls(z1, z2, z2 + i, f, wavelength)

    @property
    def k_p(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def k_s(self) -> float:
        lam = self.signal_wavelength or 2 * self.wavelength
        return 2 * np.pi / lam

    @property
    def k_i(self) -> float:
        lam = self.idler_wavelength or 2 * self.wavelength
        return 2 * np.pi / lam

    @property
    def degenerate(self) -> bool:
        return np.isclose(self.k_s, self.k_p / 2, rtol=1e-12) and np.isclose(
            self.k_i, self.k_p / 2, rtol=1e-12
        )

    @property
    def has_lens(self) -> bool:
        return self.f is not None

    @property
    def O(self) -> float:
        return self.z1 + self.z2

    @property
    def I(self) -> float:
        return self.z - self.z2

    @property
    def m(self) -> float:
        return self.I / self.O

    def imaging_residual(self) -> float:
        """``f (1/f - 1/O - 1/I)``; zero on the image plane."""
        if self.f is None:
            return np.inf
        return self.f * (1 / self.f - 1 / self.O - 1 / self.I)

    def is_imaging(self, tol: float = 1e-9) -> bool:
        return self.f is not None and abs(self.imaging_residual()) <= tol

    def arm_chain(self, k: float) -> ArmChain:
        """Crystal exit plane to detection plane for a photon of wavenumber ``k``."""
        if self.f is None:
            return ArmChain(k, (FreeSpace(self.z),))
        return ArmChain(k, (FreeSpace(self.z2), ThinLens(self.f), FreeSpace(self.z - self.z2)))

    def signal_chain(self) -> ArmChain:
        return self.arm_chain(self.k_s)

    def idler_chain(self) -> ArmChain:
        return self.arm_chain(self.k_i)

    def pump_chain(self) -> ArmChain:
        """Object plane to the pump detector D3, through the same lens."""
        if self.f is None:
            return ArmChain(self.k_p, (FreeSpace(self.z1 + self.z),))
        return ArmChain(
            self.k_p, (FreeSpace(self.O), ThinLens(self.f), FreeSpace(self.z - self.z2))
        )
