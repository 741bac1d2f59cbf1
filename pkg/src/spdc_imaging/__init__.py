"""Numerical simulation of coincidence imaging with down-converted photon pairs.

A pump beam crosses an object mask, pumps a thin nonlinear crystal, and the
twin photons travel through a lens to two scanning detectors. The package
propagates the pump's angular spectrum into the two-photon amplitude,
evaluates coincidence scans, and checks them against closed-form results.
"""

__version__ = "0.1.0"

from .detection import ScanResult, add_poisson_noise, integrate_slit
from .engine import (
    Experiment,
    Noise,
    ScanConfig,
    SupportError,
    auto_dx,
    coincidence_amplitude_direct,
    coincidence_amplitude_fast,
    run_scan,
)
from .geometry import ExperimentGeometry
from .grid import Grid, SampledField, forward_spectrum, inverse_spectrum, make_grid
from .optics import (
    Aperture,
    ArmChain,
    DoubleSlit,
    FreeSpace,
    SamplingError,
    ThinLens,
    apply_aperture,
    apply_thin_lens,
    build_arm_kernel,
    propagate_free,
)
from .pump import Gaussian, PlaneWave, PumpSpec, object_field, pump_intensity_scan, spectrum_at_crystal

__all__ = [
    "Aperture",
    "ArmChain",
    "DoubleSlit",
    "Experiment",
    "ExperimentGeometry",
    "FreeSpace",
    "Gaussian",
    "Grid",
    "Noise",
    "PlaneWave",
    "PumpSpec",
    "SampledField",
    "SamplingError",
    "ScanConfig",
    "ScanResult",
    "SupportError",
    "ThinLens",
    "add_poisson_noise",
    "apply_aperture",
    "apply_thin_lens",
    "auto_dx",
    "build_arm_kernel",
    "coincidence_amplitude_direct",
    "coincidence_amplitude_fast",
    "forward_spectrum",
    "integrate_slit",
    "inverse_spectrum",
    "make_grid",
    "object_field",
    "propagate_free",
    "pump_intensity_scan",
    "run_scan",
    "spectrum_at_crystal",
]
