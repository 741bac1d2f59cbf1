import numpy as np
import pytest

from spdc_imaging.engine import Experiment, auto_dx
from spdc_imaging.geometry import ExperimentGeometry
from spdc_imaging.grid import Grid
from spdc_imaging.pump import PumpSpec

LAMBDA_P = 442e-9
K_P = 2 * np.pi / LAMBDA_P


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def imaging_geometry():
    # 25 cm lens 7 cm after the crystal, slit 34 cm before it
    return ExperimentGeometry.at_imaging_condition(0.34, 0.07, 0.25)


@pytest.fixture(scope="session")
def imaging_experiment(imaging_geometry):
    pump = PumpSpec()
    n = 512
    return Experiment(imaging_geometry, pump, Grid(n, auto_dx(imaging_geometry, pump, n, 1.3e-3)))
