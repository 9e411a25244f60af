import os

# Keep BLAS single-threaded: the suite parallelizes over replicates, and the
# acceptance studies spawn their own worker processes.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest

from spatialcrt.design import ScenarioConfig
from spatialcrt.geometry import KernelFamily, KernelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def small_scenario(label="toy", icc=0.1, f=0.5, phi=1.0, rows=2, cols=2, m=5,
                   theta=0.5, randomization="simple_1to1", sigma_w2=1.0,
                   seed=0) -> ScenarioConfig:
    """A cheap scenario for fast end-to-end tests (N = rows*cols*m)."""
    return ScenarioConfig(
        label=label, icc=icc, f=f, sigma_w2=sigma_w2, phi=phi,
        kernel=KernelSpec(family=KernelFamily.EXPONENTIAL, phi=phi),
        grid=(rows, cols, 1.0), m=m, theta=theta,
        randomization=randomization, seed=seed)
