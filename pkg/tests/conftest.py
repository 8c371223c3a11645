import os

# Keep BLAS single-threaded: the suite's matrices are small enough that a
# thread pool only adds latency, and worker-process tests assume it.
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from spde2d.model import ModelParams


@pytest.fixture
def reference_params() -> ModelParams:
    """Reference coefficient set used throughout the experiments."""
    return ModelParams(theta0=0.0, theta1=0.2, eta1=0.2, theta2=0.2,
                       sigma=1.0, alpha=0.5)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)
