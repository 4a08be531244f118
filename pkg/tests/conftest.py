import numpy as np
import pytest

from bct.model import Dataset, ModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def continuous_bivariate(n, rho, rng, sd=(1.0, 1.0), mean=0.0):
    """Intercept-only bivariate continuous dataset with known correlation."""
    C = np.array([[1.0, rho], [rho, 1.0]])
    Y = mean + rng.standard_normal((n, 2)) @ np.linalg.cholesky(C).T * np.asarray(sd)
    spec = ModelSpec(ordinal=(False, False), levels=(0, 0), n_covariates=1, group_sizes=(n,))
    return Dataset(
        spec=spec,
        continuous=(Y,),
        ordinal=(np.zeros((n, 0), dtype=int),),
        covariates=(np.ones((n, 1)),),
    )
