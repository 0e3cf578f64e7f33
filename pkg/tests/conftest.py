import numpy as np
import pytest

from sirswitch import Incidence, SirsModel, validate_generator


def bilinear_model(beta=0.5, mu=0.1, rho=0.05, gamma1=0.2, gamma2=0.05, sigma=0.2, K=1.0):
    """Single-regime model with constant incidence; lambda has a closed form."""
    return SirsModel(K=K, mu=[mu], rho=[rho], gamma1=[gamma1], gamma2=[gamma2],
                     f1=(Incidence.constant(beta),), f2=(Incidence.constant(sigma),),
                     chain=validate_generator([[0.0]]))


def two_regime_model(betas=(0.1, 0.5), mu=0.1, rho=0.08, gamma1=0.2, gamma2=0.2,
                     sigma=0.2, Q=((-1.0, 1.0), (2.0, -2.0))):
    """Two-regime bilinear model; default gives g = (-0.3, 0.1), pi = (2/3, 1/3)."""
    m0 = len(betas)
    return SirsModel(K=1.0, mu=[mu] * m0, rho=[rho] * m0, gamma1=[gamma1] * m0,
                     gamma2=[gamma2] * m0,
                     f1=tuple(Incidence.constant(b) for b in betas),
                     f2=tuple(Incidence.constant(sigma) for _ in betas),
                     chain=validate_generator([list(r) for r in Q]))


@pytest.fixture
def model_028():
    """The lambda = 0.28 single-regime bilinear model."""
    return bilinear_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
