import numpy as np
import pytest

from gravojcm import NumericsParams, PhysicalParams
from gravojcm.config import MomentumGrid


def reference_params(**overrides):
    """The standard optical parameter set (q = 1e7 1/m, M = 1e-26 kg,
    omega_rec = 5e5 rad/s, lambda = 1e6, delta = 1.8e6, gamma = 7e-5,
    alpha = 2, sigma0 = 1, omega_c = 1e8)."""
    kw = dict(q=1e7, M=1e-26, lambda_=1e6, delta=1.8e6, gamma=7e-5,
              alpha=2.0, sigma0=1.0, omega_c=1e8, qg=0.0)
    kw.update(overrides)
    return PhysicalParams(**kw)


def frozen_regime_params(**overrides):
    """Scaled-down set for analytic-vs-integrator equivalence: omega_c small
    enough for explicit integration, gamma sized so phase damping acts over
    lambda*t <= 25."""
    kw = dict(q=1e7, M=1e-26, lambda_=1e6, delta=1.8e6, gamma=2e-9,
              alpha=2.0, sigma0=1.0, omega_c=2e6, qg=0.0)
    kw.update(overrides)
    return PhysicalParams(**kw)


def frozen_node(phys):
    """Momentum node where dhat + 2*omega_rec = 0, freezing the coupling
    phase; with qg = 0 the Hamiltonian is then time-independent."""
    p = (phys.omega_rec - phys.delta) / (2.0 * phys.omega_rec)
    return MomentumGrid(nodes=np.array([p]), weights=np.array([1.0]))


def single_node(p=0.0):
    return MomentumGrid(nodes=np.array([float(p)]), weights=np.array([1.0]))


def resonant_params(**overrides):
    """gamma = 0, delta = 0, negligible recoil: the plain resonant model with
    a closed-form inversion."""
    kw = dict(q=1.0, M=1.0, lambda_=1e6, delta=0.0, gamma=0.0,
              alpha=2.0, sigma0=1.0, omega_c=1e8, qg=0.0)
    kw.update(overrides)
    return PhysicalParams(**kw)


@pytest.fixture(scope="session")
def ref_phys():
    return reference_params()
