import math

import numpy as np
import pytest

from gravojcm import build_momentum_grid, coherent_weights, evolve_grid
from gravojcm.config import MomentumGrid, NumericsParams
from gravojcm.observables import build_series, compute_series, mandel_q

from conftest import frozen_node, frozen_regime_params, reference_params, resonant_params, single_node


@pytest.fixture(scope="module")
def ref_series():
    phys = reference_params()
    num = NumericsParams(n_max=28, p_nodes=21, t_steps=60, t_end=25.0)
    grid = build_momentum_grid(1.0, 21)
    return phys, compute_series(phys, num, grid)


def test_initial_conditions(ref_series):
    phys, s = ref_series
    assert s.W[0] == pytest.approx(1.0, abs=1e-12)
    assert s.F1[0] == pytest.approx(0.0, abs=1e-12)
    assert s.F2[0] == pytest.approx(0.0, abs=1e-12)
    assert s.Q[0] == pytest.approx(0.0, abs=1e-12)
    assert s.S1[0] == pytest.approx(0.0, abs=1e-11)
    assert s.S2[0] == pytest.approx(0.0, abs=1e-11)
    assert s.delta_p[0] == pytest.approx(0.5, abs=1e-12)
    pn = s.pn[0]
    w2 = np.abs(coherent_weights(2.0, 28)) ** 2
    assert np.allclose(pn, w2, atol=1e-14)


def test_inversion_bounds(ref_series):
    _, s = ref_series
    assert np.all(np.abs(s.W) <= 1.0 + 1e-12)


def test_distribution_normalized(ref_series):
    _, s = ref_series
    assert np.max(np.abs(s.pn.sum(axis=1) - 1.0)) < 1e-6
    assert np.min(s.pn) >= -1e-10


def test_excitation_conservation(ref_series):
    _, s = ref_series
    exc = s.n_mean + 0.5 * (s.W + 1.0)
    assert np.max(np.abs(exc - 5.0)) < 1e-6


def test_heisenberg_and_cauchy_schwarz(ref_series):
    _, s = ref_series
    assert np.min((s.S1 + 1.0) * (s.S2 + 1.0)) >= 1.0 - 1e-6
    assert np.max(np.abs(s.a_mean) ** 2 - s.n_mean) <= 1e-12


def test_resonant_inversion_closed_form():
    # gamma = 0, resonance, negligible recoil: W = sum |w_n|^2 cos(2 lam sqrt(n+1) t)
    phys = resonant_params()
    num = NumericsParams(n_max=28, p_nodes=1, t_steps=64, t_end=25.0)
    s = compute_series(phys, num, single_node(0.0))
    w2 = np.abs(coherent_weights(2.0, 28)) ** 2
    n = np.arange(29)
    ref = np.array([
        float(w2 @ np.cos(2.0 * phys.lambda_ * np.sqrt(n + 1.0) * t))
        for t in s.times_lt / phys.lambda_
    ])
    assert np.max(np.abs(s.W - ref)) < 1e-8


def test_mean_momentum_vanishes_on_symmetric_grid():
    # per-node trace is 1 up to the truncation tail, so n_max must keep the
    # tail below the 1e-10 assertion
    phys = frozen_regime_params()
    num = NumericsParams(n_max=26, p_nodes=11, t_steps=12, t_end=25.0)
    grid = build_momentum_grid(1.0, 11)
    elem = evolve_grid(phys, num, grid, num.scaled_times() / phys.lambda_, "block_exact")
    occ = elem.m11.sum(axis=-1) + elem.m22.sum(axis=-1)
    p_mean = (grid.weights[:, None] * occ * grid.nodes[:, None]).sum(axis=0)
    assert np.max(np.abs(p_mean)) < 1e-10


def test_momentum_diffusion_modes_agree_at_t0():
    phys = reference_params()
    num = NumericsParams(n_max=28, p_nodes=21, t_steps=3, t_end=25.0)
    grid = build_momentum_grid(1.0, 21)
    sa = compute_series(phys, num, grid)
    assert sa.delta_p_paper[0] == pytest.approx(0.5, abs=1e-12)
    assert sa.delta_p_consistent[0] == pytest.approx(0.5, abs=1e-12)
    # a phase-damping channel alone cannot move probability between nodes
    assert np.max(np.abs(sa.delta_p_consistent - 0.5)) < 1e-9


def test_mandel_two_point_distribution():
    pn = np.zeros(6)
    pn[0] = pn[1] = 0.5
    assert mandel_q(pn) == pytest.approx(-0.5, rel=1e-14)


def test_mandel_degenerate_marker():
    pn = np.zeros(4)
    pn[0] = 1.0
    assert math.isnan(mandel_q(pn))


def test_dipole_coherence_magnitude_bound(ref_series):
    _, s = ref_series
    # |<sigma_->| <= 1/2 for any state
    assert np.max(np.abs(s.sigma_minus)) <= 0.5 + 1e-12


def test_f_range(ref_series):
    _, s = ref_series
    assert np.all(s.F1 >= -1.0 - 1e-12) and np.all(s.F1 <= 1.0 + 1e-12)
    assert np.all(s.F2 >= -1.0 - 1e-12)


def test_uncertainty_pair_not_both_squeezed_at_bound():
    # when dipole squeezing shows up, F1 and F2 are never both negative
    # together with |W| at its bound; checked as the product inequality
    lam = 3e3
    phys = reference_params(q=1e7, M=8.3333333333333334e-23, lambda_=lam,
                            delta=0.5 * lam, gamma=3e-10, alpha=0.5,
                            omega_c=100 * lam)
    num = NumericsParams(n_max=16, p_nodes=21, t_steps=200, t_end=50.0)
    grid = build_momentum_grid(1.0, 21)
    s = compute_series(phys, num, grid)
    assert np.min(s.F1) < 0  # squeezing occurs in this configuration
    both = (s.F1 < -1e-9) & (s.F2 < -1e-9)
    assert not np.any(both)


def test_pn_snapshot_lookup(ref_series):
    _, s = ref_series
    pn = s.pn_at(0.0)
    assert pn.shape == (29,)
    assert pn.sum() == pytest.approx(1.0, abs=1e-9)
