import math

import numpy as np
import pytest

from gravojcm import (block_elements, coherent_weights, density_snapshot,
                      evolve_grid, psi_amplitudes, series_sum)
from gravojcm.blockalg import block_spectrum
from gravojcm.config import MomentumGrid, NumericsParams
from gravojcm.evolve import element_tables, series_depth_estimate
from gravojcm.observables import build_series
from gravojcm.oracle import build_hamiltonian

from conftest import frozen_node, frozen_regime_params, reference_params, resonant_params, single_node

MODES = ("block_exact", "paper_faithful")


# --- psi amplitudes --------------------------------------------------------

@pytest.mark.parametrize("mode", MODES)
def test_psi_initial_state(mode):
    phys = reference_params()
    amps = psi_amplitudes(0.3, 0.0, phys, 20, mode)
    w = coherent_weights(phys.alpha, 20)
    assert np.allclose(amps.psi1, w, atol=1e-15)
    assert np.max(np.abs(amps.psi2)) == 0.0
    assert np.allclose(amps.psi_base, w, atol=1e-15)


def test_psi_base_modulus_constant_without_damping():
    phys = reference_params(gamma=0.0)
    w = np.abs(coherent_weights(phys.alpha, 20))
    for t in (1e-7, 1e-5, 3e-5):
        amps = psi_amplitudes(-1.2, t, phys, 20, "block_exact")
        assert np.allclose(np.abs(amps.psi_base), w, rtol=1e-12)


def test_psi_base_decay_exponent():
    # n = 0 decay factor exp(-gamma t [wc^2/4 + lambda^2 + (dhat/4)^2]),
    # compared against direct exponent arithmetic
    phys = reference_params(gamma=1e-9, omega_c=1e8)
    t = 1e-6
    amps = psi_amplitudes(0.0, t, phys, 10, "block_exact")
    dhat = -(phys.delta + phys.omega_rec)
    expo = -phys.gamma * t * (phys.omega_c**2 * 0.25 + phys.lambda_**2 + dhat**2 / 16.0)
    w0 = math.exp(-abs(phys.alpha) ** 2 / 2.0)
    assert abs(amps.psi_base[0]) == pytest.approx(w0 * math.exp(expo), rel=1e-12)


def test_psi_amplitudes_bounded_in_exact_mode():
    phys = reference_params(qg=1.5e7)
    w = np.abs(coherent_weights(phys.alpha, 24))
    for t in (1e-6, 1e-5, 2.5e-5):
        amps = psi_amplitudes(0.7, t, phys, 24, "block_exact")
        assert np.all(np.abs(amps.psi1) <= w + 1e-15)


# --- per-k block elements --------------------------------------------------

@pytest.mark.parametrize("mode", MODES)
def test_block_elements_initial(mode):
    phys = reference_params()
    be = block_elements(0.4, 0.0, 0, phys, 16, mode)
    w2 = np.abs(coherent_weights(phys.alpha, 16)) ** 2
    assert np.allclose(be.m11, w2, atol=1e-15)
    assert np.max(be.m22) == 0.0
    assert np.max(np.abs(be.m12)) == 0.0


def test_block_elements_ground_boundary():
    # m22(0) keeps only the psi2 channel: in exact mode psi2(0) = 0 always
    phys = frozen_regime_params()
    be = block_elements(-1.3, 5e-6, 2, phys, 12, "block_exact")
    assert be.m22[0] == 0.0


@pytest.mark.parametrize("mode", MODES)
def test_block_elements_k1_match_dense_sandwich(mode):
    # H^1 rho_2 H^1 diagonals computed with a literal dense Hamiltonian on a
    # small truncation; the ground row extends one level above it.
    from gravojcm.evolve import _psi_arrays

    phys = frozen_regime_params(gamma=2e-10)
    n_max, p, t = 3, -1.3, 4e-6
    psi1, psi2, spec = _psi_arrays(p, t, phys, n_max, mode)
    nf = n_max + 2
    v = np.zeros(2 * nf, dtype=complex)
    v[: n_max + 1] = psi1
    v[nf : 2 * nf] = np.exp(1j * float(spec.theta)) * psi2
    h = build_hamiltonian(p, t, phys, n_max + 1)
    hv = h @ v
    be = block_elements(p, t, 1, phys, n_max, mode)
    ee = hv[: n_max + 1]
    gg = hv[nf : nf + n_max + 1]
    assert np.allclose(be.m11, np.abs(ee) ** 2, rtol=1e-10, atol=1e-18)
    assert np.allclose(be.m22, np.abs(gg) ** 2, rtol=1e-10, atol=1e-18)
    phase = np.exp(-1j * float(spec.theta)) if mode == "block_exact" else 1.0
    assert np.allclose(be.m12, phase * ee * np.conj(np.exp(1j * float(spec.theta)) * gg),
                       rtol=1e-10, atol=1e-18)
    nn = np.arange(n_max + 1)
    a_e = np.sqrt(nn) * ee * np.conj(np.roll(ee, 1) * (nn > 0))
    assert np.allclose(be.m11_a, a_e, rtol=1e-10, atol=1e-18)


def test_block_elements_nonnegative_diagonals():
    phys = reference_params(omega_c=2e6, gamma=1e-10)
    for k in range(3):
        be = block_elements(0.2, 8e-6, k, phys, 12, "block_exact")
        assert np.all(be.m11 >= 0.0) and np.all(be.m22 >= 0.0)


# --- adaptive series -------------------------------------------------------

def test_series_gamma_zero_returns_first_term():
    res = series_sum(lambda k: 3.25 - 1j, gamma=0.0, t=1e-5)
    assert res.value == 3.25 - 1j and res.k_reached == 0 and res.converged


def test_series_constant_terms_exponential():
    gamma, t = 0.02, 1.5
    res = series_sum(lambda k: 1.0, gamma, t, series_tol=1e-13)
    assert res.converged
    assert res.value.real == pytest.approx(math.exp(2 * gamma * t), rel=1e-12)


def test_series_adaptive_matches_fixed_length():
    # adaptive stop against a 200-term fixed summation
    gamma, t, scale = 1e-3, 0.5, 40.0
    term = lambda k: scale**k / (1.0 + k)
    res = series_sum(term, gamma, t, series_tol=1e-12, term_scale=scale)
    x = 2 * gamma * t
    # 140 log-space terms: the tail beyond is below 1e-200 of the total
    fixed = term(0) + sum(
        math.exp(k * (math.log(x) + math.log(scale)) - math.lgamma(k + 1)) / (1.0 + k)
        for k in range(1, 140))
    assert res.converged and res.k_reached < 60
    assert res.value.real == pytest.approx(fixed, rel=1e-10)


def test_series_nonconvergence_flagged():
    res = series_sum(lambda k: 1.0, gamma=10.0, t=10.0, k_max=50)
    assert not res.converged and res.k_reached == 50 and res.tail_estimate > 0


def test_series_depth_estimate_monotone():
    assert series_depth_estimate(0.0, 1e-12) == 0
    xs = [0.5, 5.0, 50.0, 5e3]
    depths = [series_depth_estimate(x, 1e-12) for x in xs]
    assert all(b > a for a, b in zip(depths, depths[1:]))


@pytest.mark.parametrize("mode", MODES)
def test_closed_form_equals_adaptive_series(mode):
    # the production path must be the exact sum of the k series; checked at a
    # scale where term-by-term summation converges inside float range
    phys = frozen_regime_params(gamma=2e-10)
    n_max, p, t = 8, -0.7, 1.3e-5
    names = ("m11", "m22", "m12", "m11_a", "m22_a", "m11_a2", "m22_a2")
    closed = element_tables(phys, n_max, np.array([p]), np.array([1.0]), np.array([t]), mode)
    rtop = phys.omega_c * (n_max + 0.5) + math.sqrt(
        (2.3e6 / 4) ** 2 + phys.lambda_**2 * (n_max + 1))
    res = series_sum(
        lambda k: np.stack([getattr(block_elements(p, t, k, phys, n_max, mode), nm) for nm in names]),
        phys.gamma, t, series_tol=1e-14, k_max=200, term_scale=rtop**2)
    assert res.converged
    for i, nm in enumerate(names):
        assert np.allclose(res.value[i], getattr(closed, nm)[0, 0], rtol=1e-10, atol=1e-13), nm


def test_partial_sums_monotone_in_k():
    # diagonal precursors are non-negative, so partial sums never decrease
    phys = frozen_regime_params(gamma=2e-10)
    n_max, p, t = 6, 0.4, 9e-6
    total = np.zeros(n_max + 1)
    prev = total.copy()
    for k in range(12):
        ck = (2 * phys.gamma * t) ** k / math.factorial(k)
        total = total + ck * block_elements(p, t, k, phys, n_max, "block_exact").m11
        assert np.all(total >= prev - 1e-18)
        prev = total.copy()


# --- closed-form grid evaluation -------------------------------------------

def test_snapshot_initial_trace():
    phys = reference_params()
    num = NumericsParams(n_max=28, p_nodes=21)
    grid = MomentumGrid(*_grid_arrays())
    snap = density_snapshot(0.0, phys, num, grid)
    assert abs(float(grid.weights @ snap.trace_node[:, 0]) - 1.0) < 1e-12


def _grid_arrays():
    from gravojcm import build_momentum_grid
    g = build_momentum_grid(1.0, 21)
    return g.nodes, g.weights


def test_unitary_node_trace_all_times():
    # gamma = 0 at a frozen node: evolution is exactly unitary
    phys = frozen_regime_params(gamma=0.0)
    grid = frozen_node(phys)
    num = NumericsParams(n_max=24, p_nodes=1, t_steps=30, t_end=25.0)
    elem = evolve_grid(phys, num, grid, num.scaled_times() / phys.lambda_, "block_exact")
    assert np.max(np.abs(elem.trace_node - elem.trace_node[0, 0])) < 1e-9


def test_trace_preserved_reference_set():
    phys = reference_params()
    num = NumericsParams(n_max=28, p_nodes=21, t_steps=50, t_end=25.0)
    from gravojcm import build_momentum_grid
    grid = build_momentum_grid(1.0, 21)
    elem = evolve_grid(phys, num, grid, num.scaled_times() / phys.lambda_, "block_exact")
    trace = grid.weights @ elem.trace_node
    assert np.max(np.abs(trace - 1.0)) < 1e-6
    assert elem.imag_residual < 1e-12
    assert np.all(elem.m11 >= -1e-12) and np.all(elem.m22 >= -1e-12)


def test_hermiticity_by_construction():
    # M21 = M12^dagger is built in; the recorded residual is the only
    # hermiticity freedom and must sit at round-off
    phys = reference_params(qg=0.5e7)
    num = NumericsParams(n_max=20, p_nodes=11, t_steps=8, t_end=25.0)
    from gravojcm import build_momentum_grid
    grid = build_momentum_grid(1.0, 11)
    elem = evolve_grid(phys, num, grid, num.scaled_times() / phys.lambda_, "block_exact")
    assert elem.imag_residual < 1e-12


def test_k_used_diagnostics():
    phys = reference_params(gamma=0.0)
    num = NumericsParams(n_max=12, p_nodes=3, t_steps=4, t_end=10.0)
    from gravojcm import build_momentum_grid
    grid = build_momentum_grid(1.0, 3)
    elem = evolve_grid(phys, num, grid, num.scaled_times() / phys.lambda_, "block_exact")
    assert np.all(elem.k_used == 0) and np.all(elem.series_converged)
    phys2 = reference_params()  # gamma 7e-5 at omega_c 1e8: depth far beyond k_max
    elem2 = evolve_grid(phys2, num, grid, num.scaled_times() / phys2.lambda_, "block_exact")
    assert not np.all(elem2.series_converged[1:])
    assert np.all(elem2.k_used <= num.k_max)


def test_paper_mode_runs_at_reference_scale():
    # printed formulas blow up at optical magnitudes; values are capped and
    # flagged, never NaN
    phys = reference_params()
    num = NumericsParams(n_max=20, p_nodes=5, t_steps=6, t_end=25.0, mode="paper_faithful")
    from gravojcm import build_momentum_grid
    grid = build_momentum_grid(1.0, 5)
    elem = evolve_grid(phys, num, grid, num.scaled_times() / phys.lambda_, "paper_faithful")
    series = build_series(elem, phys, "trace_consistent")
    assert elem.overflow_capped
    for name in ("W", "F1", "Q", "S1", "S2"):
        assert np.all(np.isfinite(getattr(series, name))), name


def test_grid_worker_count_invariance():
    phys = reference_params(omega_c=2e6, gamma=2e-9, qg=0.5e7)
    num = NumericsParams(n_max=16, p_nodes=7, t_steps=23, t_end=25.0)
    from gravojcm import build_momentum_grid
    grid = build_momentum_grid(1.0, 7)
    times = num.scaled_times() / phys.lambda_
    one = evolve_grid(phys, num, grid, times, "block_exact", workers=1)
    three = evolve_grid(phys, num, grid, times, "block_exact", workers=3)
    for name in ("m11", "m22", "m12", "m11_a", "m22_a", "m11_a2", "m22_a2"):
        a, b = getattr(one, name), getattr(three, name)
        assert np.array_equal(a, b), name
