"""The five observable families, computed from series-summed element tables.

All operators are taken at the evaluation time of the underlying snapshot;
the momentum integral is the quadrature sum over grid nodes.  The same code
serves the analytic path and the brute-force oracle, which both reduce their
states to the common ``ElementTables`` currency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import MomentumGrid, NumericsParams, PhysicalParams
from .evolve import ElementTables, evolve_grid

# Degenerate photon means below this return the undefined marker (nan) for Q
# instead of a huge float.
Q_MEAN_FLOOR = 1e-12
NEG_VARIANCE_TOL = 1e-10
P_NEG_FLOOR = -1e-10


@dataclass(frozen=True)
class FieldMoments:
    """First and second moments of the cavity mode at one time."""

    a_mean: complex
    a2_mean: complex
    n_mean: float


@dataclass(eq=False)
class ObservableSeries:
    """Time series of every observable plus per-time diagnostics."""

    times_lt: np.ndarray       # scaled time lambda*t
    W: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    delta_p: np.ndarray
    Q: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    trace: np.ndarray
    k_used: np.ndarray
    series_converged: np.ndarray
    pn: np.ndarray             # (T, N+1) photon distribution
    sigma_minus: np.ndarray    # complex <sigma_->(t)
    a_mean: np.ndarray         # complex <a>(t)
    a2_mean: np.ndarray
    n_mean: np.ndarray
    delta_p_paper: np.ndarray  # (M11 - M22)-weighted variant, always computed
    delta_p_consistent: np.ndarray
    mode: str
    trace_mode: str
    origin: str = "analytic"
    overflow_capped: bool = False
    negative_variance: bool = False

    def pn_at(self, lt: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times_lt - lt)))
        return self.pn[i]


def population_inversion(elem: ElementTables, ti: int) -> float:
    """W = sum_p weights * sum_n (m11 - m22)."""
    diff = (elem.m11[:, ti, :] - elem.m22[:, ti, :]).sum(axis=-1)
    return float(elem.weights @ diff)


def photon_distribution(elem: ElementTables, ti: int) -> np.ndarray:
    """P(n) = momentum-weighted (m11 + m22); roundoff negatives above the
    -1e-10 floor are clipped to zero, anything lower is left visible, and no
    renormalization is applied (normalization is a diagnostic)."""
    pn = elem.weights @ (elem.m11[:, ti, :] + elem.m22[:, ti, :])
    return np.where((pn < 0.0) & (pn > P_NEG_FLOOR), 0.0, pn)


def mandel_q(pn: np.ndarray) -> float:
    """Q = (<n^2> - <n>^2)/<n> - 1; nan marks a degenerate mean."""
    n = np.arange(pn.size)
    mean = float(n @ pn)
    if mean <= Q_MEAN_FLOOR:
        return math.nan
    second = float((n * n) @ pn)
    return (second - mean * mean) / mean - 1.0


def dipole_components(elem: ElementTables, ti: int, t: float, phys: PhysicalParams,
                      w_value: float) -> tuple[float, float, complex]:
    """F1, F2 from the slowly varying dipole quadratures
    sigma_1 = Re[<sigma_+> e^{-i omega_eg t}], sigma_2 the imaginary part;
    F_i = 1 - 4 <sigma_i>^2 - |<sigma_3>| is negative when the dipole
    component is squeezed."""
    sig_minus = complex(elem.weights @ elem.m12[:, ti, :].sum(axis=-1))
    rot = np.exp(-1j * phys.omega_eg * t)
    z = np.conj(sig_minus) * rot
    s1, s2 = z.real, z.imag
    f1 = 1.0 - 4.0 * s1 * s1 - abs(w_value)
    f2 = 1.0 - 4.0 * s2 * s2 - abs(w_value)
    return f1, f2, sig_minus


def momentum_diffusion(elem: ElementTables, ti: int, trace_mode: str) -> tuple[float, bool]:
    """Delta p = sqrt(<p^2> - <p>^2) with the momentum moments weighted by the
    printed (m11 - m22) integrand (paper_faithful) or the partial-trace sum
    (trace_consistent).  Returns (value, pathology flag); variance below
    -1e-10 marks a pathology and yields nan."""
    if trace_mode == "paper_faithful":
        occ = (elem.m11[:, ti, :] - elem.m22[:, ti, :]).sum(axis=-1)
    else:
        occ = (elem.m11[:, ti, :] + elem.m22[:, ti, :]).sum(axis=-1)
    wp = elem.weights * occ
    p1 = float(wp @ elem.nodes)
    p2 = float(wp @ (elem.nodes**2))
    var = p2 - p1 * p1
    if var < -NEG_VARIANCE_TOL:
        return math.nan, True
    return math.sqrt(max(var, 0.0)), False


def field_moments(elem: ElementTables, ti: int) -> FieldMoments:
    a1 = complex(elem.weights @ (elem.m11_a[:, ti, :] + elem.m22_a[:, ti, :]).sum(axis=-1))
    a2 = complex(elem.weights @ (elem.m11_a2[:, ti, :] + elem.m22_a2[:, ti, :]).sum(axis=-1))
    pn = elem.weights @ (elem.m11[:, ti, :] + elem.m22[:, ti, :])
    n_mean = float(np.arange(pn.size) @ pn)
    return FieldMoments(a_mean=a1, a2_mean=a2, n_mean=n_mean)


def quadrature_squeezing(m: FieldMoments, t: float, omega: float) -> tuple[float, float]:
    """S1/S2 from the rotating quadratures at frequency omega (the cavity
    frequency); S_i < 0 flags squeezing below the vacuum level."""
    z = (m.a2_mean - m.a_mean**2) * np.exp(2j * omega * t)
    common = 2.0 * (m.n_mean - abs(m.a_mean) ** 2)
    s1 = 2.0 * z.real + common
    s2 = -2.0 * z.real + common
    return float(s1), float(s2)


def build_series(elem: ElementTables, phys: PhysicalParams, trace_mode: str) -> ObservableSeries:
    """Reduce element tables to the full observable time series."""
    T = elem.times.size
    W = np.empty(T)
    F1 = np.empty(T)
    F2 = np.empty(T)
    Q = np.empty(T)
    S1 = np.empty(T)
    S2 = np.empty(T)
    dpb = np.empty(T)
    dpc = np.empty(T)
    sig = np.empty(T, dtype=complex)
    am = np.empty(T, dtype=complex)
    a2m = np.empty(T, dtype=complex)
    nm = np.empty(T)
    pn_all = np.empty((T, elem.m11.shape[-1]))
    neg_var = False
    for i, t in enumerate(elem.times):
        W[i] = population_inversion(elem, i)
        pn = photon_distribution(elem, i)
        pn_all[i] = pn
        Q[i] = mandel_q(pn)
        F1[i], F2[i], sig[i] = dipole_components(elem, i, float(t), phys, W[i])
        mom = field_moments(elem, i)
        am[i], a2m[i], nm[i] = mom.a_mean, mom.a2_mean, mom.n_mean
        S1[i], S2[i] = quadrature_squeezing(mom, float(t), phys.omega_c)
        dpb[i], bad_b = momentum_diffusion(elem, i, "paper_faithful")
        dpc[i], bad_c = momentum_diffusion(elem, i, "trace_consistent")
        neg_var = neg_var or bad_b or bad_c
    delta_p = dpb if trace_mode == "paper_faithful" else dpc
    return ObservableSeries(
        times_lt=elem.times * phys.lambda_,
        W=W, F1=F1, F2=F2, delta_p=delta_p, Q=Q, S1=S1, S2=S2,
        trace=elem.weights @ elem.trace_node,
        k_used=elem.k_used, series_converged=elem.series_converged,
        pn=pn_all, sigma_minus=sig, a_mean=am, a2_mean=a2m, n_mean=nm,
        delta_p_paper=dpb, delta_p_consistent=dpc,
        mode=elem.mode, trace_mode=trace_mode, origin=elem.origin,
        overflow_capped=elem.overflow_capped, negative_variance=neg_var,
    )


def compute_series(phys: PhysicalParams, num: NumericsParams, grid: MomentumGrid,
                   workers: int | None = None) -> ObservableSeries:
    """Run the analytic path over the configured time grid."""
    times_sec = num.scaled_times() / phys.lambda_
    elem = evolve_grid(phys, num, grid, times_sec, num.mode, workers=workers)
    return build_series(elem, phys, num.trace_mode)
