"""Run configuration: physical constants, numerical controls, the momentum
quadrature grid, and the initial atom-field state.

Unit conventions
----------------
All frequencies, detunings and couplings are angular (rad/s); times are in
seconds, with the scaled time ``lambda * t`` used for plotting and time grids.
The center-of-mass momentum ``p`` is measured in recoil units ``hbar*q``, so
the Doppler term ``q.p/M`` equals ``2*omega_rec*p``.

The recoil frequency is derived as ``omega_rec = HBAR * q**2 / (2*M)`` with
``HBAR = 1e-34 J s``.  The rounded value (rather than 1.0546e-34) makes the
standard optical parameter set (q = 1e7 1/m, M = 1e-26 kg) give
``omega_rec = 5e5 rad/s`` exactly, matching the convention the reference
parameter values were quoted in.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HBAR = 1e-34

MODES = ("paper_faithful", "block_exact")
TRACE_MODES = ("paper_faithful", "trace_consistent")

# Coherent-state tail mass allowed beyond the Fock truncation.
TAIL_TOL = 1e-12
# Gauss-Hermite recurrences degrade beyond a few hundred nodes.
MAX_P_NODES = 513


class ConfigError(ValueError):
    """Invalid run configuration; the message lists every violated invariant."""


@dataclass(frozen=True)
class PhysicalParams:
    """All physical constants and rates of the model.

    ``qg`` is the scalar product q.g (rad/s^2) driving the gravitational
    detuning ramp; it is an independent knob that overrides ``q * g_accel``.
    ``delta0`` is carried along with the standard parameter set but enters no
    implemented formula; it is echoed in run records only.
    """

    q: float
    M: float
    lambda_: float
    delta: float
    gamma: float
    alpha: complex
    sigma0: float
    omega_c: float = 1.0e8
    qg: float = 0.0
    g_accel: float = 9.8
    delta0: float = 8.5e7
    omega_rec: float = field(init=False)

    def __post_init__(self):
        wrec = HBAR * self.q**2 / (2.0 * self.M) if self.M > 0 else math.nan
        object.__setattr__(self, "omega_rec", wrec)
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def omega_eg(self) -> float:
        """Atomic transition frequency; only Delta = omega_eg - omega_c is
        ever given, so omega_eg is reconstructed as omega_c + Delta."""
        return self.omega_c + self.delta


@dataclass(frozen=True)
class NumericsParams:
    """Numerical controls: truncations, tolerances, grids, formula modes."""

    n_max: int = 28
    k_max: int = 200
    series_tol: float = 1e-12
    p_nodes: int = 21
    t_start: float = 0.0
    t_end: float = 25.0
    t_steps: int = 201
    mode: str = "block_exact"
    trace_mode: str = "trace_consistent"
    pn_snapshot_times: tuple = ()

    def scaled_times(self) -> np.ndarray:
        """Time grid in scaled units lambda*t."""
        return np.linspace(self.t_start, self.t_end, self.t_steps)


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    """Quadrature nodes/weights for the center-of-mass momentum distribution
    |phi(p)|^2 ~ exp(-2 p^2 / sigma0^2), p in recoil units."""

    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class InitialState:
    """Coherent field amplitudes w_n(0), atom prepared excited, and the
    momentum grid the run integrates over."""

    field_weights: np.ndarray
    momentum: MomentumGrid
    atom_excited: bool = True


def coherent_weights(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent amplitudes w_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!) for
    n = 0..n_max, evaluated in log space so large n never overflows n!."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    if alpha == 0:
        w = np.zeros(n_max + 1, dtype=complex)
        w[0] = 1.0
        return w
    a = abs(alpha)
    logmag = -0.5 * a * a + n * math.log(a) - 0.5 * np.array(
        [math.lgamma(k + 1.0) for k in range(n_max + 1)]
    )
    phase = n * cmath.phase(alpha)
    return np.exp(logmag) * np.exp(1j * phase)


def coherent_tail(alpha: complex, n_max: int) -> float:
    """Probability mass of the coherent photon distribution beyond n_max."""
    mu = abs(complex(alpha)) ** 2
    if mu == 0.0:
        return 0.0
    terms = []
    n = n_max + 1
    while True:
        logp = -mu + n * math.log(mu) - math.lgamma(n + 1.0)
        term = math.exp(logp)
        terms.append(term)
        if term < 1e-300 or (terms and term < 1e-18 * sum(terms)) or n > n_max + 2000:
            break
        n += 1
    return math.fsum(terms)


def build_momentum_grid(sigma0: float, p_nodes: int) -> MomentumGrid:
    """Gauss-Hermite rule for the weight exp(-2 p^2 / sigma0^2).

    Substituting x = sqrt(2) p / sigma0 reduces the weight to exp(-x^2), so
    the physicists' Hermite nodes map to p = sigma0 x / sqrt(2).  Weights are
    renormalized to sum to one (|phi|^2 as quoted is not square-normalized,
    and Tr rho(0) = 1 requires unit total weight).
    """
    if p_nodes < 1:
        raise ValueError("p_nodes must be >= 1")
    if p_nodes % 2 == 0:
        raise ValueError("p_nodes must be odd so the grid contains p = 0")
    if p_nodes > MAX_P_NODES:
        raise ValueError(f"p_nodes above {MAX_P_NODES} is numerically unstable")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be > 0")
    x, w = np.polynomial.hermite.hermgauss(p_nodes)
    nodes = sigma0 * x / math.sqrt(2.0)
    weights = w / w.sum()
    # enforce exact +/- symmetry against roundoff in the recurrence
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    return MomentumGrid(nodes=nodes, weights=weights)


def make_initial_state(phys: PhysicalParams, num: NumericsParams) -> InitialState:
    return InitialState(
        field_weights=coherent_weights(phys.alpha, num.n_max),
        momentum=build_momentum_grid(phys.sigma0, num.p_nodes),
    )


# ---------------------------------------------------------------------------
# config document parsing

_PHYS_REQUIRED = ("q", "M", "lambda", "delta", "gamma", "alpha", "sigma0")
_PHYS_OPTIONAL = {
    "omega_c": 1.0e8,
    "qg": None,  # resolved from beam_angle_rad or defaults to 0.0
    "g_accel": 9.8,
    "delta0": 8.5e7,
    "beam_angle_rad": None,
}
_NUM_DEFAULTS = {
    "n_max": 28,
    "k_max": 200,
    "series_tol": 1e-12,
    "p_nodes": 21,
    "t_start": 0.0,
    "t_end": 25.0,
    "t_steps": 201,
    "mode": "block_exact",
    "trace_mode": "trace_consistent",
    "pn_snapshot_times": (),
}


def _parse_alpha(value, errors):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    errors.append("alpha must be a number or a [re, im] pair")
    return 0j


def load_config(source) -> tuple[PhysicalParams, NumericsParams]:
    """Parse and validate a JSON config document.

    ``source`` may be a dict, a JSON string, or a path to a JSON file.  The
    document has two sections, ``physical`` and ``numerics``; unknown keys are
    rejected and all validation failures are reported together.
    """
    if isinstance(source, Path):
        try:
            doc = json.loads(source.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    elif isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    elif isinstance(source, dict):
        doc = source
    else:
        raise ConfigError(f"unsupported config source type: {type(source)!r}")

    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown_sections = set(doc) - {"physical", "numerics"}
    if unknown_sections:
        errors.append(f"unknown config sections: {sorted(unknown_sections)}")
    phys_doc = dict(doc.get("physical", {}))
    num_doc = dict(doc.get("numerics", {}))

    unknown = set(phys_doc) - set(_PHYS_REQUIRED) - set(_PHYS_OPTIONAL)
    if unknown:
        errors.append(f"unknown physical keys: {sorted(unknown)}")
    unknown = set(num_doc) - set(_NUM_DEFAULTS)
    if unknown:
        errors.append(f"unknown numerics keys: {sorted(unknown)}")

    for key in _PHYS_REQUIRED:
        if key not in phys_doc:
            errors.append(f"missing required physical parameter: {key}")
    if errors:
        raise ConfigError("; ".join(errors))

    alpha = _parse_alpha(phys_doc["alpha"], errors)
    kw = dict(
        q=float(phys_doc["q"]),
        M=float(phys_doc["M"]),
        lambda_=float(phys_doc["lambda"]),
        delta=float(phys_doc["delta"]),
        gamma=float(phys_doc["gamma"]),
        alpha=alpha,
        sigma0=float(phys_doc["sigma0"]),
        omega_c=float(phys_doc.get("omega_c", _PHYS_OPTIONAL["omega_c"])),
        g_accel=float(phys_doc.get("g_accel", _PHYS_OPTIONAL["g_accel"])),
        delta0=float(phys_doc.get("delta0", _PHYS_OPTIONAL["delta0"])),
    )
    angle = phys_doc.get("beam_angle_rad")
    if "qg" in phys_doc and angle is not None:
        errors.append("give either qg or beam_angle_rad, not both")
    if "qg" in phys_doc:
        kw["qg"] = float(phys_doc["qg"])
    elif angle is not None:
        derived = kw["q"] * kw["g_accel"] * math.cos(float(angle))
        if derived < 0:
            errors.append("beam_angle_rad must give qg in [0, q*g_accel]")
        kw["qg"] = max(derived, 0.0)
    else:
        kw["qg"] = 0.0

    nkw = dict(_NUM_DEFAULTS)
    nkw.update(num_doc)
    try:
        num = NumericsParams(
            n_max=int(nkw["n_max"]),
            k_max=int(nkw["k_max"]),
            series_tol=float(nkw["series_tol"]),
            p_nodes=int(nkw["p_nodes"]),
            t_start=float(nkw["t_start"]),
            t_end=float(nkw["t_end"]),
            t_steps=int(nkw["t_steps"]),
            mode=str(nkw["mode"]),
            trace_mode=str(nkw["trace_mode"]),
            pn_snapshot_times=tuple(float(x) for x in nkw["pn_snapshot_times"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed numerics section: {exc}") from exc

    phys = PhysicalParams(**kw)
    errors.extend(validate_physical(phys))
    errors.extend(validate_numerics(num, phys))
    if errors:
        raise ConfigError("; ".join(errors))
    return phys, num


def validate_physical(phys: PhysicalParams) -> list[str]:
    errs = []
    if not phys.M > 0:
        errs.append("M > 0 violated")
    if not phys.q > 0:
        errs.append("q > 0 violated")
    if not phys.lambda_ > 0:
        errs.append("lambda > 0 violated")
    if not phys.gamma >= 0:
        errs.append("gamma >= 0 violated")
    if not phys.sigma0 > 0:
        errs.append("sigma0 > 0 violated")
    if not phys.omega_c > 0:
        errs.append("omega_c > 0 violated")
    if not phys.qg >= 0:
        errs.append("qg >= 0 violated")
    return errs


def validate_numerics(num: NumericsParams, phys: PhysicalParams | None = None) -> list[str]:
    errs = []
    if num.n_max < 0:
        errs.append("n_max >= 0 violated")
    if num.k_max < 1:
        errs.append("k_max >= 1 violated")
    if not num.series_tol > 0:
        errs.append("series_tol > 0 violated")
    if num.p_nodes < 1 or num.p_nodes % 2 == 0:
        errs.append("p_nodes must be odd and >= 1")
    if num.p_nodes > MAX_P_NODES:
        errs.append(f"p_nodes must be <= {MAX_P_NODES}")
    if num.t_steps < 1:
        errs.append("t_steps >= 1 violated")
    if num.t_end < num.t_start or num.t_start < 0:
        errs.append("require 0 <= t_start <= t_end")
    if num.mode not in MODES:
        errs.append(f"mode must be one of {MODES}")
    if num.trace_mode not in TRACE_MODES:
        errs.append(f"trace_mode must be one of {TRACE_MODES}")
    if phys is not None and num.n_max >= 0:
        tail = coherent_tail(phys.alpha, num.n_max)
        if tail >= TAIL_TOL:
            errs.append(
                f"coherent tail weight beyond n_max={num.n_max} is {tail:.3e}"
                f" >= {TAIL_TOL:g}; raise n_max"
            )
    return errs


def resolved_config(phys: PhysicalParams, num: NumericsParams) -> dict:
    """Echo of the full configuration with every default materialized."""
    return {
        "physical": {
            "q": phys.q,
            "M": phys.M,
            "lambda": phys.lambda_,
            "delta": phys.delta,
            "gamma": phys.gamma,
            "alpha": [phys.alpha.real, phys.alpha.imag],
            "sigma0": phys.sigma0,
            "omega_c": phys.omega_c,
            "qg": phys.qg,
            "g_accel": phys.g_accel,
            "delta0": phys.delta0,
            "omega_rec": phys.omega_rec,
        },
        "numerics": {
            "n_max": num.n_max,
            "k_max": num.k_max,
            "series_tol": num.series_tol,
            "p_nodes": num.p_nodes,
            "t_start": num.t_start,
            "t_end": num.t_end,
            "t_steps": num.t_steps,
            "mode": num.mode,
            "trace_mode": num.trace_mode,
            "pn_snapshot_times": list(num.pn_snapshot_times),
        },
    }


def config_digest(resolved: dict) -> str:
    """Stable hash of the resolved physics; formula/trace modes are excluded
    so that runs of different modes over the same physics share a digest and
    stay comparable."""
    import hashlib

    payload = json.loads(json.dumps(resolved))
    payload.get("numerics", {}).pop("mode", None)
    payload.get("numerics", {}).pop("trace_mode", None)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
