"""Deterministic data generators.

``toy_catchment`` is a small conceptual rainfall-runoff model: two
depression stores (impervious / pervious surface classes) feed a
surface linear reservoir that drains into a channel linear reservoir,
stepped with explicit Euler on the forcing grid.  It stands in for an
expensive process-based simulator, which is why it deliberately runs
as an interpreted per-step loop: downstream tooling measures surrogate
speedup against it, so this function must stay the slow path.

Storage thresholds are smoothed with cubic ramps so the outflow is a
continuously differentiable function of the parameters; polynomial
surrogates then converge quickly.

``ishigami`` and ``g_function`` are standard sensitivity benchmarks
with closed-form Sobol indices, used as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError

# Parameter boxes of the eight scaled inputs.
PARAMETER_BOUNDS: tuple[tuple[float, float], ...] = (
    (0.5, 1.1),   # x1 impervious-area fraction multiplier
    (0.5, 1.5),   # x2 overland flow path width multiplier
    (0.5, 1.5),   # x3 sub-catchment slope multiplier
    (0.5, 1.5),   # x4 impervious depression storage multiplier
    (0.5, 1.5),   # x5 impervious Manning roughness multiplier
    (0.5, 1.5),   # x6 pervious depression storage multiplier
    (0.5, 1.5),   # x7 zero-storage impervious fraction multiplier
    (1.0, 1.5),   # x8 channel Manning roughness multiplier
)
PARAMETER_NAMES = tuple(f"x{i}" for i in range(1, 9))

# All physical constants of the toy catchment in one block; the map is
# bit-reproducible given these.
AREA_HA = 160.0
IMPERVIOUS_FRACTION_AVG = 0.36
WIDTH_AVG_M = 35.7
SLOPE_AVG = 0.114
DEP_STORAGE_IMP_MM = 2.0
MANNING_IMP_AVG = 0.12
DEP_STORAGE_PERV_MM = 2.0
ZERO_STORAGE_FRACTION_AVG = 0.1904
MANNING_CHANNEL_AVG = 0.012
SURFACE_TIME_CONSTANT_S = 1800.0    # ~30 min at nominal parameters
CHANNEL_TIME_CONSTANT_S = 1200.0    # ~20 min at nominal parameters
RAMP_WIDTH_MM = 0.2
EVAP_MM_PER_STEP = 0.05
PERVIOUS_RUNOFF_COEF = 0.1
LITRES_PER_HA_MM = 1.0e4

# rate calibration constants fixing k_s = 1/1800 s^-1 and k_c = 1/1200 s^-1
# at the nominal point x = (1, ..., 1)
C_SURFACE = (1.0 / SURFACE_TIME_CONSTANT_S) / (
    math.sqrt(SLOPE_AVG) * WIDTH_AVG_M / MANNING_IMP_AVG)
C_CHANNEL = (1.0 / CHANNEL_TIME_CONSTANT_S) * MANNING_CHANNEL_AVG


@dataclass(frozen=True)
class ForcingSeries:
    """Rainfall intensities on a strictly increasing uniform time grid."""

    times: np.ndarray        # seconds
    intensities: np.ndarray  # mm/h, non-negative

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        d = np.asarray(self.intensities, dtype=np.float64)
        if t.ndim != 1 or t.shape != d.shape or t.size < 2:
            raise ShapeError("shape error: times/intensities mismatch")
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise ValidationError("time grid must be strictly increasing")
        if np.any(np.abs(dt - dt[0]) > 1e-9 * abs(dt[0])):
            raise ValidationError("time grid must be uniform")
        if np.any(d < 0):
            raise ValidationError("rainfall intensities must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "intensities", d)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def synthetic_storm(n_steps: int = 600, dt: float = 120.0) -> ForcingSeries:
    """Two superposed gamma-shaped rainfall bursts over the grid.

    Deterministic, so the full pipeline runs with no external data.
    """
    t = np.arange(n_steps + 1) * dt
    hours = t / 3600.0

    def burst(peak_mm_h, peak_hour, shape):
        theta = peak_hour / (shape - 1.0)
        z = hours / theta
        g = z ** (shape - 1.0) * np.exp(-z)
        g_peak = (shape - 1.0) ** (shape - 1.0) * np.exp(-(shape - 1.0))
        return peak_mm_h * g / g_peak

    intensity = burst(6.0, 4.0, 6.0) + burst(3.5, 8.5, 14.0)
    intensity[intensity < 1e-9] = 0.0
    return ForcingSeries(times=t, intensities=intensity)


def _smooth_indicator(level: float, threshold: float) -> float:
    # cubic ramp of the storage-full indicator, width RAMP_WIDTH_MM
    t = (level - (threshold - RAMP_WIDTH_MM)) / RAMP_WIDTH_MM
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    return t * t * (3.0 - 2.0 * t)


def _evaporation(level: float) -> float:
    # smooth taper keeps the store non-negative and the map C^1
    t = level / RAMP_WIDTH_MM
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return EVAP_MM_PER_STEP
    return EVAP_MM_PER_STEP * t * t * (3.0 - 2.0 * t)


def toy_catchment(x, forcing: ForcingSeries) -> np.ndarray:
    """Outflow series (l/s) of the toy catchment for one parameter vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (8,):
        raise ShapeError("shape error: expected 8 parameters")
    for i, (lo, hi) in enumerate(PARAMETER_BOUNDS):
        if not (lo - 1e-12 <= x[i] <= hi + 1e-12):
            raise ValidationError(
                f"parameter x{i + 1}={x[i]!r} outside [{lo}, {hi}]")

    phi = IMPERVIOUS_FRACTION_AVG * x[0]
    h_imp = DEP_STORAGE_IMP_MM * x[3]
    h_perv = DEP_STORAGE_PERV_MM * x[5]
    f_zero = ZERO_STORAGE_FRACTION_AVG * x[6]
    k_surf = C_SURFACE * math.sqrt(SLOPE_AVG * x[2]) \
        * (WIDTH_AVG_M * x[1]) / (MANNING_IMP_AVG * x[4])
    k_chan = C_CHANNEL / (MANNING_CHANNEL_AVG * x[7])

    dt = forcing.dt
    ks_dt = k_surf * dt
    kc_dt = k_chan * dt
    q_scale = AREA_HA * k_chan * LITRES_PER_HA_MM

    d_imp = 0.0
    d_perv = 0.0
    s_surf = 0.0
    s_chan = 0.0
    intensities = forcing.intensities
    n = intensities.shape[0]
    outflow = np.empty(n)
    for i in range(n):
        p = intensities[i] * dt / 3600.0   # rain depth this step, mm
        ind_imp = _smooth_indicator(d_imp, h_imp)
        ind_perv = _smooth_indicator(d_perv, h_perv)
        runoff = phi * (f_zero + (1.0 - f_zero) * ind_imp) * p \
            + (1.0 - phi) * PERVIOUS_RUNOFF_COEF * ind_perv * p
        d_imp += p * (1.0 - ind_imp) - _evaporation(d_imp)
        d_perv += p * (1.0 - ind_perv) - _evaporation(d_perv)
        surf_out = ks_dt * s_surf
        s_surf += runoff - surf_out
        s_chan += surf_out - kc_dt * s_chan
        outflow[i] = q_scale * s_chan
    return outflow


def simulate_design(points: np.ndarray, forcing: ForcingSeries) -> np.ndarray:
    """Row-wise toy-catchment runs, stacked into a K x (T+1) matrix."""
    points = np.asarray(points, dtype=np.float64)
    return np.stack([toy_catchment(row, forcing) for row in points])


def ishigami(x, a: float = 7.0, b: float = 0.1):
    """sin(x1) + a sin^2(x2) + b x3^4 sin(x1) on [-pi, pi]^3."""
    x = np.asarray(x, dtype=np.float64)
    pts = x[None, :] if x.ndim == 1 else x
    if pts.shape[-1] != 3:
        raise ShapeError("shape error: expected 3 inputs")
    if np.any(np.abs(pts) > np.pi + 1e-12):
        raise ValidationError("inputs must lie in [-pi, pi]^3")
    val = np.sin(pts[:, 0]) + a * np.sin(pts[:, 1]) ** 2 \
        + b * pts[:, 2] ** 4 * np.sin(pts[:, 0])
    return float(val[0]) if x.ndim == 1 else val


def ishigami_analytic_indices(a: float = 7.0, b: float = 0.1):
    """Closed-form first-order and total Sobol indices of the benchmark.

    Returns (S1, S2, S3, T1, T2, T3).
    """
    pi4 = math.pi**4
    pi8 = math.pi**8
    total = a**2 / 8.0 + b * pi4 / 5.0 + b**2 * pi8 / 18.0 + 0.5
    v1 = 0.5 * (1.0 + b * pi4 / 5.0) ** 2
    v2 = a**2 / 8.0
    v13 = b**2 * pi8 * (1.0 / 18.0 - 1.0 / 50.0)
    s1, s2, s3 = v1 / total, v2 / total, 0.0
    return s1, s2, s3, (v1 + v13) / total, s2, v13 / total


def g_function(x, a):
    """Sobol' G function prod_i (|4 x_i - 2| + a_i) / (1 + a_i) on [0, 1]^M."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    pts = x[None, :] if x.ndim == 1 else x
    if pts.shape[-1] != a.shape[0]:
        raise ShapeError("shape error: inputs do not match coefficient count")
    if np.any(a < 0):
        raise ValidationError("coefficients must be non-negative")
    if np.any(pts < -1e-12) or np.any(pts > 1.0 + 1e-12):
        raise ValidationError("inputs must lie in [0, 1]^M")
    vals = np.prod((np.abs(4.0 * pts - 2.0) + a) / (1.0 + a), axis=1)
    return float(vals[0]) if x.ndim == 1 else vals


def g_function_analytic_first_order(a) -> np.ndarray:
    """First-order indices: V_i = 1/(3 (1+a_i)^2), V = prod(1+V_i) - 1."""
    a = np.asarray(a, dtype=np.float64)
    v_i = 1.0 / (3.0 * (1.0 + a) ** 2)
    total = np.prod(1.0 + v_i) - 1.0
    return v_i / total
