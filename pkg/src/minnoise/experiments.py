"""Single-run and ensemble pipelines: integrate, detect extrema, compare with predictions.

Each realization draws its noise from its own substream keyed by the
realization index, so results do not depend on how many worker threads
run the ensemble.  Aggregation always follows realization order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .analysis import (
    OscillationRecord,
    SpatialShiftReport,
    detect_extrema,
    ou_frequency_prediction,
    reference_frequency,
    spatial_shift_report,
)
from .errors import ConfigError, NoOscillationError
from .integrator import IntegrationConfig, Trajectory, integrate
from .model import ModelParams, grid
from .noise import (
    NoiseRealization,
    OUConfig,
    build_spatial_covariance,
    sample_spatial_field,
    temporal_realization,
)
from .spectral import g_hat_11, spectral_report

DEFAULT_TRANSIENT = 200.0


def oscillation_record(traj: Trajectory, transient: float = DEFAULT_TRANSIENT, reference_period: float | None = None, probe: str = "left") -> OscillationRecord:
    """Extrema of the rho_d probe after the transient."""
    if transient >= traj.probe_t[-1]:
        raise ConfigError(f"transient {transient} s covers the whole run")
    keep = traj.probe_t >= transient
    series = traj.probe_left if probe == "left" else traj.probe_right
    return detect_extrema(traj.probe_t[keep], series[keep], reference_period)


@dataclass(frozen=True)
class Reference:
    """Unperturbed run summary used to normalize frequency shifts."""

    period: float
    theta1_ref: float
    theta1_eig: float
    ghat_imag: float
    ghat_real: float
    max_abs_null_shift: float


@lru_cache(maxsize=32)
def reference(params: ModelParams, config: IntegrationConfig, transient: float = DEFAULT_TRANSIENT) -> Reference:
    rep = spectral_report(params)
    rec = oscillation_record(integrate(params, config, report=rep), transient)
    theta = reference_frequency(rec)
    gh = g_hat_11(params, report=rep)
    return Reference(
        period=rec.period(),
        theta1_ref=theta,
        theta1_eig=rep.theta1,
        ghat_imag=gh.imag,
        ghat_real=gh.real,
        max_abs_null_shift=float(np.max(np.abs(rec.shifts(theta)))),
    )


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- temporal noise -----------------------------------------------------------------

@dataclass
class TemporalResult:
    index: int
    centers: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray
    trace: NoiseRealization | None = field(default=None, repr=False)


def temporal_run(params: ModelParams, config: IntegrationConfig, ou: OUConfig, epsilon: float, index: int = 0,
                 transient: float = DEFAULT_TRANSIENT, x0="stationary", keep_trace: bool = False) -> TemporalResult:
    ref = reference(params, config, transient)
    if abs(ou.dt_sample - config.dt) > 1e-12 and ou.dt_sample < config.dt:
        raise ConfigError("noise sample spacing must not be finer than the time step")
    trace = temporal_realization(ou, config.t_end, index, x0)
    traj = integrate(params, config, temporal=trace, epsilon=epsilon)
    try:
        rec = oscillation_record(traj, transient, ref.period)
    except NoOscillationError as exc:
        raise NoOscillationError(f"realization {index}: {exc}") from exc
    return TemporalResult(
        index=index,
        centers=rec.centers,
        measured=rec.shifts(ref.theta1_ref),
        predicted=ou_frequency_prediction(trace.coords, trace.samples, rec.times, epsilon),
        trace=trace if keep_trace else None,
    )


def temporal_ensemble(params, config, ou: OUConfig, epsilon: float, n: int, workers: int = 1, **kwargs) -> list[TemporalResult]:
    if n < 1:
        raise ConfigError("ensemble size must be positive")
    return _map(lambda i: temporal_run(params, config, ou, epsilon, i, **kwargs), range(n), workers)


# -- spatial noise --------------------------------------------------------------------

def cosine_field(mode: int, N: int, L: float) -> NoiseRealization:
    """Deterministic perturbation ``cos(mode pi x / L)`` on the grid."""
    x = grid(N, L)
    return NoiseRealization("spatial", x, np.cos(mode * math.pi * x / L), {"mode": mode, "L": L}, None, 0)


def spatial_run(params: ModelParams, config: IntegrationConfig, field_: NoiseRealization, epsilon: float,
                transient: float = DEFAULT_TRANSIENT) -> SpatialShiftReport:
    ref = reference(params, config, transient)
    traj = integrate(params, config, spatial=field_, epsilon=epsilon)
    try:
        rec = oscillation_record(traj, transient, ref.period)
    except NoOscillationError as exc:
        raise NoOscillationError(f"realization {field_.index}: oscillation lost ({exc})") from exc
    return spatial_shift_report(rec, field_.samples, epsilon, ref.theta1_ref, ref.ghat_imag, ref.theta1_eig, field_.index)


def spatial_ensemble(params, config, alpha: float, epsilon: float, n: int, seed: int, workers: int = 1,
                     transient: float = DEFAULT_TRANSIENT) -> list[SpatialShiftReport]:
    if n < 1:
        raise ConfigError("ensemble size must be positive")
    cov = build_spatial_covariance(alpha, params.L, grid(config.N, params.L))

    def one(i):
        return spatial_run(params, config, sample_spatial_field(cov, epsilon, seed, i), epsilon, transient)

    return _map(one, range(n), workers)
