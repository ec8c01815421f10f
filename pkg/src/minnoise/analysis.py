"""Oscillation observables and the linear-theory predictions they are compared with.

Extrema of a probe series are located with a hysteresis detector and
refined by a parabola through three samples.  Consecutive extrema
alternate between maxima and minima, so ``t_{j+1} - t_{j-1}`` spans one
full period; the relative frequency shift of that interval is
``(T - dt_j) / dt_j``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import periodogram

from .errors import ConfigError, MinNoiseError, NoOscillationError
from .model import trapezoid_weights
from .noise import LN2, OUConfig, ou_autocorr_analytic

HYSTERESIS_FRACTION = 0.4


# -- extrema -------------------------------------------------------------------

@dataclass
class OscillationRecord:
    times: np.ndarray  # extrema times, refined
    kinds: np.ndarray  # +1 maximum, -1 minimum
    values: np.ndarray
    theta1_ref: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        """Times t_j of the interior extrema that own an interval."""
        return self.times[1:-1]

    @property
    def intervals(self) -> np.ndarray:
        """``t_{j+1} - t_{j-1}``, one full period per interior extremum."""
        return self.times[2:] - self.times[:-2]

    def period(self) -> float:
        """Mean spacing of same-kind extrema."""
        return float(np.mean(self.intervals))

    def shifts(self, theta1_ref: float | None = None) -> np.ndarray:
        theta = theta1_ref if theta1_ref is not None else self.theta1_ref
        if theta is None:
            raise ConfigError("a reference frequency is needed for frequency shifts")
        return instantaneous_frequency(self.intervals, theta)[0]


def _refine(t, v, i):
    """Vertex of the parabola through samples i-1, i, i+1 (uniform or not)."""
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    v0, v1, v2 = v[i - 1], v[i], v[i + 1]
    h1, h2 = t1 - t0, t2 - t1
    d1, d2 = (v1 - v0) / h1, (v2 - v1) / h2
    curv = (d2 - d1) / (h1 + h2)
    if curv == 0:
        return t1, v1
    # derivative of the interpolant, linear in t, vanishes at the vertex
    slope_mid = (d1 * h2 + d2 * h1) / (h1 + h2)  # derivative at t1
    dt = -slope_mid / (2 * curv)
    dt = min(max(dt, -h1), h2)
    return t1 + dt, v1 + slope_mid * dt + curv * dt * dt


def detect_extrema(t, v, reference_period: float | None = None, fraction: float = HYSTERESIS_FRACTION) -> OscillationRecord:
    """Alternating maxima and minima of a probe series.

    A candidate extremum is accepted once the series has moved away from
    it by ``fraction`` of the total range, which suppresses secondary
    humps smaller than that.  Extrema on the first or last sample are
    dropped because they cannot be refined.  With ``reference_period``
    set, adjacent pairs closer than a quarter period are removed as noise.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.shape != v.shape or t.size <= 3:
        raise NoOscillationError("no oscillation detected: series too short")
    span = float(np.ptp(v))
    if not span > 1e-12 * max(1.0, float(np.max(np.abs(v)))):
        raise NoOscillationError("no oscillation detected: series is constant")
    h = fraction * span
    found = []
    hi = lo = 0
    state = 0  # 0 undecided, +1 looking for a maximum, -1 for a minimum
    for n in range(1, v.size):
        x = v[n]
        if x > v[hi]:
            hi = n
        if x < v[lo]:
            lo = n
        if state >= 0 and v[hi] - x >= h and hi < n:
            found.append((hi, 1))
            state, lo = -1, n
        elif state <= 0 and x - v[lo] >= h and lo < n:
            found.append((lo, -1))
            state, hi = 1, n
    pairs = [(i, k) for i, k in found if 0 < i < v.size - 1]
    if reference_period is not None:
        pairs = _drop_close_pairs(t, pairs, reference_period / 4)
    if len(pairs) < 3:
        raise NoOscillationError(f"no oscillation detected: {len(pairs)} extrema found")
    times, values = zip(*(_refine(t, v, i) for i, _ in pairs))
    return OscillationRecord(np.array(times), np.array([k for _, k in pairs]), np.array(values))


def _drop_close_pairs(t, pairs, min_gap):
    pairs = list(pairs)
    k = 0
    while k < len(pairs) - 1:
        if t[pairs[k + 1][0]] - t[pairs[k][0]] < min_gap:
            del pairs[k:k + 2]
            k = max(k - 1, 0)
        else:
            k += 1
    return pairs


def instantaneous_frequency(intervals, theta1_ref: float):
    """Relative shifts ``(T - dt_j)/dt_j`` and frequencies ``theta1 (1 + shift)``."""
    dtj = np.asarray(intervals, dtype=float)
    if np.any(dtj <= 0):
        raise MinNoiseError("non-positive extrema interval (extrema out of order)")
    T = 2 * math.pi / theta1_ref
    shift = (T - dtj) / dtj
    return shift, theta1_ref * (1 + shift)


def reference_frequency(record: OscillationRecord) -> float:
    """``2 pi / period`` from same-kind extrema spacing."""
    return 2 * math.pi / record.period()


# -- temporal noise ---------------------------------------------------------

def _window_averages(t, y, starts, ends):
    """Trapezoidal averages of a sampled series over [start, end] windows."""
    t = np.asarray(t, dtype=float)
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    if starts.size and (starts.min() < t[0] - 1e-9 or ends.max() > t[-1] + 1e-9):
        raise ConfigError(f"noise trace [{t[0]}, {t[-1]}] does not cover [{starts.min()}, {ends.max()}]")
    gaps = np.diff(t)
    if gaps.size and gaps.max() > 1.5 * np.median(gaps):
        raise ConfigError("noise trace has a gap")
    cum = cumulative_trapezoid(y, t, initial=0.0, axis=-1)
    if cum.ndim == 1:
        integral = np.interp(ends, t, cum) - np.interp(starts, t, cum)
    else:
        integral = np.array([np.interp(ends, t, c) - np.interp(starts, t, c) for c in cum])
    return integral / (ends - starts)


def ou_frequency_prediction(t_trace, Y, extrema_times, epsilon: float) -> np.ndarray:
    """Predicted shift per interval, ``(eps/dt_j) int_{t_{j-1}}^{t_{j+1}} (Y - 1)``.

    With ``dt_j = t_{j+1} - t_{j-1}`` a constant ``Y = 1 + a`` returns
    ``eps a``.
    """
    te = np.asarray(extrema_times, dtype=float)
    if te.size < 3:
        raise ConfigError("need at least three extrema")
    return epsilon * _window_averages(t_trace, np.asarray(Y, dtype=float) - 1.0, te[:-2], te[2:])


def tracking_discrepancy(measured, predicted) -> dict:
    """RMS of measured minus predicted relative to the RMS predicted signal."""
    m = np.concatenate([np.ravel(x) for x in measured]) if isinstance(measured, (list, tuple)) else np.ravel(measured)
    p = np.concatenate([np.ravel(x) for x in predicted]) if isinstance(predicted, (list, tuple)) else np.ravel(predicted)
    rms_err = float(np.sqrt(np.mean((m - p) ** 2)))
    rms_sig = float(np.sqrt(np.mean(p ** 2)))
    slope = float(np.dot(m, p) / np.dot(p, p)) if rms_sig > 0 else math.nan
    return {"rms_error": rms_err, "rms_signal": rms_sig, "ratio": rms_err / rms_sig if rms_sig else math.inf, "gain": slope, "n": int(m.size)}


@dataclass
class FrequencyAutocorr:
    lags: np.ndarray
    measured: np.ndarray  # scaled so lag 0 equals 1
    analytic: np.ndarray
    raw_lag0: float
    n_realizations: int
    mode: str

    def rows(self):
        return zip(self.lags, self.measured, self.analytic)


def frequency_autocorrelation(shifts, centers, tau: float, c: float | None = None, mode: str = "averaged") -> FrequencyAutocorr:
    """Ensemble autocorrelation of per-interval shifts against extrema index lag.

    ``mode="first"`` correlates the first interval with the k-th one;
    ``mode="averaged"`` averages over all interval origins, which uses the
    stationarity of the noise.  Lags are the mean centre-time differences.
    """
    if len(shifts) < 2:
        raise ConfigError("need at least two realizations")
    if mode not in ("first", "averaged"):
        raise ConfigError(f"mode must be 'first' or 'averaged', got {mode!r}")
    n = min(len(s) for s in shifts)
    if any(len(s) != n for s in shifts) or any(len(ct) != len(s) for ct, s in zip(centers, shifts)):
        warnings.warn(f"realizations have different interval counts; truncating to {n}", RuntimeWarning, stacklevel=2)
    D = np.array([np.asarray(s[:n], dtype=float) for s in shifts])
    Tc = np.array([np.asarray(ct[:n], dtype=float) for ct in centers])
    acc = np.empty(n)
    lags = np.empty(n)
    for k in range(n):
        if mode == "first":
            acc[k] = np.mean(D[:, 0] * D[:, k])
            lags[k] = np.mean(Tc[:, k] - Tc[:, 0])
        else:
            acc[k] = np.mean(D[:, : n - k] * D[:, k:])
            lags[k] = np.mean(Tc[:, k:] - Tc[:, : n - k])
    if acc[0] <= 0:
        raise NoOscillationError("zero variance in frequency shifts")
    c = 2 * LN2 / tau if c is None else c
    analytic = ou_autocorr_analytic(lags, 0.0, OUConfig(tau=tau, c=c))
    return FrequencyAutocorr(lags, acc / acc[0], analytic, float(acc[0]), len(shifts), mode)


def small_lag_slope(lags, values, max_lag: float) -> float:
    """Least-squares slope of ``values - 1`` through the origin for ``0 < lag <= max_lag``."""
    lags = np.asarray(lags, dtype=float)
    vals = np.asarray(values, dtype=float)
    m = (lags > 0) & (lags <= max_lag)
    if not np.any(m):
        raise ConfigError("no lags inside the small-lag window")
    return float(np.dot(lags[m], vals[m] - 1.0) / np.dot(lags[m], lags[m]))


def kappa_diagnostics(t, Y_ensemble, theta1: float, interval: float | None = None) -> dict:
    """Ensemble diagnostics of ``kappa_t = Y - 1``.

    Returns the running mean ``(1/t) int <kappa_t>``, the mean square of
    window averages over windows of length ``interval`` (default one
    period ``2 pi / theta1``) spaced half a window apart, and
    ``|int_0^t e^{-2 i theta1 s} <kappa_t> ds|``.
    """
    t = np.asarray(t, dtype=float)
    K = np.atleast_2d(np.asarray(Y_ensemble, dtype=float)) - 1.0
    mean_k = K.mean(axis=0)
    cum = cumulative_trapezoid(mean_k, t, initial=0.0)
    elapsed = t - t[0]
    running = np.divide(cum, elapsed, out=np.zeros_like(cum), where=elapsed > 0)
    phase = np.exp(-2j * theta1 * t) * mean_k
    osc = np.abs(cumulative_trapezoid(phase, t, initial=0.0))
    width = 2 * math.pi / theta1 if interval is None else interval
    starts = np.arange(t[0], t[-1] - width + 1e-12, width / 2)
    averages = _window_averages(t, K, starts, starts + width)
    return {
        "t": t,
        "running_mean": running,
        "window_centers": starts + width / 2,
        "window_mean_square": np.mean(np.atleast_2d(averages) ** 2, axis=0),
        "oscillating_integral": osc,
    }


def amplitude_modulation(t, Y, epsilon: float, ghat_real: float) -> np.ndarray:
    """Log-amplitude drift ``eps Re(G11) int_0^t kappa_t``; diagnostic only."""
    return epsilon * ghat_real * cumulative_trapezoid(np.asarray(Y, dtype=float) - 1.0, t, initial=0.0)


# -- spatial noise --------------------------------------------------------------

def cosine_projection_vector(N: int, mode: int) -> np.ndarray:
    """Weights ``a`` with ``a @ field`` the coefficient of ``cos(mode pi x / L)``.

    Trapezoidal inner product on N + 1 points: ``(2/N) sum w_i f_i cos(mode pi i/N)``,
    exact for grid cosines with ``1 <= mode <= N - 1``.
    """
    if int(mode) != mode or mode < 1:
        raise ConfigError(f"mode must be a positive integer, got {mode}")
    i = np.arange(N + 1)
    return 2.0 / N * trapezoid_weights(N + 1) * np.cos(mode * np.pi * i / N)


def dct_coefficient(field, mode: int, mean_tol: float = 1e-8) -> float:
    """Cosine coefficient of a zero-mean field sampled on a uniform grid."""
    f = np.asarray(field, dtype=float)
    w = trapezoid_weights(f.size)
    mean = float(f @ w / w.sum())
    if abs(mean) > mean_tol * max(1.0, float(np.max(np.abs(f)))):
        raise ConfigError(f"field mean {mean:.3g} is not zero")
    return float(cosine_projection_vector(f.size - 1, mode) @ f)


def dct_mode2(field) -> float:
    return dct_coefficient(field, 2)


@dataclass
class SpatialShiftReport:
    kappa_hat_x2: float
    epsilon: float
    predicted: float  # with Im(G11) from the eigenbasis
    predicted_shortcut: float  # with Im(G11) replaced by theta1
    measured: float
    n_intervals: int
    index: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def spatial_shift_report(record: OscillationRecord, kappa_x, epsilon: float, theta1_ref: float, ghat_imag: float, theta1_eig: float, index: int = 0) -> SpatialShiftReport:
    """Measured mean shift of a spatially perturbed run against ``eps kappa_hat_2 / 2``."""
    k2 = dct_mode2(kappa_x)
    shifts = record.shifts(theta1_ref)
    if shifts.size == 0:
        raise NoOscillationError(f"realization {index}: no complete intervals")
    return SpatialShiftReport(
        kappa_hat_x2=k2,
        epsilon=epsilon,
        predicted=0.5 * epsilon * k2 * ghat_imag / theta1_eig,
        predicted_shortcut=0.5 * epsilon * k2,
        measured=float(np.mean(shifts)),
        n_intervals=int(shifts.size),
        index=index,
    )


def ensemble_spatial_summary(reports, exact_k2_variance: float | None = None, ghat_ratio: float = 1.0) -> dict:
    """``s_x = sqrt(<shift^2>)`` against ``eps/2 sqrt(<kappa_hat_2^2>)``."""
    if not reports:
        raise ConfigError("empty ensemble")
    eps = reports[0].epsilon
    meas = np.array([r.measured for r in reports])
    k2 = np.array([r.kappa_hat_x2 for r in reports])
    out = {
        "n": len(reports),
        "s_x_measured": float(np.sqrt(np.mean(meas ** 2))),
        "s_x_theory": 0.5 * eps * float(np.sqrt(np.mean(k2 ** 2))) * ghat_ratio,
        "mean_k2_squared": float(np.mean(k2 ** 2)),
    }
    if exact_k2_variance is not None:
        out["s_x_theory_exact"] = 0.5 * eps * math.sqrt(exact_k2_variance) * ghat_ratio
    return out


def probe_periodogram(t, v):
    """Plain periodogram of a uniformly sampled probe; returns (frequency Hz, power)."""
    t = np.asarray(t, dtype=float)
    return periodogram(np.asarray(v, dtype=float), fs=1.0 / (t[1] - t[0]), detrend="constant")
