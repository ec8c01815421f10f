import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minnoise.analysis import (
    OscillationRecord,
    SpatialShiftReport,
    amplitude_modulation,
    cosine_projection_vector,
    dct_coefficient,
    dct_mode2,
    detect_extrema,
    ensemble_spatial_summary,
    frequency_autocorrelation,
    instantaneous_frequency,
    kappa_diagnostics,
    ou_frequency_prediction,
    probe_periodogram,
    reference_frequency,
    small_lag_slope,
    spatial_shift_report,
    tracking_discrepancy,
)
from minnoise.errors import ConfigError, MinNoiseError, NoOscillationError
from minnoise.experiments import cosine_field, reference, spatial_run, temporal_ensemble
from minnoise.model import grid
from minnoise.noise import LN2, OUConfig, ou_autocorr_analytic, substream, temporal_realization

L = 4.5


# -- extrema -------------------------------------------------------------------

@pytest.mark.parametrize("theta", [2 * math.pi / 40, 2 * math.pi / 37.3, 0.5])
def test_extrema_of_cosine(theta):
    T = 2 * math.pi / theta
    t = np.arange(0, 6 * T, 0.01)
    rec = detect_extrema(t, np.cos(theta * t))
    k = np.round(rec.times / (T / 2))
    assert np.max(np.abs(rec.times - k * T / 2)) < 1e-4 * T
    assert np.all(rec.kinds == np.where(k % 2 == 0, 1, -1))
    assert rec.period() == pytest.approx(T, rel=1e-6)
    assert reference_frequency(rec) == pytest.approx(theta, rel=1e-6)


def test_extrema_nonuniform_sampling(rng):
    t = np.sort(rng.uniform(0, 200, 40000))
    rec = detect_extrema(t, np.sin(2 * math.pi * t / 40))
    assert np.max(np.abs(rec.times - (10 + 20 * np.arange(rec.times.size)))) < 1e-3


@given(st.floats(0.05, 0.5))
def test_extrema_alternate_and_ignore_small_humps(hump):
    t = np.arange(0, 400, 0.05)
    v = np.cos(2 * math.pi * t / 40) + hump * np.sin(2 * math.pi * t / 4)  # no mirror-tied twin extrema
    rec = detect_extrema(t, v, reference_period=40.0)
    assert np.all(rec.kinds[1:] == -rec.kinds[:-1])
    assert rec.period() == pytest.approx(40.0, rel=1e-3)


def test_constant_series_raises():
    with pytest.raises(NoOscillationError, match="no oscillation"):
        detect_extrema(np.arange(100.0), np.full(100, 3.0))


def test_too_few_extrema_raises():
    t = np.linspace(0, 1, 100)
    with pytest.raises(NoOscillationError):
        detect_extrema(t, np.sin(np.pi * t))


def test_close_pairs_removed():
    t = np.arange(0, 200, 0.01)
    v = np.cos(2 * math.pi * t / 40)
    v[(t > 99) & (t < 101)] += 1.5 * np.sin(np.pi * (t[(t > 99) & (t < 101)] - 99))
    rec = detect_extrema(t, v, reference_period=40.0)
    assert np.all(np.diff(rec.times) > 10.0)


# -- frequency formula --------------------------------------------------------------

def test_instantaneous_frequency_values():
    theta = 2 * math.pi / 40
    shift, eta = instantaneous_frequency([40.0, 39.2], theta)
    assert shift[0] == 0.0
    assert shift[1] == pytest.approx(0.020408163265306, rel=1e-12)
    assert eta[1] == pytest.approx(theta * (1 + shift[1]), rel=1e-15)


def test_instantaneous_frequency_rejects_disorder():
    with pytest.raises(MinNoiseError):
        instantaneous_frequency([40.0, -1.0], 0.15)


def test_record_shifts_need_reference():
    rec = OscillationRecord(np.array([0.0, 20.0, 40.0]), np.array([1, -1, 1]), np.zeros(3))
    with pytest.raises(ConfigError):
        rec.shifts()
    assert rec.shifts(2 * math.pi / 40) == pytest.approx([0.0])


def test_timing_precision_below_small_shift():
    # a 0.003 relative shift needs timing errors far below 0.003 T
    T = 37.3
    t = np.arange(0, 10 * T, 0.005)
    rec = detect_extrema(t, np.cos(2 * math.pi * t / T))
    shifts = rec.shifts(2 * math.pi / T)
    assert np.max(np.abs(shifts)) < 0.003 / 100


# -- temporal prediction -----------------------------------------------------------

def test_prediction_of_unit_trace():
    t = np.arange(0, 200.0, 0.01)
    assert np.array_equal(ou_frequency_prediction(t, np.ones_like(t), [10, 30, 50, 70], 0.1), np.zeros(2))


@given(st.floats(-0.5, 0.5), st.floats(0.001, 0.2))
def test_prediction_of_constant_offset(a, eps):
    t = np.arange(0, 200.0, 0.01)
    pred = ou_frequency_prediction(t, np.full_like(t, 1 + a), [10.3, 28.9, 47.1, 66.6], eps)
    assert np.allclose(pred, eps * a, rtol=1e-9, atol=1e-15)


def test_prediction_exact_for_linear_trace():
    t = np.arange(0, 100.0, 0.5)
    pred = ou_frequency_prediction(t, 1 + 0.01 * t, [10.0, 30.0, 50.0], 1.0)
    assert pred[0] == pytest.approx(0.01 * 30.0, rel=1e-12)


def test_prediction_trace_gap():
    t = np.concatenate([np.arange(0, 50, 0.01), np.arange(60, 100, 0.01)])
    with pytest.raises(ConfigError, match="gap"):
        ou_frequency_prediction(t, np.ones_like(t), [10, 30, 50], 0.1)


def test_prediction_trace_too_short():
    t = np.arange(0, 50, 0.01)
    with pytest.raises(ConfigError, match="cover"):
        ou_frequency_prediction(t, np.ones_like(t), [10, 30, 70], 0.1)


def test_tracking_discrepancy_oracle():
    p = np.array([1.0, -1.0, 2.0])
    out = tracking_discrepancy(0.5 * p, p)
    assert out["gain"] == pytest.approx(0.5) and out["ratio"] == pytest.approx(0.5)
    assert tracking_discrepancy([p, p], [p, p])["rms_error"] == 0.0


# -- autocorrelation -------------------------------------------------------------

def synthetic_shifts(tau, n_real=400, n=60, spacing=5.0, seed=8):
    """Y - 1 sampled at regular centres: its scaled autocorrelation is the analytic one."""
    cfg = OUConfig(tau=tau, seed=seed, dt_sample=spacing)
    shifts = [temporal_realization(cfg, spacing * (n - 1), index=i).samples - 1 for i in range(n_real)]
    centers = [np.arange(n) * spacing for _ in range(n_real)]
    return shifts, centers


@pytest.mark.parametrize("mode", ["averaged", "first"])
def test_autocorr_lag_zero(mode):
    shifts, centers = synthetic_shifts(10.0, n_real=20)
    ac = frequency_autocorrelation(shifts, centers, tau=10.0, mode=mode)
    assert ac.measured[0] == 1.0 and ac.analytic[0] == 1.0
    assert ac.lags[0] == 0.0


def test_autocorr_matches_analytic_on_y_samples():
    shifts, centers = synthetic_shifts(10.0)
    ac = frequency_autocorrelation(shifts, centers, tau=10.0)
    assert np.max(np.abs(ac.measured[:10] - ac.analytic[:10])) < 0.06


def test_autocorr_stationary_symmetry():
    # correlations depend on the lag only, not on the origin
    shifts, centers = synthetic_shifts(10.0)
    D = np.array(shifts)

    def lag2(a, b):
        return np.mean([np.mean(D[:, j] * D[:, j + 2]) for j in range(a, b)]) / np.mean(D[:, a:b] ** 2)

    assert lag2(0, 25) == pytest.approx(lag2(30, 55), abs=0.05)


def test_autocorr_truncates_with_warning():
    shifts, centers = synthetic_shifts(10.0, n_real=3)
    shifts[1] = shifts[1][:-4]
    centers[1] = centers[1][:-4]
    with pytest.warns(RuntimeWarning, match="truncating"):
        ac = frequency_autocorrelation(shifts, centers, tau=10.0)
    assert ac.lags.size == shifts[1].size


def test_autocorr_needs_two_realizations():
    with pytest.raises(ConfigError):
        frequency_autocorrelation([np.ones(3)], [np.arange(3.0)], tau=1.0)


def test_analytic_small_lag_slope_is_two_ln2_over_tau():
    tau = 100.0
    lags = np.linspace(0, 0.2, 21)
    vals = ou_autocorr_analytic(lags, 0.0, OUConfig(tau=tau))
    assert small_lag_slope(lags, vals, 0.2) == pytest.approx(-2 * LN2 / tau, rel=0.01)


@pytest.mark.xfail(strict=True, reason="the exact small-lag slope of the scaled curve is -2 ln2 / tau")
def test_analytic_small_lag_slope_half_ln2():
    tau = 100.0
    lags = np.linspace(0, 2.0, 21)
    vals = ou_autocorr_analytic(lags, 0.0, OUConfig(tau=tau))
    assert small_lag_slope(lags, vals, 2.0) == pytest.approx(-LN2 / 2 / tau, rel=0.05)


def test_long_lag_tau_contrast():
    short = ou_autocorr_analytic(1000.0, 0.0, OUConfig(tau=10.0))
    long = ou_autocorr_analytic(1000.0, 0.0, OUConfig(tau=1000.0))
    assert short < 1e-40 and long > 0.2


def test_small_lag_slope_window_error():
    with pytest.raises(ConfigError):
        small_lag_slope([0.0, 5.0], [1.0, 0.9], 1.0)


# -- kappa diagnostics ------------------------------------------------------------

def test_kappa_diagnostics_zero():
    t = np.arange(0, 200.0, 0.1)
    d = kappa_diagnostics(t, np.ones((3, t.size)), 2 * math.pi / 40)
    for key in ("running_mean", "window_mean_square", "oscillating_integral"):
        assert np.array_equal(d[key], np.zeros_like(d[key]))


def test_kappa_diagnostics_constant_offset():
    t = np.arange(0, 400.0, 0.1)
    d = kappa_diagnostics(t, np.full((2, t.size), 1.2), 2 * math.pi / 40)
    assert np.allclose(d["running_mean"][1:], 0.2)
    assert np.allclose(d["window_mean_square"], 0.04)


def test_single_path_running_mean_slower_for_long_tau():
    # the late-time average of one path wanders for tau = 1000 but settles for tau = 1
    late = {}
    for tau in (1.0, 1000.0):
        cfg = OUConfig(tau=tau, seed=17, dt_sample=0.05)
        vals = []
        for i in range(40):
            Y = temporal_realization(cfg, 2000.0, index=i).samples
            t = np.arange(Y.size) * cfg.dt_sample
            vals.append(abs(kappa_diagnostics(t, Y, 2 * math.pi / 37.24)["running_mean"][-1]))
        late[tau] = np.median(vals)
    assert late[1.0] < 0.05
    assert late[1.0] < late[1000.0] / 5


@pytest.fixture(scope="module")
def kappa_by_tau():
    out = {}
    for tau in (1.0, 10.0, 100.0, 1000.0):
        cfg = OUConfig(tau=tau, seed=17, dt_sample=0.05)
        Y = np.array([temporal_realization(cfg, 2000.0, index=i).samples for i in range(40)])
        t = np.arange(Y.shape[1]) * cfg.dt_sample
        out[tau] = kappa_diagnostics(t, Y, 2 * math.pi / 37.24)
    return out


def test_ensemble_running_mean_small_for_short_tau(kappa_by_tau):
    assert np.max(np.abs(kappa_by_tau[1.0]["running_mean"][-2000:])) < 0.01


def test_window_mean_square_grows_with_tau(kappa_by_tau):
    ms = [np.mean(kappa_by_tau[tau]["window_mean_square"]) for tau in (1.0, 10.0, 100.0, 1000.0)]
    assert all(a < b for a, b in zip(ms, ms[1:]))


def test_amplitude_modulation_oracle():
    t = np.linspace(0, 10, 101)
    out = amplitude_modulation(t, np.full_like(t, 1.5), 0.1, -0.2)
    assert np.allclose(out, 0.1 * -0.2 * 0.5 * t)


# -- cosine transform -------------------------------------------------------------

@pytest.mark.parametrize("N", [21, 42])
def test_dct_basis_functions(N):
    x = grid(N, L)
    assert dct_mode2(np.cos(2 * np.pi * x / L)) == pytest.approx(1.0, abs=1e-10)
    assert abs(dct_mode2(np.cos(6 * np.pi * x / L))) < 1e-12
    assert abs(dct_mode2(np.cos(np.pi * x / L))) < 1e-12


@given(st.integers(1, 20), st.floats(-3, 3))
def test_dct_recovers_mode_amplitude(mode, amp):
    x = grid(21, L)
    assert dct_coefficient(amp * np.cos(mode * np.pi * x / L), mode) == pytest.approx(amp, abs=1e-10)


def test_dct_rejects_nonzero_mean():
    with pytest.raises(ConfigError, match="mean"):
        dct_mode2(np.ones(22))


def test_projection_vector_rejects_mode():
    with pytest.raises(ConfigError):
        cosine_projection_vector(21, 0)


# -- spatial shifts -------------------------------------------------------------

def test_spatial_report_arithmetic():
    T = 40.0
    times = np.arange(0, 400, T / 2 * (1 - 0.01))
    rec = OscillationRecord(times, np.resize([1, -1], times.size), np.zeros(times.size))
    x = grid(21, L)
    r = spatial_shift_report(rec, 0.3 * np.cos(2 * np.pi * x / L), 0.1, 2 * math.pi / T, 0.08, 0.16)
    assert r.kappa_hat_x2 == pytest.approx(0.3, abs=1e-12)
    assert r.predicted_shortcut == pytest.approx(0.015)
    assert r.predicted == pytest.approx(0.015 * 0.5)
    assert r.measured == pytest.approx(1 / 0.99 - 1, rel=1e-9)


def test_ensemble_summary_oracle():
    reps = [SpatialShiftReport(k, 0.1, 0.0, 0.0, m, 5, i) for i, (k, m) in enumerate([(0.2, 0.01), (-0.4, -0.02)])]
    out = ensemble_spatial_summary(reps, exact_k2_variance=0.1)
    assert out["s_x_measured"] == pytest.approx(math.sqrt((0.01**2 + 0.02**2) / 2))
    assert out["s_x_theory"] == pytest.approx(0.05 * math.sqrt((0.04 + 0.16) / 2))
    assert out["s_x_theory_exact"] == pytest.approx(0.05 * math.sqrt(0.1))
    with pytest.raises(ConfigError):
        ensemble_spatial_summary([])


def test_unperturbed_null(params, config):
    assert reference(params, config).max_abs_null_shift < 0.002


@pytest.fixture(scope="module")
def cos2_shifts(params, config):
    f = cosine_field(2, config.N, params.L)
    return {eps: spatial_run(params, config, f, eps) for eps in (0.02, 0.04)}


def test_cos2_shift_near_half_epsilon(cos2_shifts):
    assert cos2_shifts[0.02].measured == pytest.approx(0.01, rel=0.2)


def test_spatial_shift_scales_linearly(cos2_shifts):
    assert cos2_shifts[0.04].measured / cos2_shifts[0.02].measured == pytest.approx(2.0, rel=0.1)


@pytest.mark.xfail(strict=True, reason="the cos(2 pi x/L) shift follows eps/2 more closely than the Im(G11)/theta1 weighted prediction")
def test_eigenbasis_prediction_at_least_as_good(cos2_shifts):
    r = cos2_shifts[0.02]
    assert abs(r.measured - r.predicted) <= abs(r.measured - r.predicted_shortcut)


def test_spatial_shift_zero_without_noise(params, config):
    f = cosine_field(2, config.N, params.L)
    assert abs(spatial_run(params, config, f, 0.0).measured) < 1e-4


# -- temporal tracking ------------------------------------------------------------

@pytest.fixture(scope="module")
def tracking(params, config):
    res = temporal_ensemble(params, config, OUConfig(tau=10.0, seed=0), 0.01, 8)
    return tracking_discrepancy([r.measured for r in res], [r.predicted for r in res])


def test_tracking_is_correlated(tracking):
    # the response follows the prediction with a reduced, positive gain
    assert 0.5 < tracking["gain"] < 0.8


@pytest.mark.xfail(strict=True, reason="measured shifts respond at about 0.65 of the predicted amplitude")
def test_tracking_within_thirty_percent(tracking):
    assert tracking["ratio"] < 0.3


def test_periodogram_peak():
    t = np.arange(0, 2000, 0.1)
    f, p = probe_periodogram(t, np.cos(2 * np.pi * t / 40))
    assert f[np.argmax(p)] == pytest.approx(0.025, abs=1e-3)


def test_substream_independent_of_order():
    a = substream(5, 3).standard_normal(4)
    substream(5, 1).standard_normal(100)
    assert np.array_equal(a, substream(5, 3).standard_normal(4))
