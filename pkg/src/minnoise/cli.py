"""Command line front end: simulations, scans, noise generation, reports and the acceptance suite.

Exit codes: 0 success, 1 failed verification or other error, 2 bad
configuration, 3 numerical failure, 4 no oscillation detected.
Every command that writes an output directory also writes
``manifest.json`` with the fully resolved settings; ``replay`` re-runs
from it.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    detect_extrema,
    ensemble_spatial_summary,
    frequency_autocorrelation,
    kappa_diagnostics,
    reference_frequency,
    tracking_discrepancy,
)
from .errors import ConfigError, MinNoiseError, NoOscillationError, NumericDomainError
from .experiments import (
    DEFAULT_TRANSIENT,
    cosine_field,
    oscillation_record,
    reference,
    spatial_ensemble,
    spatial_run,
    temporal_ensemble,
    temporal_run,
)
from .integrator import IntegrationConfig, integrate, read_binary
from .iofmt import read_csv, write_csv, write_json
from .model import SIGMA_NAMES, ModelParams, grid, load_params, parse_key_value, preset
from .noise import (
    NoiseRealization,
    OUConfig,
    build_spatial_covariance,
    coefficient_variance,
    sample_spatial_field,
    temporal_realization,
)
from .spectral import spectral_report, stability_scan, zero_contour

log = logging.getLogger("minnoise")

PARAM_KEYS = tuple(ModelParams.__dataclass_fields__)
# settings that never change data files
_NON_DATA = {"out", "config", "quiet", "workers", "gnuplot", "func", "params"}


# -- settings -------------------------------------------------------------------

def _coerce(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    return text


def _apply_config_file(args) -> None:
    """Values from ``--config`` override command-line flags."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    try:
        entries = parse_key_value(path.read_text(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    overrides = dict(getattr(args, "param_overrides", None) or {})
    for key, value in entries.items():
        dest = key.replace("-", "_")
        if dest in PARAM_KEYS:
            overrides[dest] = float(value)
        elif dest == "preset" or hasattr(args, dest):
            setattr(args, dest, _coerce(value) if dest != "preset" else value)
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")
    args.param_overrides = overrides


def _model(args) -> ModelParams:
    if getattr(args, "params_inline", None):
        return ModelParams.from_dict(args.params_inline)
    base = load_params(args.params) if getattr(args, "params", None) else preset(args.preset)
    overrides = getattr(args, "param_overrides", None) or {}
    return base.replace(**overrides) if overrides else base


def _integration(args) -> IntegrationConfig:
    return IntegrationConfig(N=args.N, dt=args.dt, t_end=args.t_end, record_stride=args.record_stride, ic_amplitude=args.ic_amplitude)


def _resolved(args, params: ModelParams) -> dict:
    spec = {k: v for k, v in vars(args).items() if k not in _NON_DATA and k != "param_overrides" and k != "params_inline"}
    spec["params_inline"] = params.to_dict()
    return spec


def _write_manifest(out: Path, command: str, args, params: ModelParams, extra: dict | None = None) -> None:
    outputs = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    data = {
        "artifact": "minnoise",
        "version": __version__,
        "command": command,
        "settings": _resolved(args, params),
        "outputs": outputs,
    }
    if extra:
        data.update(extra)
    write_json(out / "manifest.json", data)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg)


def _require_seed(args, why: str) -> int:
    if args.seed is None:
        raise ConfigError(f"--seed is required for {why}")
    return int(args.seed)


# -- gnuplot ------------------------------------------------------------------------

def _gnuplot(out: Path, name: str, body: str) -> None:
    header = 'set datafile separator ","\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n'
    (out / f"{name}.gp").write_text(header + f'set output "{name}.png"\n' + body.strip() + "\n")


# -- simulate ------------------------------------------------------------------------

def _write_record(out: Path, rec, theta1_ref: float | None) -> None:
    rows = [(t, int(k), v) for t, k, v in zip(rec.times, rec.kinds, rec.values)]
    write_csv(out / "extrema.csv", ("t", "kind", "rho_d"), rows)
    if theta1_ref is not None and rec.intervals.size:
        shifts = rec.shifts(theta1_ref)
        write_csv(out / "shifts.csv", ("t_j", "interval", "shift"), zip(rec.centers, rec.intervals, shifts))


def cmd_simulate(args) -> int:
    params = _model(args)
    config = _integration(args)
    out = _out_dir(args)
    n = args.ensemble
    if n < 1:
        raise ConfigError("--ensemble must be positive")
    summary = {}
    if args.noise == "none":
        rep = spectral_report(params)
        traj = integrate(params, config, report=rep)
        rec = oscillation_record(traj, args.transient)
        theta = reference_frequency(rec)
        traj.write_probe_csv(out / "trajectory.csv")
        traj.write_kymograph_csv(out / "kymograph.csv")
        if args.binary:
            traj.write_binary(out / "trajectory.bin")
        _write_record(out, rec, theta)
        summary = {
            "period_s": rec.period(),
            "theta1_ref": theta,
            "theta1_eigen": rep.theta1,
            "eigen_period_s": rep.period,
            "conservation_drift": traj.conservation_drift(),
            "max_abs_shift": float(np.max(np.abs(rec.shifts(theta)))),
        }
        _say(args, f"period {rec.period():.4f} s (linear theory {rep.period:.4f} s), {len(rec.times)} extrema")
        if args.gnuplot:
            _gnuplot(out, "trajectory", 'set xlabel "t (s)"\nplot "trajectory.csv" using 1:2 with lines, "" using 1:3 with lines')
    elif args.noise == "temporal":
        seed = _require_seed(args, "temporal noise")
        ou = OUConfig(tau=args.tau, c=args.c, seed=seed, dt_sample=config.dt)
        results = temporal_ensemble(params, config, ou, args.eps, n, args.workers, transient=args.transient, x0=_x0(args))
        rows = [(r.index, j, t, m, p) for r in results for j, (t, m, p) in enumerate(zip(r.centers, r.measured, r.predicted))]
        write_csv(out / "frequency_tracking.csv", ("realization", "j", "t_j", "measured", "predicted"), rows)
        summary = tracking_discrepancy([r.measured for r in results], [r.predicted for r in results])
        summary["convention"] = "interval t_{j+1}-t_{j-1}; prediction (eps/dt_j) * integral of (Y-1) over it"
        _say(args, f"{n} realizations: RMS discrepancy {summary['ratio']:.3f} of RMS signal, gain {summary['gain']:.3f}")
        if args.gnuplot:
            _gnuplot(out, "frequency_tracking", 'set xlabel "t (s)"\nplot "frequency_tracking.csv" using 3:($1==0?$4:1/0) with linespoints title "measured", "" using 3:($1==0?$5:1/0) with lines title "predicted"')
    elif args.noise == "spatial":
        ref = reference(params, config, args.transient)
        if args.mode is not None:
            reports = [spatial_run(params, config, cosine_field(args.mode, config.N, params.L), args.eps, args.transient)]
        else:
            seed = _require_seed(args, "random spatial noise")
            reports = spatial_ensemble(params, config, args.alpha, args.eps, n, seed, args.workers, args.transient)
        write_csv(
            out / "spatial_shifts.csv",
            ("realization", "kappa_hat_x2", "measured", "predicted", "predicted_shortcut"),
            [(r.index, r.kappa_hat_x2, r.measured, r.predicted, r.predicted_shortcut) for r in reports],
        )
        summary = {"reference_period_s": ref.period, "reports": [r.to_dict() for r in reports]}
        if args.mode is None:
            cov = build_spatial_covariance(args.alpha, params.L, grid(config.N, params.L))
            summary.update(ensemble_spatial_summary(reports, coefficient_variance(cov)))
            _say(args, f"s_x/theta1 measured {summary['s_x_measured']:.5f}, theory {summary['s_x_theory']:.5f}")
        else:
            _say(args, f"mean shift {reports[0].measured:.5f} (prediction {reports[0].predicted_shortcut:.5f})")
    elif args.noise == "replay":
        summary = _replay_noise(args, params, config, out)
    write_json(out / "summary.json", summary)
    _write_manifest(out, "simulate", args, params)
    return 0


def _x0(args):
    return "stationary" if args.x0 == "stationary" else 0.0


def _replay_noise(args, params, config, out) -> dict:
    if not args.noise_file:
        raise ConfigError("--noise replay needs --noise-file")
    noise = NoiseRealization.load_csv(args.noise_file)
    ref = reference(params, config, args.transient)
    if noise.kind == "temporal":
        traj = integrate(params, config, temporal=noise, epsilon=args.eps)
        rec = oscillation_record(traj, args.transient, ref.period)
        from .analysis import ou_frequency_prediction

        pred = ou_frequency_prediction(noise.coords, noise.samples, rec.times, args.eps)
        write_csv(out / "frequency_tracking.csv", ("realization", "j", "t_j", "measured", "predicted"),
                  [(noise.index, j, t, m, p) for j, (t, m, p) in enumerate(zip(rec.centers, rec.shifts(ref.theta1_ref), pred))])
        return tracking_discrepancy(rec.shifts(ref.theta1_ref), pred)
    rep = spatial_run(params, config, noise, args.eps, args.transient)
    write_csv(out / "spatial_shifts.csv", ("realization", "kappa_hat_x2", "measured", "predicted", "predicted_shortcut"),
              [(rep.index, rep.kappa_hat_x2, rep.measured, rep.predicted, rep.predicted_shortcut)])
    return rep.to_dict()


# -- scan -----------------------------------------------------------------------------

def cmd_scan(args) -> int:
    params = _model(args)
    out = _out_dir(args)
    a_vals = np.linspace(args.a_range[0], args.a_range[1], int(args.a_range[2]))
    b_vals = np.linspace(args.b_range[0], args.b_range[1], int(args.b_range[2]))

    def progress(i, n):
        if not args.quiet:
            print(f"row {i}/{n}", file=sys.stderr)

    res = stability_scan(params, args.a, a_vals, args.b, b_vals, progress)
    write_csv(out / "scan.csv", (args.a, args.b, "max_re_lambda", "period_s", "valid"), res.rows())
    segs = zero_contour(res.a_values, res.b_values, res.max_re, res.valid)
    write_csv(out / "contour.csv", ("segment", args.a, args.b), [(k, *p) for k, s in enumerate(segs) for p in s])
    if res.n_invalid:
        print(f"warning: {res.n_invalid} cells without a fixed point were marked invalid", file=sys.stderr)
    _say(args, f"{res.max_re.size} cells, {res.n_invalid} invalid, {len(segs)} contour segments")
    if args.gnuplot:
        _gnuplot(out, "scan", f'set xlabel "{args.a}"\nset ylabel "{args.b}"\nplot "contour.csv" using 2:3 with points pt 7 ps 0.5 title "max Re = 0"')
    _write_manifest(out, "scan", args, params, {"invalid_cells": res.n_invalid})
    return 0


# -- noise-gen ------------------------------------------------------------------------

def cmd_noise_gen(args) -> int:
    params = _model(args)
    seed = _require_seed(args, "noise generation")
    if args.kind == "temporal":
        ou = OUConfig(tau=args.tau, c=args.c, seed=seed, dt_sample=args.dt_sample)
        real = temporal_realization(ou, args.t_end, args.index, _x0(args))
    else:
        cov = build_spatial_covariance(args.alpha, params.L, grid(args.N, params.L))
        real = sample_spatial_field(cov, args.eps, seed, args.index)
    path = Path(args.out)
    real.dump_csv(path)
    _say(args, f"wrote {real.samples.size} {args.kind} samples to {path}")
    return 0


# -- analyze ------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    src = Path(args.input)
    if src.suffix == ".bin":
        header, frames = read_binary(src)
        step = header["record_stride"] * header["dt"]
        t = np.arange(header["n_frames"]) * step
        v = frames[:, 3, 0]
    else:
        head, rows = read_csv(src)
        if head[:2] != ["t", "rho_d_left"]:
            raise ConfigError(f"{src}: expected a trajectory CSV with columns t, rho_d_left, ...")
        t = np.array([float(r[0]) for r in rows])
        v = np.array([float(r[1]) for r in rows])
    keep = t >= args.transient
    rec = detect_extrema(t[keep], v[keep], args.reference_period)
    theta = 2 * math.pi / args.reference_period if args.reference_period else reference_frequency(rec)
    out = _out_dir(args)
    _write_record(out, rec, theta)
    summary = {"period_s": rec.period(), "theta1_ref": theta, "n_extrema": int(rec.times.size), "source": src.name}
    write_json(out / "summary.json", summary)
    _say(args, f"period {rec.period():.4f} s from {rec.times.size} extrema")
    return 0


# -- verify -------------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .acceptance import run_suite

    params = load_params(args.params) if args.params else None
    results = run_suite(quick=args.quick, params=params, workers=args.workers, full_scale=args.full_scale)
    failed = [r for r in results if r.passed is False]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


# -- reports ------------------------------------------------------------------------

def _report_temp_perturb(args, params, config, out):
    seed = _require_seed(args, "this report")
    for tau in args.taus or (1.0, 10.0, 100.0):
        ou = OUConfig(tau=tau, seed=seed, dt_sample=config.dt)
        r = temporal_run(params, config, ou, args.eps, 0, args.transient, keep_trace=True)
        tr = r.trace
        every = max(1, int(round(0.1 / config.dt)))
        write_csv(out / f"kappa_t_tau{tau:g}.csv", ("t", "kappa_t"), zip(tr.coords[::every], tr.samples[::every] - 1.0))
        write_csv(out / f"shift_tau{tau:g}.csv", ("t_j", "measured", "predicted"), zip(r.centers, r.measured, r.predicted))
        if args.gnuplot:
            _gnuplot(out, f"temp_perturb_tau{tau:g}", f'plot "shift_tau{tau:g}.csv" using 1:2 with linespoints, "" using 1:3 with lines')


def _report_temp_auto(args, params, config, out):
    seed = _require_seed(args, "this report")
    for tau in args.taus or (10.0, 100.0, 1000.0):
        ou = OUConfig(tau=tau, seed=seed, dt_sample=config.dt)
        res = temporal_ensemble(params, config, ou, args.eps, args.ensemble, args.workers, transient=args.transient)
        fa = frequency_autocorrelation([r.measured for r in res], [r.centers for r in res], tau, mode=args.autocorr_mode)
        write_csv(out / f"autocorr_tau{tau:g}.csv", ("lag", "measured", "analytic"), fa.rows())
        if args.gnuplot:
            _gnuplot(out, f"temp_auto_tau{tau:g}", f'plot "autocorr_tau{tau:g}.csv" using 1:2 with lines, "" using 1:3 with lines dt 2')


def _report_kappat(args, params, config, out):
    seed = _require_seed(args, "this report")
    taus = args.taus or (1.0, 10.0, 100.0, 1000.0)
    theta = reference(params, config, args.transient).theta1_ref
    diags = {}
    for tau in taus:
        ou = OUConfig(tau=tau, seed=seed, dt_sample=0.05)
        traces = [temporal_realization(ou, config.t_end, i, _x0(args)) for i in range(args.ensemble)]
        diags[tau] = kappa_diagnostics(traces[0].coords, np.array([tr.samples for tr in traces]), theta)
    d0 = diags[taus[0]]
    every = 20
    cols = [f"tau{t:g}" for t in taus]
    write_csv(out / "kappat_running_mean.csv", ("t", *cols),
              zip(d0["t"][::every], *(diags[t]["running_mean"][::every] for t in taus)))
    write_csv(out / "kappat_oscillating_integral.csv", ("t", *cols),
              zip(d0["t"][::every], *(diags[t]["oscillating_integral"][::every] for t in taus)))
    write_csv(out / "kappat_window_mean_square.csv", ("t", *cols),
              zip(d0["window_centers"], *(diags[t]["window_mean_square"] for t in taus)))
    if args.gnuplot:
        body = "plot " + ", ".join(f'"kappat_running_mean.csv" using 1:{k + 2} with lines' for k in range(len(taus)))
        _gnuplot(out, "kappat", body)


def _report_spatial_rand(args, params, config, out):
    seed = _require_seed(args, "this report")
    cov = build_spatial_covariance(args.alpha, params.L, grid(config.N, params.L))
    examples = [sample_spatial_field(cov, args.eps, seed, i) for i in range(2)]
    write_csv(out / "fields.csv", ("x", "kappa_0", "kappa_1"), zip(examples[0].coords, examples[0].samples, examples[1].samples))
    ref = reference(params, config, args.transient)
    rows = []
    for f in examples:
        traj = integrate(params, config, spatial=f, epsilon=args.eps)
        rec = oscillation_record(traj, args.transient, ref.period)
        rows += [(f.index, t, s) for t, s in zip(rec.centers, rec.shifts(ref.theta1_ref))]
    write_csv(out / "example_shifts.csv", ("realization", "t_j", "shift"), rows)
    reports = spatial_ensemble(params, config, args.alpha, args.eps, args.ensemble, seed, args.workers, args.transient)
    write_csv(out / "ensemble_shifts.csv", ("realization", "kappa_hat_x2", "measured", "predicted_shortcut"),
              [(r.index, r.kappa_hat_x2, r.measured, r.predicted_shortcut) for r in reports])
    write_json(out / "summary.json", ensemble_spatial_summary(reports, coefficient_variance(cov)))
    if args.gnuplot:
        _gnuplot(out, "spatial_rand", 'plot "fields.csv" using 1:2 with linespoints, "" using 1:3 with linespoints')


def _report_kymograph(args, params, config, out):
    traj = integrate(params, config)
    traj.write_kymograph_csv(out / "kymograph.csv")
    if args.gnuplot:
        _gnuplot(out, "kymograph", 'set view map\nset xlabel "t (s)"\nset ylabel "x (um)"\nsplot "kymograph.csv" using 1:2:3 with points pt 5 ps 0.3 palette')


REPORTS = {
    "fig-temp-perturb": _report_temp_perturb,
    "fig-temp-auto": _report_temp_auto,
    "fig-kappat": _report_kappat,
    "fig-spatial-rand": _report_spatial_rand,
    "fig-kymograph": _report_kymograph,
}


def cmd_report(args) -> int:
    params = _model(args)
    config = _integration(args)
    out = _out_dir(args)
    REPORTS[args.figure](args, params, config, out)
    _write_manifest(out, "report", args, params)
    _say(args, f"wrote {args.figure} data to {out}")
    return 0


# -- replay ---------------------------------------------------------------------------

def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        command = manifest["command"]
        settings = manifest["settings"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"{args.manifest}: not a usable manifest ({exc})") from exc
    ns = argparse.Namespace(**settings)
    ns.out, ns.quiet, ns.workers, ns.gnuplot, ns.config, ns.params = args.out, args.quiet, args.workers, False, None, None
    return COMMANDS[command](ns)


COMMANDS = {"simulate": cmd_simulate, "scan": cmd_scan, "report": cmd_report}


# -- parser ---------------------------------------------------------------------------

def _common(p, integration=True):
    g = p.add_argument_group("model")
    g.add_argument("--preset", default="huang2003_1d", help="named parameter set")
    g.add_argument("--params", help="key = value parameter file (may start from a preset)")
    g.add_argument("--config", help="key = value file whose entries override flags")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--gnuplot", action="store_true", help="also write gnuplot scripts")
    if integration:
        g = p.add_argument_group("integration")
        g.add_argument("--N", type=int, default=21, help="grid intervals")
        g.add_argument("--dt", type=float, default=0.005, help="time step (s)")
        g.add_argument("--t-end", type=float, default=2000.0)
        g.add_argument("--record-stride", type=int, default=20, help="steps between stored frames")
        g.add_argument("--ic-amplitude", type=float, default=0.05, help="initial perturbation relative to rho_d at the fixed point")
        g.add_argument("--transient", type=float, default=DEFAULT_TRANSIENT, help="seconds discarded before analysis")
        g.add_argument("--seed", type=int, help="master seed (required for random noise)")
        g.add_argument("--workers", type=int, default=1, help="worker threads for ensembles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minnoise", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"minnoise {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate and analyse one run or an ensemble")
    _common(p)
    p.add_argument("--noise", choices=("none", "temporal", "spatial", "replay"), default="none")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--c", type=float, default=None, help="OU diffusion constant (default 2 ln 2 / tau)")
    p.add_argument("--x0", choices=("stationary", "zero"), default="stationary", help="OU start")
    p.add_argument("--alpha", type=float, default=2.0, help="spatial correlation length (um)")
    p.add_argument("--mode", type=int, default=None, help="deterministic cos(mode pi x/L) perturbation")
    p.add_argument("--noise-file", help="noise CSV to replay")
    p.add_argument("--ensemble", type=int, default=1)
    p.add_argument("--binary", action="store_true", help="also write the full-field binary dump")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="max Re lambda and period over a plane of two rate constants")
    _common(p, integration=False)
    p.add_argument("--a", choices=SIGMA_NAMES, default="sigma_dD")
    p.add_argument("--a-range", type=float, nargs=3, metavar=("LO", "HI", "N"), required=True)
    p.add_argument("--b", choices=SIGMA_NAMES, default="sigma_E")
    p.add_argument("--b-range", type=float, nargs=3, metavar=("LO", "HI", "N"), required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("noise-gen", help="write one noise realization as CSV")
    _common(p, integration=False)
    p.add_argument("--kind", choices=("temporal", "spatial"), required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--index", type=int, default=0, help="realization index")
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--dt-sample", type=float, default=0.005)
    p.add_argument("--t-end", type=float, default=2000.0)
    p.add_argument("--x0", choices=("stationary", "zero"), default="stationary")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--N", type=int, default=21)
    p.add_argument("--eps", type=float, default=0.1)
    p.set_defaults(func=cmd_noise_gen, out="noise.csv")

    p = sub.add_parser("analyze", help="extrema and frequency shifts of a stored trajectory")
    p.add_argument("input", help="trajectory CSV or binary dump")
    p.add_argument("--transient", type=float, default=DEFAULT_TRANSIENT)
    p.add_argument("--reference-period", type=float, default=None)
    p.add_argument("--out", default="analysis")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="eigen, table and formula checks only")
    p.add_argument("--full-scale", action="store_true", help="also run the 200-realization spatial ensemble")
    p.add_argument("--params", help="parameter file to verify instead of the preset")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="emit the data behind one figure")
    p.add_argument("figure", choices=sorted(REPORTS))
    _common(p)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--taus", type=float, nargs="+", default=None)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--ensemble", type=int, default=50)
    p.add_argument("--x0", choices=("stationary", "zero"), default="stationary")
    p.add_argument("--autocorr-mode", choices=("averaged", "first"), default="averaged")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        _apply_config_file(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except NoOscillationError as exc:
        print(f"no oscillation detected: {exc}", file=sys.stderr)
        return NoOscillationError.exit_code
    except NumericDomainError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return NumericDomainError.exit_code
    except MinNoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
