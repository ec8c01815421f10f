"""Method-of-lines RK4 integration of the perturbed model.

The semidiscrete system is ``d rho / dt = kappa(x, t) g(rho) + diag(gamma) lap(rho)``
with ``kappa = 1 + eps kappa_t(t) + eps kappa_x(x)``.  The temporal factor
is a zero-order hold of a trace sampled every ``dt_sample`` seconds, which
must be a whole number of integrator steps; each RK4 stage reads the held
sample at its own stage time.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import ConfigError, NegativeConcentrationWarning, NumericDomainError
from .iofmt import write_csv
from .model import FieldState, ModelParams, conserved_totals, grid, trapezoid_weights
from .noise import NoiseRealization
from .spectral import SpectralReport, spectral_report

RK4_REAL_STABILITY = 2.785293563405282
DUMP_MAGIC = b"MNTRAJ01"


@dataclass(frozen=True)
class IntegrationConfig:
    N: int = 21
    dt: float = 0.005
    t_end: float = 2000.0
    record_stride: int = 20
    ic_amplitude: float = 0.05  # fraction of rho_d at the fixed point

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2, got {self.N}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError(f"record_stride must be a positive integer, got {self.record_stride}")
        if self.ic_amplitude < 0:
            raise ConfigError("ic_amplitude must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)


def diffusion_step_limit(params: ModelParams, N: int) -> float:
    """Largest RK4 step for which the pure diffusion operator is stable."""
    dx = params.L / N
    gmax = float(np.max(params.diffusion_vector()))
    return RK4_REAL_STABILITY * dx * dx / (4.0 * gmax)


@dataclass
class Trajectory:
    x: np.ndarray
    times: np.ndarray  # recorded frame times
    frames: np.ndarray  # (n_frames, 5, N + 1)
    probe_t: np.ndarray  # every step
    probe_left: np.ndarray  # rho_d(x = 0)
    probe_right: np.ndarray  # rho_d(x = L)
    totals: np.ndarray  # (n_frames, 2): total MinD, total MinE
    params: ModelParams
    config: IntegrationConfig
    epsilon: float = 0.0
    noise_hookup: str = "none"
    meta: dict = field(default_factory=dict)

    def conservation_drift(self) -> np.ndarray:
        """Max relative deviation of (total MinD, total MinE) from t = 0."""
        return np.max(np.abs(self.totals - self.totals[0]), axis=0) / np.abs(self.totals[0])

    def final_state(self) -> FieldState:
        return FieldState(self.x, self.frames[-1], float(self.times[-1]))

    def write_probe_csv(self, path) -> None:
        idx = np.arange(len(self.times)) * self.config.record_stride
        rows = (
            (t, self.probe_left[k], self.probe_right[k], tot[0], tot[1])
            for t, k, tot in zip(self.times, idx, self.totals)
        )
        write_csv(path, ("t", "rho_d_left", "rho_d_right", "total_D", "total_E"), rows)

    def write_kymograph_csv(self, path, every: int = 10) -> None:
        """rho_d on the grid for every ``every``-th recorded frame."""
        rows = (
            (t, xi, frame[3, i])
            for t, frame in zip(self.times[::every], self.frames[::every])
            for i, xi in enumerate(self.x)
        )
        write_csv(path, ("t", "x", "rho_d"), rows)

    def write_binary(self, path) -> None:
        """Little-endian dump: 8-byte magic, int32 N, int32 species, int32
        stride, int32 n_frames, float64 dt, then float64 frames, row-major."""
        frames = np.ascontiguousarray(self.frames, dtype="<f8")
        header = struct.pack("<8siiiid", DUMP_MAGIC, self.config.N, 5, self.config.record_stride, frames.shape[0], self.config.dt)
        Path(path).write_bytes(header + frames.tobytes())


def read_binary(path):
    """Inverse of ``Trajectory.write_binary``; returns (header dict, frames)."""
    data = Path(path).read_bytes()
    size = struct.calcsize("<8siiiid")
    if len(data) < size:
        raise ConfigError(f"{path}: truncated trajectory dump")
    magic, N, ns, stride, nf, dt = struct.unpack("<8siiiid", data[:size])
    if magic != DUMP_MAGIC:
        raise ConfigError(f"{path}: not a trajectory dump")
    frames = np.frombuffer(data[size:], dtype="<f8")
    if frames.size != nf * ns * (N + 1):
        raise ConfigError(f"{path}: frame data size mismatch")
    return {"N": N, "species": ns, "record_stride": stride, "n_frames": nf, "dt": dt}, frames.reshape(nf, ns, N + 1)


# -- numba kernels -----------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _rhs(u, rates, gam, inv_h2, kx, kt_value, out):
    n = u.shape[1]
    s_de, s_DT, s_D, s_dD, s_E = rates[0], rates[1], rates[2], rates[3], rates[4]
    for i in range(n):
        DD = u[0, i]
        DT = u[1, i]
        E = u[2, i]
        d = u[3, i]
        de = u[4, i]
        f_de = s_de * de
        f_DT = s_DT * DD
        f_rec = (s_D + s_dD * (d + de)) * DT
        f_E = s_E * d * E
        k = 1.0 + kx[i] + kt_value
        out[0, i] = k * (f_de - f_DT)
        out[1, i] = k * (f_DT - f_rec)
        out[2, i] = k * (f_de - f_E)
        out[3, i] = k * (f_rec - f_E)
        out[4, i] = k * (f_E - f_de)
    for sp in range(5):
        g = gam[sp]
        if g == 0.0:
            continue
        c = g * inv_h2
        out[sp, 0] += c * 2.0 * (u[sp, 1] - u[sp, 0])
        for i in range(1, n - 1):
            out[sp, i] += c * (u[sp, i - 1] - 2.0 * u[sp, i] + u[sp, i + 1])
        out[sp, n - 1] += c * 2.0 * (u[sp, n - 2] - u[sp, n - 1])


@numba.njit(cache=True, nogil=True)
def _totals(u, w):
    tD = 0.0
    tE = 0.0
    for i in range(u.shape[1]):
        tD += w[i] * (u[0, i] + u[1, i] + u[3, i] + u[4, i])
        tE += w[i] * (u[2, i] + u[4, i])
    return tD, tE


@numba.njit(cache=True, nogil=True)
def _run(u0, rates, gam, h, dt, nsteps, kx, kt, hold, stride, w):
    n = u0.shape[1]
    u = u0.copy()
    tmp = np.empty_like(u)
    k1 = np.empty_like(u)
    k2 = np.empty_like(u)
    k3 = np.empty_like(u)
    k4 = np.empty_like(u)
    inv_h2 = 1.0 / (h * h)
    nrec = nsteps // stride + 1
    frames = np.empty((nrec, 5, n))
    totals = np.empty((nrec, 2))
    probes = np.empty((nsteps + 1, 2))
    use_kt = kt.shape[0] > 0
    probes[0, 0] = u[3, 0]
    probes[0, 1] = u[3, n - 1]
    frames[0] = u
    a, b = _totals(u, w)
    totals[0, 0] = a
    totals[0, 1] = b
    rec = 1
    half = 0.5 * dt
    for s in range(nsteps):
        # zero-order hold: stage offsets 0, dt/2, dt/2, dt in half-steps
        k_a = kt[(2 * s) // (2 * hold)] if use_kt else 0.0
        k_b = kt[(2 * s + 1) // (2 * hold)] if use_kt else 0.0
        k_c = kt[(2 * s + 2) // (2 * hold)] if use_kt else 0.0
        _rhs(u, rates, gam, inv_h2, kx, k_a, k1)
        for sp in range(5):
            for i in range(n):
                tmp[sp, i] = u[sp, i] + half * k1[sp, i]
        _rhs(tmp, rates, gam, inv_h2, kx, k_b, k2)
        for sp in range(5):
            for i in range(n):
                tmp[sp, i] = u[sp, i] + half * k2[sp, i]
        _rhs(tmp, rates, gam, inv_h2, kx, k_b, k3)
        for sp in range(5):
            for i in range(n):
                tmp[sp, i] = u[sp, i] + dt * k3[sp, i]
        _rhs(tmp, rates, gam, inv_h2, kx, k_c, k4)
        acc = 0.0
        for sp in range(5):
            for i in range(n):
                u[sp, i] += dt / 6.0 * (k1[sp, i] + 2.0 * k2[sp, i] + 2.0 * k3[sp, i] + k4[sp, i])
                acc += u[sp, i]
        if not np.isfinite(acc):
            return u, probes, frames, totals, s + 1
        probes[s + 1, 0] = u[3, 0]
        probes[s + 1, 1] = u[3, n - 1]
        if (s + 1) % stride == 0:
            frames[rec] = u
            a, b = _totals(u, w)
            totals[rec, 0] = a
            totals[rec, 1] = b
            rec += 1
    return u, probes, frames, totals, -1


def semidiscrete_rhs(state: FieldState, params: ModelParams, kappa_x=None, kappa_t: float = 0.0) -> np.ndarray:
    """One evaluation of the compiled right-hand side (for checks)."""
    kx = np.zeros(state.x.size) if kappa_x is None else np.ascontiguousarray(kappa_x, dtype=float)
    out = np.empty_like(state.rho)
    _rhs(np.ascontiguousarray(state.rho), params.rate_vector(), params.diffusion_vector(), 1.0 / state.dx**2, kx, float(kappa_t), out)
    return out


# -- public API ----------------------------------------------------------------

def initial_condition(params: ModelParams, config: IntegrationConfig, report: SpectralReport | None = None) -> FieldState:
    """Fixed point plus the real part of the oscillatory eigenvector times cos(pi x / L).

    The amplitude makes the rho_d perturbation ``ic_amplitude * rho_d_inf``.
    """
    rep = report or spectral_report(params)
    rho_inf = rep.fixed_point.rho_inf
    x = grid(config.N, params.L)
    if config.ic_amplitude == 0 or rep.oscillatory_index is None:
        return FieldState.uniform(rho_inf, config.N, params.L)
    v = rep.oscillatory_basis()[:, 0].real
    a = config.ic_amplitude * rho_inf[3] / abs(v[3])
    rho = rho_inf[:, None] + a * v[:, None] * np.cos(np.pi * x / params.L)[None, :]
    return FieldState(x, rho, 0.0)


def _hold_ratio(trace: NoiseRealization, dt: float) -> int:
    dts = float(trace.coords[1] - trace.coords[0]) if trace.coords.size > 1 else dt
    ratio = dts / dt
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"noise sample spacing {dts} is not a whole number of steps dt={dt}")
    return m


def integrate(
    params: ModelParams,
    config: IntegrationConfig,
    temporal: NoiseRealization | None = None,
    spatial: NoiseRealization | None = None,
    epsilon: float = 0.0,
    initial_state: FieldState | None = None,
    report: SpectralReport | None = None,
    check_stability: bool = True,
) -> Trajectory:
    """RK4 trajectory of the (optionally) perturbed system.

    ``temporal`` carries ``Y(t)`` samples (kappa_t = Y - 1); ``spatial``
    carries ``kappa_x`` on the integration grid.  Both are scaled by
    ``epsilon``.
    """
    if check_stability and config.dt > diffusion_step_limit(params, config.N):
        raise ConfigError(
            f"dt={config.dt} exceeds the RK4 diffusion limit {diffusion_step_limit(params, config.N):.4g}"
        )
    state = initial_state or initial_condition(params, config, report)
    if state.N != config.N:
        raise ConfigError(f"initial state has N={state.N}, config has N={config.N}")
    nsteps = config.n_steps
    kx = np.zeros(config.N + 1)
    kt = np.zeros(0)
    hold = 1
    hookup = []
    if spatial is not None:
        if spatial.samples.shape != (config.N + 1,):
            raise ConfigError(f"spatial noise has {spatial.samples.size} points, grid has {config.N + 1}")
        kx = epsilon * np.asarray(spatial.samples, dtype=float)
        hookup.append("spatial")
    if temporal is not None:
        hold = _hold_ratio(temporal, config.dt)
        needed = nsteps // hold + 1
        if temporal.samples.size < needed:
            raise ConfigError(
                f"noise trace too short: {temporal.samples.size} samples, need {needed} to cover t_end={config.t_end}"
            )
        kt = epsilon * (np.asarray(temporal.samples[:needed], dtype=float) - 1.0)
        hookup.append("temporal")
    if np.any(1.0 + kx.min() + (kt.min() if kt.size else 0.0) <= 0):
        raise NumericDomainError("perturbed kappa is not strictly positive")
    w = trapezoid_weights(config.N + 1) * state.dx
    u, probes, frames, totals, status = _run(
        np.ascontiguousarray(state.rho), params.rate_vector(), params.diffusion_vector(),
        state.dx, config.dt, nsteps, kx, kt, hold, config.record_stride, w,
    )
    if status >= 0:
        raise NumericDomainError(f"solution blew up (NaN/Inf) at t = {status * config.dt:.6g} s")
    if frames.min() < 0:
        warnings.warn(f"negative concentration during integration (min {frames.min():.3g})", NegativeConcentrationWarning, stacklevel=2)
    times = np.arange(frames.shape[0]) * config.record_stride * config.dt
    return Trajectory(
        x=state.x,
        times=times,
        frames=frames,
        probe_t=np.arange(nsteps + 1) * config.dt,
        probe_left=probes[:, 0].copy(),
        probe_right=probes[:, 1].copy(),
        totals=totals,
        params=params,
        config=config,
        epsilon=epsilon,
        noise_hookup="+".join(hookup) or "none",
    )


# -- order verification ------------------------------------------------------------

def rk4_solve(f, y0, dt: float, nsteps: int, stop_above: float = 1e12) -> np.ndarray:
    """Plain RK4 for small ODE systems; stops early when the norm blows past ``stop_above``."""
    y = np.array(y0, dtype=float)
    for _ in range(nsteps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > stop_above:
            return y
    return y


def rk4_convergence_check(dts=(0.04, 0.02, 0.01), theta: float = 2.0, t_end: float = 10.0) -> dict:
    """Observed order of RK4 on ``u' = [[0, -theta], [theta, 0]] u`` against the exact rotation."""
    A = np.array([[0.0, -theta], [theta, 0.0]])
    y0 = np.array([1.0, 0.0])
    exact = np.array([math.cos(theta * t_end), math.sin(theta * t_end)])
    errors = []
    for dt in dts:
        n = int(round(t_end / dt))
        errors.append(float(np.linalg.norm(rk4_solve(lambda y: A @ y, y0, dt, n) - exact)))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    orders = [math.log(r, dts[i] / dts[i + 1]) for i, r in enumerate(ratios)]
    return {"dts": list(dts), "errors": errors, "ratios": ratios, "orders": orders, "order": min(orders)}


def stability_probe(eigenvalue: float, dt: float, t_end: float = 50.0) -> dict:
    """Integrate ``u' = eigenvalue * u`` and report whether RK4 diverged."""
    n = int(round(t_end / dt))
    y = rk4_solve(lambda y: eigenvalue * y, np.array([1.0]), dt, n)
    amp = float(abs(y[0])) if np.all(np.isfinite(y)) else math.inf
    limit = RK4_REAL_STABILITY / abs(eigenvalue)
    return {"dt": dt, "limit": limit, "diverged": amp > 1.0, "final_amplitude": amp}
