"""Extrinsic noise: exponentiated Ornstein-Uhlenbeck traces in time and
Cholesky-sampled correlated fields in space.

Random numbers come from PCG64 generators seeded through
``SeedSequence(master_seed, spawn_key=(realization, stream))`` so each
realization of an ensemble owns an independent, reproducible substream
regardless of how many workers run it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, NumericDomainError
from .iofmt import fmt, read_csv, write_csv
from .model import trapezoid_weights

TEMPORAL_STREAM = 0
SPATIAL_STREAM = 1
LN2 = math.log(2.0)


def substream(master_seed: int, realization: int = 0, stream: int = 0) -> np.random.Generator:
    if master_seed is None or int(master_seed) < 0:
        raise ConfigError("a non-negative integer seed is required")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class OUConfig:
    """``dX = -X/tau dt + sqrt(c) dW`` sampled every ``dt_sample`` seconds.

    ``c`` defaults to ``2 ln 2 / tau`` so that ``c tau / 2 = ln 2``.
    ``c = 0`` is accepted and gives the noiseless relaxation.
    """

    tau: float
    c: float | None = None
    seed: int = 0
    dt_sample: float = 0.005

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.c is None:
            object.__setattr__(self, "c", 2 * LN2 / self.tau)
        if not self.c >= 0:
            raise ConfigError(f"c must be non-negative, got {self.c}")
        if not self.dt_sample > 0:
            raise ConfigError(f"dt_sample must be positive, got {self.dt_sample}")

    @property
    def stationary_variance(self) -> float:
        return self.c * self.tau / 2

    def to_dict(self) -> dict:
        return {"tau": self.tau, "c": self.c, "seed": self.seed, "dt_sample": self.dt_sample}


def ou_path(config: OUConfig, x0="stationary", t_end: float = 2000.0, rng=None):
    """Exact-discretization OU path on ``t_n = n * dt_sample``.

    ``X_{n+1} = X_n e^{-dt/tau} + xi_n`` with
    ``xi_n ~ N(0, (c tau / 2)(1 - e^{-2 dt/tau}))``.
    """
    if rng is None:
        rng = substream(config.seed, 0, TEMPORAL_STREAM)
    n = int(round(t_end / config.dt_sample))
    t = np.arange(n + 1) * config.dt_sample
    var = config.stationary_variance
    if isinstance(x0, str):
        if x0 != "stationary":
            raise ConfigError(f"x0 must be a number or 'stationary', got {x0!r}")
        start = rng.normal(0.0, math.sqrt(var)) if var > 0 else 0.0
    else:
        start = float(x0)
    a = math.exp(-config.dt_sample / config.tau)
    sd = math.sqrt(var * -math.expm1(-2 * config.dt_sample / config.tau))
    xi = sd * rng.standard_normal(n)
    X = np.empty(n + 1)
    X[0] = start
    if n:
        X[1:], _ = lfilter([1.0], [1.0, -a], xi, zi=[a * start])
    return t, X


def y_process(X, config: OUConfig) -> np.ndarray:
    """``e^X / E(e^X)`` with ``E(e^X) = e^{c tau / 4}``."""
    arg = np.asarray(X, dtype=float) - config.c * config.tau / 4
    if np.max(arg) > 700:
        raise NumericDomainError(f"exp overflow in Y process (max exponent {np.max(arg):.1f})")
    return np.exp(arg)


def ou_autocorr_analytic(s, t, config: OUConfig):
    """Autocorrelation of ``e^X`` for stationary X, in [0, 1]."""
    lag = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))
    a = config.c * config.tau / 2
    decay = np.exp(-lag / config.tau)
    if a == 0:
        return decay
    return np.expm1(a * decay) / math.expm1(a)


# -- spatial fields ---------------------------------------------------------

def triangular_A(xi, alpha: float):
    """Hat autocorrelation with support [-alpha, alpha] and unit integral."""
    xi = np.abs(np.asarray(xi, dtype=float))
    return np.where(xi <= alpha, (1.0 - xi / alpha) / alpha, 0.0)


@dataclass(frozen=True)
class SpatialCovariance:
    alpha: float
    L: float
    x: np.ndarray
    C: np.ndarray


def build_spatial_covariance(alpha: float, L: float, x) -> SpatialCovariance:
    """``C_ij = A(dx) + A(dx - L) + A(dx + L)`` with ``dx = x_i - x_j``."""
    if not 0 < alpha < L:
        raise ConfigError(f"need 0 < alpha < L, got alpha={alpha}, L={L}")
    x = np.asarray(x, dtype=float)
    d = x[:, None] - x[None, :]
    C = triangular_A(d, alpha) + triangular_A(d - L, alpha) + triangular_A(d + L, alpha)
    return SpatialCovariance(alpha, L, x, C)


def cholesky_with_jitter(C: np.ndarray, max_doublings: int = 6):
    """Lower Cholesky factor of ``C + j I``; returns (factor, jitter)."""
    n = C.shape[0]
    jitter = 1e-10 * np.trace(C) / n
    for _ in range(max_doublings + 1):
        try:
            return np.linalg.cholesky(C + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 2
    lam_min = float(np.linalg.eigvalsh(C).min())
    raise NumericDomainError(f"covariance not factorizable after jitter {jitter:.3g}; min eigenvalue {lam_min:.3g}")


def zero_mean(values: np.ndarray) -> np.ndarray:
    """Remove the trapezoidal grid mean (discrete form of (1/L) int kappa dx)."""
    w = trapezoid_weights(values.shape[-1])
    mean = values @ w / w.sum()
    return values - np.expand_dims(mean, -1)


@dataclass
class NoiseRealization:
    kind: str  # "temporal" or "spatial"
    coords: np.ndarray
    samples: np.ndarray
    config: dict = field(default_factory=dict)
    seed: int | None = None
    index: int = 0

    def dump_csv(self, path) -> None:
        coord = "t" if self.kind == "temporal" else "x"
        echo = json.dumps({"kind": self.kind, "index": self.index, **self.config}, sort_keys=True)
        rows = []
        for k, (c, v) in enumerate(zip(self.coords, self.samples)):
            if k == 0:
                rows.append((fmt(c), fmt(v), str(self.seed), echo))
            else:
                rows.append((fmt(c), fmt(v), "", ""))
        write_csv(path, (coord, "value", "seed", "config"), rows)

    @classmethod
    def load_csv(cls, path) -> "NoiseRealization":
        header, rows = read_csv(path)
        if len(header) != 4 or header[1:] != ["value", "seed", "config"] or header[0] not in ("t", "x"):
            raise ConfigError(f"{path}: not a noise dump (header {header})")
        if not rows:
            raise ConfigError(f"{path}: empty noise dump")
        coords = np.array([float(r[0]) for r in rows])
        samples = np.array([float(r[1]) for r in rows])
        try:
            config = json.loads(rows[0][3])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: bad config echo: {exc}") from exc
        kind = config.pop("kind")
        index = config.pop("index", 0)
        seed = None if rows[0][2] in ("", "None") else int(rows[0][2])
        return cls(kind, coords, samples, config, seed, index)


def temporal_realization(config: OUConfig, t_end: float, index: int = 0, x0="stationary") -> NoiseRealization:
    """Y(t) trace for realization ``index`` of the ensemble seeded by ``config.seed``."""
    rng = substream(config.seed, index, TEMPORAL_STREAM)
    t, X = ou_path(config, x0, t_end, rng)
    cfg = config.to_dict()
    cfg["x0"] = x0
    return NoiseRealization("temporal", t, y_process(X, config), cfg, config.seed, index)


def sample_spatial_field(cov: SpatialCovariance, epsilon: float, seed: int, index: int = 0) -> NoiseRealization:
    """Zero-mean correlated field ``kappa_x`` on the covariance's grid.

    ``epsilon`` is recorded with the realization; the returned samples are
    the unscaled ``kappa_x``.
    """
    factor, jitter = cholesky_with_jitter(cov.C)
    z = substream(seed, index, SPATIAL_STREAM).standard_normal(cov.x.size)
    kappa = zero_mean(factor @ z)
    cfg = {"alpha": cov.alpha, "L": cov.L, "epsilon": epsilon, "jitter": jitter}
    return NoiseRealization("spatial", cov.x.copy(), kappa, cfg, seed, index)


def fourier_A_hat(mu: int, alpha: float, L: float) -> float:
    """Cosine coefficient ``(4L/(mu pi alpha)^2) sin^2(mu pi alpha / L)``."""
    if not 0 < alpha < L:
        raise ConfigError(f"need 0 < alpha < L, got alpha={alpha}, L={L}")
    if int(mu) != mu or mu < 1:
        raise ConfigError(f"mu must be a positive integer, got {mu}")
    arg = mu * math.pi * alpha / L
    return 4 * L / (mu * math.pi * alpha) ** 2 * math.sin(arg) ** 2


def coefficient_variance(cov: SpatialCovariance, mode: int = 2) -> float:
    """Exact ``E[kappa_hat_mode^2]`` for fields from ``sample_spatial_field``.

    Uses the covariance after mean removal, ``(I - P) C (I - P)^T``.
    """
    from .analysis import cosine_projection_vector

    n = cov.x.size
    w = trapezoid_weights(n)
    P = np.outer(np.ones(n), w / w.sum())
    Cm = (np.eye(n) - P) @ cov.C @ (np.eye(n) - P).T
    a = cosine_projection_vector(n - 1, mode)
    return float(a @ Cm @ a)
