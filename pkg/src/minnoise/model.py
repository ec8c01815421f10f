"""Five-species 1D MinD/MinE reaction-diffusion model.

Species are stored in the fixed order ``(DD, DT, E, d, de)``: cytosolic
MinD:ADP, MinD:ATP and MinE, then membrane-bound MinD:ATP and the
MinE:MinD:ATP complex.  Concentrations are molecules per cubic micrometre.

Every reaction rate appears linearly in exactly one flux, so the reaction
vector is written as ``g(rho) = sum_s nu_s * phi_s(rho)`` with a fixed
stoichiometric column ``nu_s`` per rate constant.  Both conservation
vectors annihilate every ``nu_s``, which is what makes the MinD and MinE
totals invariant for any multiplicative perturbation ``kappa``.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, NegativeConcentrationWarning, NumericDomainError

SPECIES = ("DD", "DT", "E", "d", "de")
SIGMA_NAMES = ("sigma_de", "sigma_DT", "sigma_D", "sigma_dD", "sigma_E")
DIFFUSION_MASK = (True, True, True, False, False)

AVOGADRO = 6.02214076e23
# 1 M = 6.022e23 molecules / 1e15 um^3
MOLECULES_PER_UM3_PER_MOLAR = AVOGADRO * 1e-15

# Stoichiometric column of each rate constant, species order (DD, DT, E, d, de).
STOICHIOMETRY = {
    "sigma_de": np.array([1.0, 0.0, 1.0, 0.0, -1.0]),
    "sigma_DT": np.array([-1.0, 1.0, 0.0, 0.0, 0.0]),
    "sigma_D": np.array([0.0, -1.0, 0.0, 1.0, 0.0]),
    "sigma_dD": np.array([0.0, -1.0, 0.0, 1.0, 0.0]),
    "sigma_E": np.array([0.0, 0.0, -1.0, -1.0, 1.0]),
}
# Left null vectors of every stoichiometric column: total MinD, total MinE.
CONSERVATION_VECTORS = np.array(
    [[1.0, 1.0, 0.0, 1.0, 1.0],
     [0.0, 0.0, 1.0, 0.0, 1.0]]
)


@dataclass(frozen=True)
class ModelParams:
    """Rates, diffusion constants, geometry and conserved totals.

    ``sigma_dD`` and ``sigma_E`` are in um^3/s, ``sigma_D``, ``sigma_de``
    and ``sigma_DT`` in 1/s.  ``rate_scale`` multiplies every rate and is
    the single calibration knob; it is 1 for the shipped preset.
    """

    sigma_de: float
    sigma_DT: float
    sigma_D: float
    sigma_dD: float
    sigma_E: float
    gamma_D: float
    gamma_E: float
    L: float
    rho_Dtot: float
    rho_Etot: float
    rate_scale: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{f.name} must be a finite number, got {value!r}")
            if value <= 0:
                raise ConfigError(f"{f.name} must be strictly positive, got {value!r}")

    @property
    def diffusion_mask(self) -> tuple:
        return DIFFUSION_MASK

    def diffusion_vector(self) -> np.ndarray:
        """Per-species diffusion constants, zero for membrane species."""
        return np.array([self.gamma_D, self.gamma_D, self.gamma_E, 0.0, 0.0])

    def rates(self) -> dict:
        return {name: getattr(self, name) * self.rate_scale for name in SIGMA_NAMES}

    def rate_vector(self) -> np.ndarray:
        r = self.rates()
        return np.array([r[name] for name in SIGMA_NAMES])

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {f.name for f in dataclasses.fields(cls) if f.default is dataclasses.MISSING} - set(data)
        if missing:
            raise ConfigError(f"missing parameter keys: {sorted(missing)}")
        try:
            return cls(**{k: float(v) for k, v in data.items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def params_from_physical(
    sigma_de=0.7,
    sigma_DT=1.0,
    sigma_D=0.025,
    sigma_dD_per_molar=6.8e5,
    sigma_E_per_molar=5.6e7,
    gamma_D=2.5,
    gamma_E=2.5,
    L=4.5,
    rho_Dtot=1375.0,
    rho_Etot=481.0,
    rate_scale=1.0,
) -> ModelParams:
    """Build parameters from rates quoted in M^-1 s^-1 and um/s.

    Bimolecular constants are divided by ``N_A * 1e-15`` to act on
    molecules/um^3.  The membrane recruitment rate (um/s) is used
    numerically as a first-order rate in 1/s, i.e. a unit length scale is
    absorbed into it.
    """
    return ModelParams(
        sigma_de=sigma_de,
        sigma_DT=sigma_DT,
        sigma_D=sigma_D,
        sigma_dD=sigma_dD_per_molar / MOLECULES_PER_UM3_PER_MOLAR,
        sigma_E=sigma_E_per_molar / MOLECULES_PER_UM3_PER_MOLAR,
        gamma_D=gamma_D,
        gamma_E=gamma_E,
        L=L,
        rho_Dtot=rho_Dtot,
        rho_Etot=rho_Etot,
        rate_scale=rate_scale,
    )


PRESETS = {
    "huang2003_1d": params_from_physical(),
}


def preset(name: str) -> ModelParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


# -- config files ---------------------------------------------------------

def parse_key_value(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def load_params(path) -> ModelParams:
    """Read a parameter file.  A ``preset = name`` line seeds the values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    entries = parse_key_value(text, str(path))
    base = {}
    if "preset" in entries:
        base = preset(entries.pop("preset")).to_dict()
    base.update(entries)
    try:
        return ModelParams.from_dict(base)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_params(params: ModelParams, path=None) -> str:
    lines = ["# MinD/MinE 1D model parameters (concentration unit: molecules/um^3)"]
    for key, value in params.to_dict().items():
        lines.append(f"{key} = {value!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# -- state ----------------------------------------------------------------

@dataclass(frozen=True)
class FieldState:
    """Five concentration profiles on the uniform grid ``x_i = i L / N``."""

    x: np.ndarray
    rho: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ConfigError("grid must be one-dimensional with at least 2 points")
        if rho.shape != (5, x.size):
            raise ConfigError(f"rho must have shape (5, {x.size}), got {rho.shape}")
        dx = np.diff(x)
        if not np.allclose(dx, dx[0], rtol=1e-12, atol=0.0) or dx[0] <= 0:
            raise ConfigError("grid spacing must be uniform and positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "rho", rho)

    @property
    def N(self) -> int:
        return self.x.size - 1

    @property
    def dx(self) -> float:
        return (self.x[-1] - self.x[0]) / self.N

    @property
    def L(self) -> float:
        return self.x[-1] - self.x[0]

    @classmethod
    def uniform(cls, rho_const, N: int, L: float, time: float = 0.0) -> "FieldState":
        x = grid(N, L)
        rho = np.repeat(np.asarray(rho_const, dtype=float)[:, None], N + 1, axis=1)
        return cls(x, rho, time)

    def has_negative(self) -> bool:
        return bool(np.any(self.rho < 0))


def grid(N: int, L: float) -> np.ndarray:
    if N < 2:
        raise ConfigError(f"need at least 2 grid intervals, got N={N}")
    return np.linspace(0.0, L, N + 1)


@dataclass(frozen=True)
class ConservedTotals:
    total_D: float
    total_E: float

    def as_array(self) -> np.ndarray:
        return np.array([self.total_D, self.total_E])


# -- right-hand sides -------------------------------------------------------

def _as_rho(state) -> np.ndarray:
    rho = state.rho if isinstance(state, FieldState) else np.asarray(state, dtype=float)
    if rho.shape[0] != 5:
        raise ConfigError(f"leading dimension must be the 5 species, got shape {rho.shape}")
    return rho


def _check_rho(rho: np.ndarray) -> None:
    if not np.all(np.isfinite(rho)):
        raise NumericDomainError("non-finite concentration in state")
    if np.any(rho < 0):
        warnings.warn(
            f"negative concentration (min {rho.min():.3g}) in state", NegativeConcentrationWarning, stacklevel=3
        )


def reaction_fluxes(rho: np.ndarray, params: ModelParams) -> dict:
    """Flux of each rate constant's reaction, keyed by sigma name."""
    DD, DT, E, d, de = rho
    r = params.rates()
    return {
        "sigma_de": r["sigma_de"] * de,
        "sigma_DT": r["sigma_DT"] * DD,
        "sigma_D": r["sigma_D"] * DT,
        "sigma_dD": r["sigma_dD"] * (d + de) * DT,
        "sigma_E": r["sigma_E"] * d * E,
    }


def reaction_terms(state, params: ModelParams, subset: Iterable[str] | None = None) -> np.ndarray:
    """Sum of the reaction terms whose rate constant is in ``subset``.

    ``subset=None`` gives the full reaction vector g.
    """
    rho = _as_rho(state)
    names = SIGMA_NAMES if subset is None else validate_sigma_subset(subset)
    fluxes = reaction_fluxes(rho, params)
    out = np.zeros_like(rho, dtype=float)
    for name in names:
        nu = STOICHIOMETRY[name].reshape((5,) + (1,) * (rho.ndim - 1))
        out = out + nu * fluxes[name]
    return out


def validate_sigma_subset(subset: Iterable[str]) -> tuple:
    names = tuple(subset)
    for name in names:
        if name not in SIGMA_NAMES:
            raise ConfigError(f"unknown rate constant {name!r}; expected one of {SIGMA_NAMES}")
    return names


def reaction_rhs(state, params: ModelParams, kappa=1.0) -> np.ndarray:
    """``kappa * g(rho)`` pointwise; kappa is a scalar or one value per point."""
    rho = _as_rho(state)
    _check_rho(rho)
    kappa = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(kappa)):
        raise NumericDomainError("non-finite kappa")
    if np.any(kappa <= 0):
        raise NumericDomainError("kappa must be strictly positive")
    return kappa * reaction_terms(rho, params)


def diffusion_rhs(state: FieldState, params: ModelParams) -> np.ndarray:
    """Second-order central differences with reflected ghost points."""
    rho = state.rho
    if state.N < 2:
        raise ConfigError("diffusion needs N >= 2")
    lap = np.empty_like(rho)
    lap[:, 1:-1] = rho[:, :-2] - 2.0 * rho[:, 1:-1] + rho[:, 2:]
    lap[:, 0] = 2.0 * (rho[:, 1] - rho[:, 0])
    lap[:, -1] = 2.0 * (rho[:, -2] - rho[:, -1])
    return params.diffusion_vector()[:, None] * lap / state.dx**2


def trapezoid_weights(n_points: int) -> np.ndarray:
    w = np.ones(n_points)
    w[0] = w[-1] = 0.5
    return w


def conserved_totals(state: FieldState) -> ConservedTotals:
    w = trapezoid_weights(state.x.size) * state.dx
    D, E = CONSERVATION_VECTORS @ state.rho @ w
    return ConservedTotals(float(D), float(E))
