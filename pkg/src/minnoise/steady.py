"""Spatially constant fixed point and reaction Jacobians."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConvergenceError, NonphysicalRootError
from .model import (
    SIGMA_NAMES,
    STOICHIOMETRY,
    ModelParams,
    reaction_fluxes,
    reaction_terms,
    validate_sigma_subset,
)

# d(rho)/d(DD, DT, E) once d and de are eliminated through the totals
_ELIMINATION = np.array(
    [[1.0, 0.0, 0.0],
     [0.0, 1.0, 0.0],
     [0.0, 0.0, 1.0],
     [-1.0, -1.0, 1.0],
     [0.0, 0.0, -1.0]]
)


@dataclass(frozen=True)
class FixedPoint:
    rho_inf: np.ndarray
    residual_norm: float
    params_used: ModelParams
    iterations: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "rho_inf": self.rho_inf.tolist(),
                "residual_norm": self.residual_norm,
                "iterations": self.iterations,
                "params": self.params_used.to_dict(),
            },
            indent=2,
        )


@dataclass(frozen=True)
class JacobianSet:
    F: np.ndarray
    G: np.ndarray
    J: np.ndarray
    perturbed_subset: tuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "perturbed_subset": list(self.perturbed_subset),
                "F": self.F.tolist(),
                "G": self.G.tolist(),
                "J": self.J.tolist(),
            },
            indent=2,
        )


def expand_reduced(u, params: ModelParams) -> np.ndarray:
    """Rebuild all five concentrations from ``(DD, DT, E)``."""
    DD, DT, E = u
    de = params.rho_Etot - E
    d = params.rho_Dtot - DD - DT - de
    return np.array([DD, DT, E, d, de])


def flux_scale(rho, params: ModelParams) -> float:
    """Largest single reaction flux, the natural size of g."""
    return max(float(np.max(np.abs(f))) for f in reaction_fluxes(np.asarray(rho), params).values())


def solve_fixed_point(
    params: ModelParams,
    initial_guess=None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> FixedPoint:
    """Damped Newton on the three reduced unknowns (DD, DT, E).

    The residual is the (DD, DT, E) rows of g; the d and de rows follow
    from the two conservation identities.
    """
    if initial_guess is None:
        u = np.array([params.rho_Dtot / 4, params.rho_Dtot / 4, params.rho_Etot / 2])
    else:
        u = np.array(initial_guess, dtype=float)
        if u.shape == (5,):
            u = u[:3]

    def residual(u):
        return reaction_terms(expand_reduced(u, params), params)[:3]

    def norm(u):
        rho = expand_reduced(u, params)
        return float(np.max(np.abs(reaction_terms(rho, params)))) / max(1.0, flux_scale(rho, params))

    r = residual(u)
    res = norm(u)
    for it in range(1, max_iter + 1):
        Jr = analytic_jacobians(expand_reduced(u, params), params).J[:3] @ _ELIMINATION
        try:
            step = np.linalg.solve(Jr, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular reduced Jacobian at iteration {it}", u, res) from exc
        lam = 1.0
        for _ in range(30):
            trial = u + lam * step
            trial_res = norm(trial)
            if np.isfinite(trial_res) and trial_res <= res:
                break
            lam *= 0.5
        else:
            trial = u + lam * step
            trial_res = norm(trial)
        u, res = trial, trial_res
        r = residual(u)
        if res < tol:
            rho = expand_reduced(u, params)
            if np.any(rho < 0):
                raise NonphysicalRootError(f"fixed point has negative components: {rho}", rho)
            return FixedPoint(rho, res, params, it)
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {res:.3g})", u, res)


def _flux_gradients(rho, params: ModelParams) -> dict:
    """Gradient of each flux with respect to (DD, DT, E, d, de)."""
    DD, DT, E, d, de = rho
    r = params.rates()
    return {
        "sigma_de": np.array([0.0, 0.0, 0.0, 0.0, r["sigma_de"]]),
        "sigma_DT": np.array([r["sigma_DT"], 0.0, 0.0, 0.0, 0.0]),
        "sigma_D": np.array([0.0, r["sigma_D"], 0.0, 0.0, 0.0]),
        "sigma_dD": r["sigma_dD"] * np.array([0.0, d + de, 0.0, DT, DT]),
        "sigma_E": r["sigma_E"] * np.array([0.0, 0.0, d, E, 0.0]),
    }


def analytic_jacobians(rho_inf, params: ModelParams, perturbed_subset: Iterable[str] | None = None) -> JacobianSet:
    """Split the reaction Jacobian into an unperturbed F and perturbed G.

    G collects the terms of the rate constants in ``perturbed_subset``
    (all of them by default, giving F = 0).
    """
    subset = SIGMA_NAMES if perturbed_subset is None else validate_sigma_subset(perturbed_subset)
    grads = _flux_gradients(np.asarray(rho_inf, dtype=float), params)
    F = np.zeros((5, 5))
    G = np.zeros((5, 5))
    for name in SIGMA_NAMES:
        block = np.outer(STOICHIOMETRY[name], grads[name])
        if name in subset:
            G += block
        else:
            F += block
    return JacobianSet(F, G, F + G, tuple(subset))


def finite_difference_jacobian(rho, params: ModelParams, subset=None, rel_step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of the reaction terms, column by column."""
    rho = np.asarray(rho, dtype=float)
    scale = max(1.0, float(np.max(np.abs(rho))))
    h = rel_step * scale
    out = np.empty((5, 5))
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        out[:, k] = (reaction_terms(rho + e, params, subset) - reaction_terms(rho - e, params, subset)) / (2 * h)
    return out
