"""Linear stability of the constant steady state, mode by mode.

``H_omega = J - (omega pi / L)^2 diag(gamma)`` governs a perturbation of
shape ``cos(omega pi x / L)``.  The eigenbasis of ``H_1`` is used to
transform the perturbed Jacobian ``G`` into ``S^-1 G S``; its (1,1)
entry sets the first-order frequency shift (imaginary part) and
growth/decay (real part) of the oscillatory mode.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ConvergenceError, MinNoiseError, NumericDomainError
from .model import SIGMA_NAMES, ModelParams
from .steady import FixedPoint, analytic_jacobians, solve_fixed_point

HOPF_TOL = 0.05


def build_H(omega: int, J: np.ndarray, params: ModelParams) -> np.ndarray:
    if int(omega) != omega or omega < 1:
        raise ConfigError(f"spatial mode index must be a positive integer, got {omega!r}")
    k2 = (omega * math.pi / params.L) ** 2
    return np.asarray(J, dtype=float) - k2 * np.diag(params.diffusion_vector())


def _order(vals: np.ndarray) -> list:
    scale = 1.0 + float(np.max(np.abs(vals)))

    def cmp(i, j):
        dr = vals[i].real - vals[j].real
        if abs(dr) > 1e-12 * scale:
            return -1 if dr > 0 else 1
        di = vals[i].imag - vals[j].imag
        return -1 if di > 0 else (1 if di < 0 else 0)

    return sorted(range(len(vals)), key=functools.cmp_to_key(cmp))


def eigendecompose(H: np.ndarray):
    """Eigenvalues by descending real part (ties: descending imaginary).

    Eigenvectors are unit length with their largest-magnitude component
    real and positive.
    """
    H = np.asarray(H, dtype=float)
    if not np.all(np.isfinite(H)):
        raise NumericDomainError("matrix has non-finite entries")
    try:
        vals, vecs = np.linalg.eig(H)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    idx = _order(vals)
    vals = vals[idx].astype(complex)
    vecs = vecs[:, idx].astype(complex)
    for k in range(vecs.shape[1]):
        v = vecs[:, k]
        v = v / np.linalg.norm(v)
        p = v[np.argmax(np.abs(v))]
        vecs[:, k] = v * (abs(p) / p)
    hnorm = max(np.linalg.norm(H, 2), 1e-300)
    resid = np.linalg.norm(H @ vecs - vecs * vals, axis=0)
    if np.any(resid > 1e-10 * hnorm):
        raise ConvergenceError(f"eigenpair residual too large: {resid.max():.3g}")
    return vals, vecs


def oscillatory_pair(vals: np.ndarray):
    """Indices (plus, minus) of the conjugate pair maximising |Im|/(1+|Re|).

    Returns None when the spectrum is real.
    """
    best = None
    best_score = -1.0
    for i, lam in enumerate(vals):
        if lam.imag <= 0:
            continue
        j = int(np.argmin(np.abs(vals - np.conj(lam))))
        if j == i or abs(vals[j] - np.conj(lam)) > 1e-8 * (1 + abs(lam)):
            continue
        score = abs(lam.imag) / (1 + abs(lam.real))
        if score > best_score:
            best, best_score = (i, j), score
    return best


@dataclass
class SpectralReport:
    omega: int
    H_omega: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    theta1: float
    assumption_ok: bool
    oscillatory_index: tuple | None
    fixed_point: FixedPoint | None = None
    higher_mode_max_re: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def lambda1(self) -> complex:
        if self.oscillatory_index is None:
            return complex("nan")
        return complex(self.eigenvalues[self.oscillatory_index[0]])

    @property
    def period(self) -> float:
        return 2 * math.pi / self.theta1 if self.theta1 > 0 else math.inf

    def oscillatory_basis(self) -> np.ndarray:
        """Eigenvectors reordered so columns 0 and 1 are the +i/-i theta1 modes."""
        if self.oscillatory_index is None:
            raise NumericDomainError("no oscillatory eigenpair")
        p, m = self.oscillatory_index
        rest = [k for k in range(len(self.eigenvalues)) if k not in (p, m)]
        return self.eigenvectors[:, [p, m] + rest]

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "eigenvalues": [[v.real, v.imag] for v in self.eigenvalues],
            "theta1": self.theta1,
            "period_s": self.period,
            "assumption_ok": self.assumption_ok,
            "higher_mode_max_re": {str(k): v for k, v in self.higher_mode_max_re.items()},
            "notes": list(self.notes),
        }


def check_assumptions(vals: np.ndarray, pair, higher_max_re: dict, hopf_tol: float = HOPF_TOL):
    """Test the mode-1 Hopf structure and decay of higher modes; returns (ok, notes)."""
    notes = []
    if pair is None:
        return False, ["no oscillatory pair"]
    lam = vals[pair[0]]
    ratio = abs(lam.real) / abs(lam.imag)
    near_axis = [
        i for i, v in enumerate(vals)
        if v.imag > 0 and abs(v.real) < hopf_tol * abs(v.imag)
    ]
    ok = True
    if ratio >= hopf_tol:
        ok = False
        notes.append(f"|Re|/|Im| of the oscillatory pair is {ratio:.4f} >= {hopf_tol}")
    if len(near_axis) > 1:
        ok = False
        notes.append("more than one conjugate pair near the imaginary axis")
    rest = [v for k, v in enumerate(vals) if k not in pair]
    if not all(v.real < 0 for v in rest):
        ok = False
        notes.append("non-oscillatory eigenvalue with Re >= 0")
    bad = [w for w, m in higher_max_re.items() if not m < 0]
    if bad:
        ok = False
        notes.append(f"modes {bad} have eigenvalues with Re >= 0")
    return ok, notes


def spectral_report(
    params: ModelParams,
    omega: int = 1,
    fixed_point: FixedPoint | None = None,
    higher_modes: Iterable[int] = range(2, 7),
    hopf_tol: float = HOPF_TOL,
) -> SpectralReport:
    fp = fixed_point or solve_fixed_point(params)
    J = analytic_jacobians(fp.rho_inf, params).J
    H = build_H(omega, J, params)
    vals, vecs = eigendecompose(H)
    pair = oscillatory_pair(vals)
    theta1 = float(vals[pair[0]].imag) if pair else 0.0
    higher = {}
    for w in higher_modes:
        if w > omega:
            hv = np.linalg.eigvals(build_H(w, J, params))
            higher[w] = float(np.max(hv.real))
    ok, notes = check_assumptions(vals, pair, higher, hopf_tol)
    return SpectralReport(omega, H, vals, vecs, theta1, ok, pair, fp, higher, notes)


def g_hat(S: np.ndarray, G: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    """``S^-1 G S``; refuses a near-singular eigenvector matrix."""
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > max_cond:
        raise NumericDomainError(f"eigenvector matrix is near-singular (condition number {cond:.3g})")
    return np.linalg.solve(S, G @ S)


@dataclass(frozen=True)
class SensitivityEntry:
    sigma_name: str
    G_hat_11_real: float
    G_hat_11_imag: float


def g_hat_11(params: ModelParams, subset: Sequence[str] | None = None, report: SpectralReport | None = None) -> complex:
    rep = report or spectral_report(params)
    G = analytic_jacobians(rep.fixed_point.rho_inf, params, subset).G
    return complex(g_hat(rep.oscillatory_basis(), G)[0, 0])


def sensitivity_table(params: ModelParams, report: SpectralReport | None = None) -> list:
    """(1,1) entry of S^-1 G S with G built from one rate constant at a time."""
    rep = report or spectral_report(params)
    out = []
    for name in SIGMA_NAMES:
        z = g_hat_11(params, (name,), rep)
        out.append(SensitivityEntry(name, z.real, z.imag))
    return out


# -- parameter-plane scans --------------------------------------------------

@dataclass
class ScanResult:
    a_name: str
    b_name: str
    a_values: np.ndarray
    b_values: np.ndarray
    max_re: np.ndarray  # shape (len(a), len(b))
    period: np.ndarray
    valid: np.ndarray

    @property
    def n_invalid(self) -> int:
        return int(np.count_nonzero(~self.valid))

    def rows(self):
        for i, a in enumerate(self.a_values):
            for j, b in enumerate(self.b_values):
                yield a, b, self.max_re[i, j], self.period[i, j], bool(self.valid[i, j])


def _cell(params: ModelParams, guess):
    fp = solve_fixed_point(params, guess)
    J = analytic_jacobians(fp.rho_inf, params).J
    vals = np.linalg.eigvals(build_H(1, J, params))
    pair = oscillatory_pair(vals)
    period = 2 * math.pi / vals[pair[0]].imag if pair else math.nan
    return fp, float(np.max(vals.real)), period


def stability_scan(
    params: ModelParams,
    a_name: str,
    a_values: Sequence[float],
    b_name: str,
    b_values: Sequence[float],
    progress=None,
) -> ScanResult:
    """Max Re lambda(H_1) and 2 pi / Im lambda over a grid of two rates.

    Fixed points are continued cell to cell along a serpentine path; a
    cell whose solve fails is marked invalid and the scan moves on.
    """
    for name in (a_name, b_name):
        if name not in SIGMA_NAMES:
            raise ConfigError(f"unknown rate constant {name!r}")
    a_values = np.asarray(a_values, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    shape = (a_values.size, b_values.size)
    max_re = np.full(shape, np.nan)
    period = np.full(shape, np.nan)
    valid = np.zeros(shape, dtype=bool)
    guess = None
    for i, a in enumerate(a_values):
        cols = range(shape[1]) if i % 2 == 0 else range(shape[1] - 1, -1, -1)
        for j in cols:
            try:
                p = params.replace(**{a_name: float(a), b_name: float(b_values[j])})
                fp, mr, per = _cell(p, guess)
            except (MinNoiseError, np.linalg.LinAlgError, FloatingPointError):
                guess = None
                continue
            guess = fp.rho_inf
            max_re[i, j], period[i, j], valid[i, j] = mr, per, True
        if progress is not None:
            progress(i + 1, shape[0])
    return ScanResult(a_name, b_name, a_values, b_values, max_re, period, valid)


def zero_contour(a_values, b_values, Z, valid=None) -> list:
    """Segments of the Z = 0 level set by marching squares.

    Crossings are placed on cell edges by linear interpolation.  Cells
    with an invalid corner are skipped.  Returns ``[((a0, b0), (a1, b1)), ...]``.
    """
    a_values = np.asarray(a_values, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if valid is None:
        valid = np.isfinite(Z)
    segments = []
    if Z.shape[0] < 2 or Z.shape[1] < 2:
        return segments

    def cross(p, q, zp, zq):
        t = zp / (zp - zq)
        return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    for i in range(Z.shape[0] - 1):
        for j in range(Z.shape[1] - 1):
            if not valid[i:i + 2, j:j + 2].all():
                continue
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            pts = []
            for k in range(4):
                (i0, j0), (i1, j1) = corners[k], corners[(k + 1) % 4]
                z0, z1 = Z[i0, j0], Z[i1, j1]
                if (z0 < 0) != (z1 < 0):
                    pts.append(cross((a_values[i0], b_values[j0]), (a_values[i1], b_values[j1]), z0, z1))
            # 4 crossings: saddle cell, pair edges in order
            for k in range(0, len(pts) - 1, 2):
                segments.append((pts[k], pts[k + 1]))
    return segments
