"""Physical observables, tail fits, Higgs/gauge reconstruction and the solve report."""

import json
from dataclasses import dataclass, field
from math import isfinite, pi

import numpy as np
from jsonschema import Draft202012Validator

from .config import error_path
from .errors import TailNotConverged, WindowTooShort
from .model import FIVE, VortexSet
from .plane import PlaneOutcome, plane_flux
from .radial import RadialProfile, forcing_integral, tail_start
from .torus import IterationOutcome, TorusGrid, flux_identity

MIN_FIT_POINTS = 8


def flux(obj, lambda_: float | None = None, cell: float | None = None) -> float:
    """Magnetic flux Φ = (λ/2)∫e^u(1 − e^u)^5 dx.

    Accepts a radial profile (πλ∫e^{2t}g dt with analytic tails), a torus or
    plane outcome, or a raw array of u values with `lambda_` and `cell`.
    """
    if isinstance(obj, RadialProfile):
        return pi * forcing_integral(obj)
    if isinstance(obj, IterationOutcome):
        return flux_identity(obj.v.grid, obj.u, obj.lambda_)
    if isinstance(obj, PlaneOutcome):
        return plane_flux(obj)
    if lambda_ is None or cell is None:
        raise ValueError("raw fields need lambda_ and cell")
    return float(0.5 * lambda_ * FIVE.g(np.asarray(obj, dtype=float)).sum() * cell)


def energy_and_charge(flux_value: float, kappa: float) -> tuple[float, float]:
    """Self-dual energy E = Φ and charge Q = κΦ."""
    return flux_value, kappa * flux_value


def _fit_window(profile: RadialProfile) -> slice:
    try:
        start = tail_start(profile)
    except TailNotConverged as e:
        raise WindowTooShort(str(e)) from e
    n = len(profile.t) - start
    k = start + (3 * n) // 4
    if len(profile.t) - k < MIN_FIT_POINTS:
        raise WindowTooShort(f"{len(profile.t) - k} tail points after the forcing decayed (need {MIN_FIT_POINTS})")
    return slice(k, None)


def decay_fit(profile: RadialProfile) -> float:
    """β from a least-squares fit of u ≈ −βt + c over the last quarter of the decayed tail."""
    w = _fit_window(profile)
    slope, _ = np.polyfit(profile.t[w], profile.u[w], 1)
    return float(-slope)


def covariant_decay_slope(profile: RadialProfile) -> float:
    """Slope of ln|D_jφ|² = ln(½u′²e^{u−2t}) in t over the same window; ≈ −(2 + β)."""
    w = _fit_window(profile)
    log_d2 = np.log(0.5 * profile.up[w] ** 2) + profile.u[w] - 2 * profile.t[w]
    slope, _ = np.polyfit(profile.t[w], log_d2, 1)
    return float(slope)


@dataclass(frozen=True, eq=False)
class HiggsGauge:
    """|φ|, A₁, A₂ on a grid; masked nodes (near vortices) hold NaN gauge values."""
    abs_phi: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    mask: np.ndarray

    @property
    def masked_nodes(self) -> list[tuple[int, int]]:
        return [tuple(int(i) for i in ij) for ij in np.argwhere(self.mask)]


def _phase_gradient(X, Y, vortices: VortexSet, grid: TorusGrid | None):
    """Σ n_s ∇arg(z − p_s) = Σ n_s(−dy, dx)/r², with minimum-image displacements on a torus."""
    t1 = np.zeros_like(X, dtype=float)
    t2 = np.zeros_like(X, dtype=float)
    dist = np.full_like(X, np.inf, dtype=float)
    for p, n in vortices:
        if grid is not None:
            dx, dy = grid.displacement(p)
        else:
            dx, dy = X - p[0], Y - p[1]
        r2 = dx * dx + dy * dy
        with np.errstate(divide='ignore', invalid='ignore'):
            t1 -= n * dy / r2
            t2 += n * dx / r2
        dist = np.minimum(dist, np.sqrt(r2))
    return t1, t2, dist


def _gradient(u, hx, hy, periodic: bool):
    if periodic:
        return (
            (np.roll(u, -1, 0) - np.roll(u, 1, 0)) / (2 * hx),
            (np.roll(u, -1, 1) - np.roll(u, 1, 1)) / (2 * hy),
        )
    return tuple(np.gradient(u, hx, hy, edge_order=2))


def reconstruct_higgs_gauge(
    u: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    vortices: VortexSet,
    grid: TorusGrid | None = None,
) -> HiggsGauge:
    """Recover |φ| = e^{u/2} and A from ln φ = ½u + iθ, θ = Σ n_s arg(z − p_s).

    A₁ = −2Re{i∂̄ ln φ} = ∂₁θ + ½∂₂u and A₂ = −2Im{i∂̄ ln φ} = ∂₂θ − ½∂₁u,
    with ∂̄ = ½(∂₁ + i∂₂). u is differenced centrally; ∇θ is evaluated
    exactly. Nodes within one cell diagonal of a vortex are masked. Pass
    `grid` for periodic fields; X, Y then come from `grid.coords()`.
    """
    hx = float(X[1, 0] - X[0, 0])
    hy = float(Y[0, 1] - Y[0, 0])
    u1, u2 = _gradient(u, hx, hy, grid is not None)
    t1, t2, dist = _phase_gradient(X, Y, vortices, grid)
    mask = dist <= 1.01 * np.hypot(hx, hy)
    A1 = np.where(mask, np.nan, t1 + 0.5 * u2)
    A2 = np.where(mask, np.nan, t2 - 0.5 * u1)
    abs_phi = np.exp(0.5 * u)
    for p, _ in vortices:
        if grid is not None:
            abs_phi[grid.node_of(p)] = 0.0
        else:
            d = np.hypot(X - p[0], Y - p[1])
            abs_phi[np.unravel_index(int(np.argmin(d)), d.shape)] = 0.0
    return HiggsGauge(abs_phi, A1, A2, mask)


def loop_integral(hg: HiggsGauge, X: np.ndarray, Y: np.ndarray, i0: int, i1: int, j0: int, j1: int) -> float:
    """∮A·dl counterclockwise around the rectangle of grid lines i0..i1 × j0..j1 (trapezoid rule)."""
    x, y = X[:, 0], Y[0, :]
    bottom = np.trapezoid(hg.A1[i0:i1 + 1, j0], x[i0:i1 + 1])
    right = np.trapezoid(hg.A2[i1, j0:j1 + 1], y[j0:j1 + 1])
    top = np.trapezoid(hg.A1[i0:i1 + 1, j1], x[i0:i1 + 1])
    left = np.trapezoid(hg.A2[i0, j0:j1 + 1], y[j0:j1 + 1])
    return float(bottom + right - top - left)


def enclosed_flux(u: np.ndarray, lambda_: float, cell: float, i0: int, i1: int, j0: int, j1: int) -> float:
    """(λ/2)Σ e^u(1 − e^u)^5 h² over the rectangle, trapezoid weights on its edges."""
    w = np.ones((i1 - i0 + 1, j1 - j0 + 1))
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    g = FIVE.g(u[i0:i1 + 1, j0:j1 + 1])
    return float(0.5 * lambda_ * (w * g).sum() * cell)


def five_point_laplacian(u: np.ndarray, hx: float, hy: float, periodic: bool) -> np.ndarray:
    """5-point Δ_h u; without periodic wrap the outermost ring is NaN."""
    if periodic:
        return (
            (np.roll(u, -1, 0) - 2 * u + np.roll(u, 1, 0)) / hx ** 2
            + (np.roll(u, -1, 1) - 2 * u + np.roll(u, 1, 1)) / hy ** 2
        )
    out = np.full(u.shape, np.nan)
    out[1:-1, 1:-1] = (
        (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hx ** 2
        + (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / hy ** 2
    )
    return out


def log_singularity_laplacian(X: np.ndarray, Y: np.ndarray, vortices: VortexSet) -> np.ndarray:
    """5-point Δ_h of Σ 2n_s ln|x − p_s| on an open grid, with ln 0 read as 0.

    Subtracting it from Δ_h u leaves the stencil of the smooth part only; the
    stencil of the logarithm itself is not zero next to a vortex.
    """
    hx = float(X[1, 0] - X[0, 0])
    hy = float(Y[0, 1] - Y[0, 0])
    s = np.zeros_like(X, dtype=float)
    for (px, py), n in vortices:
        r = np.hypot(X - px, Y - py)
        with np.errstate(divide='ignore'):
            s += 2 * n * np.where(r > 0, np.log(r), 0.0)
    return five_point_laplacian(s, hx, hy, periodic=False)


def laplacian_flux_estimate(lap_u: np.ndarray, mask: np.ndarray, cell: float) -> float:
    """Σ −½Δ_h u h² over unmasked nodes; F₁₂ = −½Δ ln|φ|² away from the vortices."""
    return float(-0.5 * np.nansum(lap_u[~mask]) * cell)


LAPLACIAN_FLUX_TOLERANCE = 0.05

REPORT_FIELDS = (
    'mode', 'status', 'solver', 'N', 'lambda', 'kappa', 'flux', 'energy', 'charge',
    'beta', 'a', 'identity_residuals', 'decay_slope', 'convergence', 'provenance',
    'error', 'extra',
)


def _clean(x):
    if isinstance(x, float):
        return x if isfinite(x) else None
    if isinstance(x, np.floating):
        return _clean(float(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass
class SolveReport:
    """Converged solution summary, serialized to report.json.

    `energy` is the self-dual value Φ; `charge` is κΦ.
    """
    mode: str
    status: str
    solver: str
    N: int
    lambda_: float
    kappa: float
    flux: float | None = None
    energy: float | None = None
    charge: float | None = None
    beta: float | None = None
    a: float | None = None
    identity_residuals: tuple[float, float] | None = None
    decay_slope: float | None = None
    convergence: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    error: dict | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.flux is not None and self.energy is None:
            self.energy, self.charge = energy_and_charge(self.flux, self.kappa)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d['lambda'] = d.pop('lambda_')
        return _clean({k: d[k] for k in REPORT_FIELDS})

    def to_json(self) -> str:
        # repr floats: shortest form that round-trips exactly
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + '\n'


NUMBER_OR_NULL = {'type': ['number', 'null']}

REPORT_SCHEMA = {
    '$schema': 'https://json-schema.org/draft/2020-12/schema',
    'type': 'object',
    'properties': {
        'mode': {'type': 'string'},
        'status': {'type': 'string'},
        'solver': {'type': 'string'},
        'N': {'type': 'integer', 'minimum': 0},
        'lambda': {'type': 'number'},
        'kappa': {'type': 'number'},
        'flux': NUMBER_OR_NULL,
        'energy': NUMBER_OR_NULL,
        'charge': NUMBER_OR_NULL,
        'beta': NUMBER_OR_NULL,
        'a': NUMBER_OR_NULL,
        'identity_residuals': {
            'oneOf': [{'type': 'null'}, {'type': 'array', 'items': NUMBER_OR_NULL, 'minItems': 2, 'maxItems': 2}],
        },
        'decay_slope': NUMBER_OR_NULL,
        'convergence': {'type': 'object'},
        'provenance': {'type': 'object'},
        'error': {
            'oneOf': [
                {'type': 'null'},
                {'type': 'object', 'properties': {'code': {'type': 'string'}}, 'required': ['code']},
            ],
        },
        'extra': {'type': 'object'},
    },
    'required': list(REPORT_FIELDS),
    'additionalProperties': False,
}


def validate_report(doc: dict) -> list[str]:
    """Problems with a report document, in schema order."""
    problems = []
    for error in Draft202012Validator(REPORT_SCHEMA).iter_errors(doc):
        if error.validator == 'required':
            problems += [f"missing field {k!r}" for k in error.validator_value if k not in error.instance]
        elif error.validator == 'additionalProperties':
            problems += [f"unknown field {k!r}" for k in error.instance if k not in REPORT_SCHEMA['properties']]
        else:
            problems.append(f"{error_path(error)}: {error.message}")
    return problems
