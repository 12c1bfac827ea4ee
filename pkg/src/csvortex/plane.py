"""Full-plane topological solver on an exhausting family of squares.

u = u₀ + v where u₀ = −Σn_s ln(1 + |x − p_s|⁻²) carries the Dirac sources and
v solves Δv = λf(u₀ + v) + g, g = 4Σn_s(1 + |x − p_s|²)⁻², with Dirichlet data
on the square. Squares stand in for the balls of the exhaustion argument;
everything it uses (nesting, Dirichlet data, the maximum principle for the
5-point stencil) holds on them.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from math import pi
from typing import Callable, Literal

import numpy as np
from scipy import fft
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import InequalityViolation, MonotonicityViolation
from .model import Nonlinearity, NonlinearityConstants, VortexSet
from .radial import RadialProfile, ShootingOptions, topological_profile
from .torus import MONOTONE_SLACK, Outcome, SolverOptions

Log = Callable[[str], None] | None
Closure = Literal['zero', 'asymptotic']


@dataclass(frozen=True)
class SquareDomain:
    """[−R, R]² with n interior nodes per side at −R + i·h, h = 2R/(n + 1)."""
    R: float
    n: int

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.n < 3:
            raise ValueError(f"need at least 3 interior nodes per side, got {self.n}")

    @property
    def h(self) -> float:
        return 2 * self.R / (self.n + 1)

    def axis(self, with_boundary: bool = False) -> np.ndarray:
        if with_boundary:
            return -self.R + self.h * np.arange(self.n + 2)
        return -self.R + self.h * np.arange(1, self.n + 1)

    def coords(self, with_boundary: bool = False) -> tuple[np.ndarray, np.ndarray]:
        x = self.axis(with_boundary)
        return np.meshgrid(x, x, indexing='ij')

    def check_contains(self, vortices: VortexSet) -> None:
        for x, y in vortices.points:
            if not (abs(x) < self.R and abs(y) < self.R):
                raise ValueError(f"vortex ({x}, {y}) not strictly inside (-{self.R}, {self.R})^2")

    def nested(self, R: float) -> 'SquareDomain':
        """Largest square of half-width ≤ R on this domain's lattice."""
        k = int(np.floor(2 * R / self.h - 1))
        if (self.n - k) % 2:
            k -= 1
        if k < 3:
            raise ValueError(f"R={R} too small for spacing {self.h}")
        return SquareDomain(self.h * (k + 1) / 2, k)

    def offset_in(self, outer: 'SquareDomain') -> int:
        """Index offset of this domain's interior inside a larger nested one."""
        return int(round((outer.R - self.R) / self.h))


@dataclass(frozen=True, eq=False)
class PlaneField:
    """Interior values on a square; the boundary closure lives with the solver."""
    values: np.ndarray
    domain: SquareDomain

    def on(self, outer: SquareDomain) -> tuple[slice, slice]:
        """Slices of `outer`'s interior covering this field's nodes."""
        k = self.domain.offset_in(outer)
        s = slice(k, k + self.domain.n)
        return s, s


def _r2(x, y, vortices: VortexSet):
    for (px, py), n in vortices:
        yield (np.asarray(x) - px) ** 2 + (np.asarray(y) - py) ** 2, n


def background_u0_plane(x, y, vortices: VortexSet, r_min: float = 0.0) -> np.ndarray:
    """u₀ = −Σ n_s ln(1 + |x − p_s|⁻²), with |x − p_s| clamped below by `r_min`."""
    out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    with np.errstate(divide='ignore'):
        for r2, n in _r2(x, y, vortices):
            out -= n * np.log1p(1.0 / np.maximum(r2, r_min ** 2))
    return out


def source_g_plane(x, y, vortices: VortexSet) -> np.ndarray:
    """g = 4Σ n_s(1 + |x − p_s|²)⁻², which integrates to 4πN over the plane."""
    out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    for r2, n in _r2(x, y, vortices):
        out += 4 * n / (1 + r2) ** 2
    return out


def _dirichlet_eigs(domain: SquareDomain) -> np.ndarray:
    k = np.arange(1, domain.n + 1)
    lam1 = -(4 / domain.h ** 2) * np.sin(pi * k / (2 * (domain.n + 1))) ** 2
    return lam1[:, None] + lam1[None, :]


def _frame(domain: SquareDomain, boundary) -> np.ndarray:
    """(n+2)² array holding Dirichlet data on the frame and zeros inside."""
    full = np.zeros((domain.n + 2, domain.n + 2))
    if boundary is None:
        return full
    X, Y = domain.coords(with_boundary=True)
    b = np.asarray(boundary(X, Y), dtype=float)
    full[0, :], full[-1, :] = b[0, :], b[-1, :]
    full[:, 0], full[:, -1] = b[:, 0], b[:, -1]
    return full


def _boundary_term(domain: SquareDomain, frame: np.ndarray) -> np.ndarray:
    """Contribution of the frame values to the 5-point Laplacian at interior nodes."""
    out = np.zeros((domain.n, domain.n))
    out[0, :] += frame[0, 1:-1]
    out[-1, :] += frame[-1, 1:-1]
    out[:, 0] += frame[1:-1, 0]
    out[:, -1] += frame[1:-1, -1]
    return out / domain.h ** 2


def dirichlet_laplacian(domain: SquareDomain, v: np.ndarray, frame: np.ndarray | None = None) -> np.ndarray:
    """5-point Laplacian of interior values v with frame data (zero if omitted)."""
    full = np.zeros((domain.n + 2, domain.n + 2)) if frame is None else frame.copy()
    full[1:-1, 1:-1] = v
    return (
        full[:-2, 1:-1] + full[2:, 1:-1] + full[1:-1, :-2] + full[1:-1, 2:] - 4 * full[1:-1, 1:-1]
    ) / domain.h ** 2


def _sine_solve(domain: SquareDomain, K: float, rhs: np.ndarray) -> np.ndarray:
    return fft.idstn(fft.dstn(rhs, type=1) / (_dirichlet_eigs(domain) - K), type=1)


def dirichlet_helmholtz_solve(domain: SquareDomain, K: float, rhs, boundary=None) -> PlaneField:
    """Solve (Δ_h − K)v = rhs with v = boundary(x, y) on the frame.

    The frame values are moved to the right-hand side at the nodes next to
    the boundary, and the interior system is diagonalized by the type-I
    sine transform in each direction.
    """
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    rhs = np.asarray(rhs, dtype=float)
    if boundary is not None:
        rhs = rhs - _boundary_term(domain, _frame(domain, boundary))
    return PlaneField(_sine_solve(domain, K, rhs), domain)


@dataclass(frozen=True)
class PlaneOptions:
    """Plane solver settings.

    `closure` picks the Dirichlet data: 'zero' is v = −u₀ (u = 0 on the
    boundary), 'asymptotic' sets u to the radial topological solution of
    total multiplicity N about the vortices' weighted center, which decays
    like −(4λ)^(−1/4)|x|^(−1/2).
    With `newton`, a monotone warm-up of `warmup` sweeps is followed by
    Newton steps solved with preconditioned GMRES.
    """
    solver: SolverOptions = field(default_factory=SolverOptions)
    closure: Closure = 'zero'
    newton: bool = True
    warmup: int = 200
    newton_max: int = 40
    gmres_rtol: float = 1e-4
    gmres_restart: int = 60
    lift: bool = True


@dataclass(frozen=True, eq=False)
class PlaneOutcome:
    tag: Outcome
    v: PlaneField
    u0: np.ndarray
    source: np.ndarray
    frame: np.ndarray
    lambda_: float
    K: float
    power: int
    iterations: int
    newton_steps: int
    residual_history: np.ndarray
    max_increment: float
    closure: Closure
    reason: str | None = None
    vortices: VortexSet = field(default_factory=VortexSet)

    @property
    def converged(self) -> bool:
        return self.tag is Outcome.CONVERGED

    @property
    def domain(self) -> SquareDomain:
        return self.v.domain

    @property
    def u(self) -> np.ndarray:
        return self.u0 + self.v.values

    @property
    def final_residual(self) -> float:
        return float(self.residual_history[-1]) if len(self.residual_history) else 0.0

    def boundary_band(self) -> float:
        """max |u| over the nodes next to the boundary."""
        u = self.u
        band = np.concatenate([u[0, :], u[-1, :], u[:, 0], u[:, -1]])
        return float(np.abs(band).max())


def _center(vortices: VortexSet) -> tuple[float, float]:
    if not len(vortices):
        return 0.0, 0.0
    w = np.asarray(vortices.multiplicities, dtype=float)
    pts = np.asarray(vortices.points)
    return tuple((pts * w[:, None]).sum(0) / w.sum())


@lru_cache(maxsize=16)
def far_field_profile(N: int, lambda_: float, power: int = 5) -> RadialProfile:
    """Radial topological solution with N vortices at the origin."""
    return topological_profile(N, lambda_, ShootingOptions(power=power))


def closure_function(vortices: VortexSet, lambda_: float, closure: Closure, r_min: float, power: int = 5):
    """Dirichlet data for v as a function of (x, y)."""
    if closure == 'zero' or vortices.N == 0:
        return lambda X, Y: -background_u0_plane(X, Y, vortices, r_min)
    if closure != 'asymptotic':
        raise ValueError(f"unknown closure {closure!r}")
    profile = far_field_profile(vortices.N, float(lambda_), power)
    cx, cy = _center(vortices)

    def data(X, Y):
        r = np.hypot(X - cx, Y - cy)
        return -background_u0_plane(X, Y, vortices, r_min) + profile.evaluate(r)
    return data


def monotone_iterate_plane(
    domain: SquareDomain,
    vortices: VortexSet,
    lambda_: float,
    opts: PlaneOptions | None = None,
    subsolution: PlaneField | None = None,
    v_init: np.ndarray | None = None,
    power: int = 5,
    log: Log = None,
) -> PlaneOutcome:
    """Dirichlet monotone iteration (Δ_h − K)v_n = λf(u₀ + v_{n−1}) − Kv_{n−1} + g.

    Starts from the discrete super-solution −u₀ + ψ, where ψ ≥ 0 absorbs the
    stencil's truncation error next to the vortices (Δ_hψ = min(g − Δ_h(−u₀), 0),
    ψ = 0 on the frame). Iterates are asserted non-increasing, and above
    `subsolution` if given, for every monotone sweep. With a user `v_init`
    no ordering is asserted.

    Raises:
        MonotonicityViolation: an iterate rose, or dropped below the sub-solution.
    """
    opts = opts or PlaneOptions()
    domain.check_contains(vortices)
    nl = Nonlinearity(power)
    K = opts.solver.K_for(lambda_, NonlinearityConstants.for_power(power))
    tol = opts.solver.tol
    h = domain.h
    X, Y = domain.coords()
    u0 = background_u0_plane(X, Y, vortices, r_min=h / 4)
    g = source_g_plane(X, Y, vortices)
    closure = opts.closure if power > 1 else 'zero'
    frame = _frame(domain, closure_function(vortices, lambda_, closure, h / 4, power))
    bterm = _boundary_term(domain, frame)

    def res_of(v):
        return dirichlet_laplacian(domain, v, frame) - lambda_ * nl.f(u0 + v) - g

    if v_init is not None:
        v = np.array(v_init, dtype=float)
        ordered = False
    else:
        v = -u0
        if opts.lift and vortices.N:
            r = g - dirichlet_laplacian(domain, v, frame)
            v = v + _sine_solve(domain, 0.0, np.minimum(r, 0.0))
        ordered = True

    history: list[float] = []
    max_inc = -np.inf
    tag, reason = Outcome.NOT_CONVERGED, 'exhausted'
    f_prev = lambda_ * nl.f(u0 + v)
    budget = min(opts.warmup, opts.solver.max_iter) if opts.newton else opts.solver.max_iter

    n = 0
    if vortices.N == 0 and v_init is None:
        v = np.zeros_like(u0)
        history.append(float(np.abs(res_of(v)).max()))
        tag, reason = Outcome.CONVERGED, None
    else:
        for n in range(1, budget + 1):
            v_new = _sine_solve(domain, K, f_prev - K * v + g - bterm)
            inc = v_new - v
            step_max = float(inc.max())
            max_inc = max(max_inc, step_max)
            if ordered:
                slack = MONOTONE_SLACK * max(1.0, float(np.abs(v).max()))
                if step_max > slack:
                    raise MonotonicityViolation(
                        f"plane iterate {n} rose by {step_max:.3g}", iteration=n, excess=step_max,
                    )
                if subsolution is not None:
                    below = float((subsolution.values - v_new).max())
                    if below > slack:
                        raise MonotonicityViolation(
                            f"plane iterate {n} fell {below:.3g} below the sub-solution", iteration=n, excess=below,
                        )
            f_new = lambda_ * nl.f(u0 + v_new)
            res = float(np.abs(K * inc + f_prev - f_new).max())
            v, f_prev = v_new, f_new
            if res < tol:
                res = max(res, float(np.abs(res_of(v)).max()))
            history.append(res)
            if log and n % 100 == 0:
                log(f"sweep {n}: residual {res:.3e}")
            if res < tol:
                tag, reason = Outcome.CONVERGED, None
                break

    steps = 0
    if tag is not Outcome.CONVERGED and opts.newton:
        v, steps, ok = _newton(domain, v, u0, lambda_, nl, res_of, history, opts, log)
        if ok:
            tag, reason = Outcome.CONVERGED, None
        else:
            reason = 'newton'

    if log:
        log(f"R={domain.R:.6g}, n={domain.n}: {tag.value} after {n} sweeps, {steps} Newton steps")
    return PlaneOutcome(
        tag, PlaneField(v, domain), u0, g, frame, lambda_, K, power, n, steps,
        np.asarray(history), max_inc, closure, reason, vortices,
    )


def _newton(domain, v, u0, lambda_, nl, res_of, history, opts: PlaneOptions, log: Log):
    """Damped Newton on Δ_h v − λf(u₀ + v) − g = 0; returns (v, steps, converged)."""
    size = domain.n * domain.n
    shape = (domain.n, domain.n)
    precond = LinearOperator(
        (size, size), matvec=lambda x: _sine_solve(domain, 0.0, x.reshape(shape)).ravel(), dtype=float,
    )
    r = res_of(v)
    rnorm = float(np.abs(r).max())
    for step in range(1, opts.newton_max + 1):
        if rnorm < opts.solver.tol:
            return v, step - 1, True
        fp = lambda_ * nl.f_prime(u0 + v)
        J = LinearOperator(
            (size, size),
            matvec=lambda x, fp=fp: (dirichlet_laplacian(domain, x.reshape(shape)) - fp * x.reshape(shape)).ravel(),
            dtype=float,
        )
        delta, info = gmres(
            J, -r.ravel(), rtol=opts.gmres_rtol, restart=opts.gmres_restart,
            maxiter=20, M=precond,
        )
        delta = delta.reshape(shape)
        t = 1.0
        while t >= 1 / 64:
            trial = v + t * delta
            r_trial = res_of(trial)
            trial_norm = float(np.abs(r_trial).max())
            if trial_norm < (1 - 1e-4 * t) * rnorm:
                break
            t /= 2
        else:
            if log:
                log(f"Newton step {step}: line search failed (gmres info {info})")
            return v, step, False
        v, r, rnorm = trial, r_trial, trial_norm
        history.append(rnorm)
        if log:
            log(f"Newton step {step}: residual {rnorm:.3e} (damping {t:g})")
    return v, opts.newton_max, rnorm < opts.solver.tol


def flux_tail(
    N: int,
    lambda_: float,
    half_width: float,
    power: int = 5,
    center: tuple[float, float] = (0.0, 0.0),
    samples: int = 4097,
) -> float:
    """(λ/2)∫ g of the radial far field outside the square [−S, S]².

    The radial solution about `center` satisfies d(r u′)/dr = −λ r g(u) and
    r u′ → 0 at infinity, so along the ray at angle θ the exterior integral
    λ∫ g r dr from the boundary distance ρ(θ) is r u′ at ρ(θ). The tail is
    ½∫ r u′(ρ(θ)) dθ.
    """
    profile = far_field_profile(N, float(lambda_), power)
    cx, cy = center
    theta = np.linspace(0.0, 2 * pi, samples)
    c, s = np.cos(theta), np.sin(theta)
    with np.errstate(divide='ignore'):
        # distance from the center to the boundary along each ray
        rx = np.where(c > 0, (half_width - cx) / c, np.where(c < 0, (-half_width - cx) / c, np.inf))
        ry = np.where(s > 0, (half_width - cy) / s, np.where(s < 0, (-half_width - cy) / s, np.inf))
    rho = np.minimum(rx, ry)
    return 0.5 * float(np.trapezoid(profile.slope(rho), theta))


def plane_flux(outcome: PlaneOutcome) -> float:
    """(λ/2)Σ e^u(1 − e^u)^p h², plus the radial far-field tail for the asymptotic closure."""
    d = outcome.domain
    nl = Nonlinearity(outcome.power)
    total = 0.5 * outcome.lambda_ * float(nl.g(outcome.u).sum()) * d.h ** 2
    N = outcome.vortices.N
    if outcome.closure == 'asymptotic' and N > 0:
        total += flux_tail(N, outcome.lambda_, d.R - d.h / 2, outcome.power, _center(outcome.vortices))
    return total


@dataclass(frozen=True)
class StageReport:
    R: float
    n: int
    flux: float
    iterations: int
    newton_steps: int
    final_residual: float
    boundary_band: float
    max_decrease_violation: float | None = None
    cauchy_gap: float | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class PlaneSolution:
    outcome: PlaneOutcome
    stages: list[StageReport]

    @property
    def cauchy_gap(self) -> float | None:
        return self.stages[-1].cauchy_gap if self.stages else None

    @property
    def flux(self) -> float:
        return self.stages[-1].flux


def solve_topological_plane(
    vortices: VortexSet,
    lambda_: float,
    R_schedule,
    n: int,
    opts: PlaneOptions | None = None,
    log: Log = None,
) -> PlaneSolution:
    """Solve on squares of growing half-width sharing one lattice.

    The spacing comes from the largest square (n interior nodes); each
    smaller square is snapped to that lattice so successive solutions can be
    compared node by node. Each stage after the first reports the largest
    increase v^(k) − v^(k−1) on the common nodes (nonpositive when the
    sequence decreases) and the Cauchy gap max|v^(k) − v^(k−1)|.
    """
    R_schedule = [float(R) for R in R_schedule]
    if any(b <= a for a, b in zip(R_schedule, R_schedule[1:])):
        raise ValueError(f"R_schedule must be increasing, got {R_schedule}")
    outer = SquareDomain(R_schedule[-1], n)
    domains = [outer.nested(R) for R in R_schedule[:-1]] + [outer]
    stages: list[StageReport] = []
    prev: PlaneOutcome | None = None
    out = None
    for d in domains:
        out = monotone_iterate_plane(d, vortices, lambda_, opts, log=log)
        if not out.converged:
            if log:
                log(f"stage R={d.R:.6g} did not converge ({out.reason})")
        rise = gap = None
        if prev is not None:
            sl = prev.v.on(d)
            diff = out.v.values[sl] - prev.v.values
            rise, gap = float(diff.max()), float(np.abs(diff).max())
        stages.append(StageReport(
            R=d.R, n=d.n, flux=plane_flux(out), iterations=out.iterations, newton_steps=out.newton_steps,
            final_residual=out.final_residual, boundary_band=out.boundary_band(),
            max_decrease_violation=rise, cauchy_gap=gap,
        ))
        prev = out
    return PlaneSolution(out, stages)


@dataclass(frozen=True, eq=False)
class ShallowSubsolution:
    """v_* = u_* − a − u₀ from the shallow equation's topological solution u_*."""
    v_star: PlaneField
    u_star: np.ndarray
    a: float
    mu: float
    method: str
    min_slack: float
    location: tuple[float, float]


def shallow_coupling(lambda_: float, a: float) -> float:
    """μ = λe^{−a}(e^{−a} − 1)⁴."""
    e = np.exp(-a)
    return float(lambda_ * e * (e - 1) ** 4)


def shallow_subsolution(
    vortices: VortexSet,
    lambda_: float,
    a: float,
    domain: SquareDomain,
    opts: PlaneOptions | None = None,
    shooting: ShootingOptions | None = None,
    log: Log = None,
) -> ShallowSubsolution:
    """Sub-solution from the classical equation Δu = μe^u(e^u − 1) + 4πΣn_sδ.

    Coincident vortices use the radial shooter (p = 1); otherwise the plane
    iteration is run with the classical nonlinearity. The discrete inequality
    Δ_h v_* ≥ λf(u₀ + v_*) + g is checked at every interior node with slack
    −10h².

    Raises:
        InequalityViolation: the inequality fails beyond the slack.
    """
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    mu = shallow_coupling(lambda_, a)
    h = domain.h
    Xf, Yf = domain.coords(with_boundary=True)
    u0_full = background_u0_plane(Xf, Yf, vortices, r_min=h / 4)

    if vortices.N == 0:
        v_full = np.full_like(u0_full, -a)
        method = 'trivial'
    elif vortices.is_radial:
        profile = topological_profile(vortices.N, mu, replace(shooting or ShootingOptions(), power=1), log=log)
        cx, cy = vortices.center
        r = np.maximum(np.hypot(Xf - cx, Yf - cy), 1e-200)
        # u_* − u₀ is smooth through the vortex; evaluate it unclamped
        smooth = np.minimum(profile.evaluate(r), 0.0) - vortices.N * (2 * np.log(r) - np.log1p(r * r))
        v_full = smooth - a
        method = 'radial'
    else:
        o = opts or PlaneOptions()
        shallow = monotone_iterate_plane(domain, vortices, mu, replace(o, closure='zero'), power=1, log=log)
        v_full = -u0_full - a
        v_full[1:-1, 1:-1] = shallow.v.values - a
        method = 'plane'

    u_full = u0_full + v_full + a
    v_int = v_full[1:-1, 1:-1]
    lap = dirichlet_laplacian(domain, v_int, v_full)
    X, Y = domain.coords()
    u0 = u0_full[1:-1, 1:-1]
    slack = lap - lambda_ * Nonlinearity(5).f(u0 + v_int) - source_g_plane(X, Y, vortices)
    k = np.unravel_index(int(np.argmin(slack)), slack.shape)
    worst = float(slack[k])
    where = (float(X[k]), float(Y[k]))
    if worst < -10 * h * h:
        raise InequalityViolation(
            f"sub-solution inequality fails by {-worst:.3g} at {where}", location=where, slack=worst,
        )
    return ShallowSubsolution(PlaneField(v_int, domain), u_full[1:-1, 1:-1], a, mu, method, worst, where)
