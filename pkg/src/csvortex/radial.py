"""Shooting solver for radial vortices in t = ln r.

The radial equation is u″ + λe^{2t}g(u) = 0 with u = 2Nt + a + o(1) as
t → −∞. The shooting parameter a sorts trajectories into three classes:
Positive (u crosses 0 upward), Negative (u′ turns negative while u < 0; a
non-topological solution with decay exponent β = −lim u′) and the single
topological value a₀ that separates them.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from math import exp, expm1, log, sqrt
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import k0e, k1e

from .errors import BracketFailure, NoBracket, OutOfRange, StepFailure, TailNotConverged
from .model import POWER, Coupling, Nonlinearity, NonlinearityConstants

Log = Callable[[str], None] | None

PICARD_SPAN = 30.0
PICARD_NODES = 6001


def _default_scan_offsets() -> tuple[float, ...]:
    return tuple(float(d) for d in np.geomspace(1e-4, 48.0, 40))


@dataclass(frozen=True)
class ShootingOptions:
    """Numerical knobs shared by every shooting run.

    `t_start`/`t_max` bound the integration window, `abs_tol`/`rel_tol` go to
    the integrator, `classify_eps` decides when a turning point counts as
    Negative. `picard` is the number of fixed-point sweeps refining the
    initial state (0 disables). `horizon_pad` extends the window past the
    time at which the forcing switches on, so very negative a still turn.
    """
    t_start: float = -12.0
    t_max: float = 40.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    classify_eps: float = 1e-10
    picard: int = 0
    power: int = POWER
    report_dt: float = 0.005
    a_tol: float = 1e-12
    beta_tail_tol: float = 1e-14
    beta_tol: float = 1e-6
    horizon_pad: float = 20.0
    separation_tol: float = 1e-6
    max_expansions: int = 12
    scan_offsets: tuple[float, ...] = field(default_factory=_default_scan_offsets)

    def params(self, N: int, lambda_: float, a: float) -> 'ShootingParams':
        return ShootingParams(N=N, lambda_=lambda_, a=a, options=self)


@dataclass(frozen=True)
class ShootingParams:
    """One shooting run: winding N, coupling λ, parameter a.

    λ = 0 is accepted as a degenerate case (the forcing vanishes).
    """
    N: int
    lambda_: float
    a: float
    options: ShootingOptions = field(default_factory=ShootingOptions)

    def __post_init__(self):
        o = self.options
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a non-negative integer, got {self.N}")
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lambda_}")
        if not o.t_start < 0 < o.t_max:
            raise ValueError(f"need t_start < 0 < t_max, got {o.t_start}, {o.t_max}")
        if self.start_correction_bound >= o.abs_tol:
            raise ValueError(
                f"t_start={o.t_start} is not deep enough in the linear regime for lambda={self.lambda_}: "
                f"start correction bound {self.start_correction_bound:.3g} >= abs_tol {o.abs_tol:.3g}"
            )

    def __getattr__(self, name):
        # Forward option fields (t_start, t_max, abs_tol, ...) for convenience
        if name != 'options' and 'options' in self.__dict__:
            return getattr(self.__dict__['options'], name)
        raise AttributeError(name)

    @property
    def nonlinearity(self) -> Nonlinearity:
        return Nonlinearity(self.options.power)

    @property
    def start_correction_bound(self) -> float:
        """Bound on the gap between the zeroth-order start state and the true one."""
        g_max = NonlinearityConstants.for_power(self.options.power).g_max
        return self.lambda_ * g_max * exp(2 * self.options.t_start) / 4

    @property
    def forcing_onset(self) -> float:
        """Time at which λe^{(2+2N)t + a} reaches 1."""
        if self.lambda_ == 0:
            return -np.inf
        return (-self.a - log(self.lambda_)) / (2 + 2 * self.N)

    def horizon(self) -> float:
        return max(self.options.t_max, self.forcing_onset + self.options.horizon_pad)

    def with_a(self, a: float) -> 'ShootingParams':
        return replace(self, a=a)


class Tag(str, Enum):
    POSITIVE = 'Positive'
    NEGATIVE = 'Negative'
    UNDETERMINED = 'Undetermined'


@dataclass(frozen=True)
class Classification:
    """Outcome of one shot.

    Positive: u crossed 0 upward at `event_time`. Negative: u′ changed sign
    to negative at `event_time` with u < −classify_eps there. Undetermined:
    neither happened; `event_time` is the end of integration and `u_end`
    the last value, used to side the shot during bisection.
    """
    tag: Tag
    event_time: float
    u_end: float = 0.0

    @property
    def above_a0(self) -> bool:
        return self.tag is Tag.POSITIVE


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Trajectory of the shooting ODE sampled on a uniform reporting grid.

    `t_nodes` holds the integrator's own step nodes. For topological
    profiles the part after `t_reliable` is the matched far-field
    continuation rather than integrated data.
    """
    t: np.ndarray
    u: np.ndarray
    up: np.ndarray
    meta: ShootingParams
    classification: Classification
    t_nodes: np.ndarray = field(default_factory=lambda: np.empty(0))
    topological: bool = False
    t_reliable: float | None = None

    def __post_init__(self):
        if not (len(self.t) == len(self.u) == len(self.up) >= 2):
            raise ValueError("profile arrays must have equal length >= 2")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("profile times must be strictly increasing")
        if self.t_reliable is None:
            object.__setattr__(self, 't_reliable', float(self.t[-1]))

    @property
    def N(self) -> int:
        return self.meta.N

    @property
    def lambda_(self) -> float:
        return self.meta.lambda_

    @property
    def a(self) -> float:
        return self.meta.a

    def forcing(self) -> np.ndarray:
        """λe^{2t}g(u) along the grid (= −u″)."""
        return _forcing(self.t, self.u, self.lambda_, self.meta.nonlinearity)

    def ode_residual(self) -> np.ndarray:
        """u″ + λe^{2t}g(u) at interior grid points, u″ by differencing u′."""
        upp = np.gradient(self.up, self.t, edge_order=2)
        return (upp + self.forcing())[1:-1]

    def reliable(self) -> 'RadialProfile':
        """The integrated part only (drops any far-field continuation)."""
        if self.t_reliable >= self.t[-1]:
            return self
        k = int(np.searchsorted(self.t, self.t_reliable, side='right'))
        return replace(self, t=self.t[:k], u=self.u[:k], up=self.up[:k])

    def evaluate(self, r) -> np.ndarray:
        """u at radii r, with the asymptotic forms outside the sampled window."""
        t = np.log(np.maximum(np.asarray(r, dtype=float), np.finfo(float).tiny))
        spline = CubicHermiteSpline(self.t, self.u, self.up, extrapolate=False)
        out = np.asarray(spline(np.clip(t, self.t[0], self.t[-1])), dtype=float)
        left = t < self.t[0]
        out[left] = self.u[0] + 2 * self.N * (t[left] - self.t[0])
        right = t > self.t[-1]
        if np.any(right):
            if self.topological:
                out[right] = _far_field_tail(
                    t[right], self.t[-1], self.u[-1], self.meta.options.power, self.lambda_
                )
            else:
                out[right] = self.u[-1] + self.up[-1] * (t[right] - self.t[-1])
        return out

    def slope(self, r) -> np.ndarray:
        """du/dt = r·du/dr at radii r, linearly interpolated on the sampled window."""
        t = np.log(np.asarray(r, dtype=float))
        return np.interp(t, self.t, self.up)


def _forcing(t, u, lambda_, nl: Nonlinearity):
    with np.errstate(under='ignore'):
        return lambda_ * np.exp(2 * np.asarray(t)) * nl.g(u)


def _far_field_tail(t, t0, u0, power, lambda_):
    """Continue a topological profile from (t0, u0) with its linearized decay."""
    t = np.asarray(t, dtype=float)
    if power == 1:
        k = sqrt(lambda_)
        x, x0 = k * np.exp(t), k * exp(t0)
        return u0 * k0e(x) / k0e(x0) * np.exp(-(x - x0))
    alpha = 2.0 / (power - 1)
    return u0 * np.exp(-alpha * (t - t0))


def _far_field_slope(t, t0, u0, power, lambda_):
    """d/dt of `_far_field_tail`."""
    t = np.asarray(t, dtype=float)
    if power == 1:
        k = sqrt(lambda_)
        x, x0 = k * np.exp(t), k * exp(t0)
        # d/dt K₀(x) = −x·K₁(x)
        return -u0 * x * k1e(x) / k0e(x0) * np.exp(-(x - x0))
    alpha = 2.0 / (power - 1)
    return -alpha * u0 * np.exp(-alpha * (t - t0))


def init_condition(p: ShootingParams) -> tuple[float, float]:
    """State (u, u′) at t_start.

    Zeroth order: (2N·t_start + a, 2N). With `picard` sweeps, iterates
    u(t) = 2Nt + a − λ∫_{−∞}^{t}(t − s)e^{2s}g(u(s))ds on a window ending at
    t_start; the kernel's tail is bounded by e^{2T}/4, so the refinement moves
    the state by at most λ·sup g·e^{2·t_start}/4.
    """
    o = p.options
    u0 = 2 * p.N * o.t_start + p.a
    up0 = float(2 * p.N)
    if o.picard <= 0:
        return u0, up0
    if o.t_start >= -log(2):
        raise ValueError(f"Picard refinement needs t_start < -ln 2, got {o.t_start}")
    if p.lambda_ == 0:
        return u0, up0

    nl = p.nonlinearity
    s = np.linspace(o.t_start - PICARD_SPAN, o.t_start, PICARD_NODES)
    base = 2 * p.N * s + p.a
    u = base
    m0 = np.zeros_like(s)
    for _ in range(o.picard):
        w = _forcing(s, u, p.lambda_, nl)
        m0 = cumulative_trapezoid(w, s, initial=0.0)
        m1 = cumulative_trapezoid(s * w, s, initial=0.0)
        u = base - (s * m0 - m1)
    return float(u[-1]), float(up0 - m0[-1])


def _make_rhs(lambda_: float, power: int):
    def rhs(t, y):
        u, up = y
        if u >= 0 or lambda_ == 0:
            return [up, 0.0]
        q = -expm1(u)
        if q == 0.0:
            return [up, 0.0]
        return [up, -lambda_ * exp(2 * t + u + power * log(q))]
    return rhs


def _report_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    grid = np.arange(t0, t1, dt)
    if t1 - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid


def _trivial_profile(p: ShootingParams, u0: float, up0: float) -> tuple[RadialProfile, Classification]:
    o = p.options
    if u0 > 0:
        c = Classification(Tag.POSITIVE, o.t_start, u0)
        t = np.array([o.t_start, o.t_start + o.report_dt])
    else:
        c = Classification(Tag.UNDETERMINED, o.t_max, u0)
        t = _report_grid(o.t_start, o.t_max, max(o.report_dt, 0.1))
    u = u0 + up0 * (t - o.t_start)
    up = np.full_like(t, up0)
    return RadialProfile(t, u, up, p, c, t_nodes=t.copy()), c


def integrate(
    p: ShootingParams,
    stop_at_event: bool = False,
    log: Log = None,
) -> tuple[RadialProfile, Classification]:
    """Integrate from `init_condition` and classify the shot.

    Positive stops at the upward zero crossing of u. A Negative turn stops
    the run only with `stop_at_event`; otherwise integration continues to
    `p.horizon()` so the linear tail (and β) can be read off.

    Raises:
        StepFailure: the adaptive controller could not advance.
    """
    o = p.options
    u0, up0 = init_condition(p)
    if u0 > 0 or (u0 == 0 and up0 == 0):
        return _trivial_profile(p, u0, up0)

    def rise(t, y):
        return y[0]
    rise.terminal = True
    rise.direction = 1

    def turn(t, y):
        return y[1]
    turn.terminal = stop_at_event
    turn.direction = -1

    t_end = p.horizon()
    sol = solve_ivp(
        _make_rhs(p.lambda_, o.power),
        (o.t_start, t_end),
        [u0, up0],
        method='DOP853',
        rtol=o.rel_tol,
        atol=o.abs_tol,
        events=[rise, turn],
        dense_output=True,
    )
    if sol.status == -1:
        raise StepFailure(f"integration failed at a={p.a!r}: {sol.message}")

    t_last = float(sol.t[-1])
    u_last = float(sol.y[0, -1])
    if len(sol.t_events[0]):
        c = Classification(Tag.POSITIVE, float(sol.t_events[0][0]), u_last)
    else:
        c = Classification(Tag.UNDETERMINED, t_last, u_last)
        for te, ye in zip(sol.t_events[1], sol.y_events[1]):
            if ye[0] < -o.classify_eps:
                c = Classification(Tag.NEGATIVE, float(te), u_last)
                break
    if log:
        log(f"a={p.a!r}: {c.tag.value} at t={c.event_time:.6g}")

    grid = _report_grid(o.t_start, t_last, o.report_dt)
    u, up = sol.sol(grid)
    profile = RadialProfile(grid, u, up, p, c, t_nodes=np.asarray(sol.t))
    return profile, c


def classify(N: int, lambda_: float, a: float, opts: ShootingOptions | None = None) -> Classification:
    """Classify shooting parameter a, stopping at the first deciding event."""
    p = (opts or ShootingOptions()).params(N, lambda_, a)
    return integrate(p, stop_at_event=True)[1]


def _above(N, lambda_, a, opts: ShootingOptions) -> bool:
    """Whether a lies on the Positive side of a₀."""
    c = classify(N, lambda_, a, opts)
    if c.tag is Tag.UNDETERMINED:
        return c.u_end >= -opts.classify_eps
    return c.above_a0


def bracket_a0(
    N: int,
    lambda_: float,
    opts: ShootingOptions | None = None,
    log: Log = None,
) -> tuple[float, float]:
    """Bisect to a bracket (lo, hi) of a₀ with hi − lo ≤ a_tol.

    Starts from the a-priori interval (−λ·sup g/4 − 2 − 2N, λ·sup g/4] and
    widens either end geometrically if it does not classify as expected.

    Raises:
        BracketFailure: the ends could not be separated.
    """
    opts = opts or ShootingOptions()
    bound = lambda_ * NonlinearityConstants.for_power(opts.power).g_max / 4
    hi = bound * (1 + 1e-9) + 1e-9
    lo = -bound - 2 - 2 * N

    step = 2.0 + 2 * N
    for _ in range(opts.max_expansions):
        if _above(N, lambda_, hi, opts):
            break
        hi += step
        step *= 2
    else:
        raise BracketFailure(f"no Positive shot found up to a={hi!r} (N={N}, lambda={lambda_!r})")

    step = 2.0 + 2 * N
    for _ in range(opts.max_expansions):
        if not _above(N, lambda_, lo, opts):
            break
        lo -= step
        step *= 2
    else:
        raise BracketFailure(f"no Negative shot found down to a={lo!r} (N={N}, lambda={lambda_!r})")

    while hi - lo > opts.a_tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _above(N, lambda_, mid, opts):
            hi = mid
        else:
            lo = mid
    if log:
        log(f"a0 in [{lo!r}, {hi!r}]")
    return lo, hi


def find_a0(N: int, lambda_: float, opts: ShootingOptions | None = None, log: Log = None) -> float:
    """Topological shooting parameter a₀ (exactly 0 for N = 0)."""
    if N == 0:
        return 0.0
    lo, hi = bracket_a0(N, lambda_, opts, log=log)
    return 0.5 * (lo + hi)


def topological_profile(
    N: int,
    lambda_: float,
    opts: ShootingOptions | None = None,
    log: Log = None,
) -> RadialProfile:
    """The topological solution as a profile over [t_start, t_max].

    The shots on either side of a₀ agree until their separation exceeds
    `separation_tol`; their mean is kept up to that time (`t_reliable`) and
    continued by the linearized far-field decay beyond it.
    """
    opts = opts or ShootingOptions()
    if N == 0:
        p = opts.params(0, lambda_, 0.0)
        profile, c = _trivial_profile(p, 0.0, 0.0)
        return replace(profile, topological=True)

    lo, hi = bracket_a0(N, lambda_, opts, log=log)
    below, _ = integrate(opts.params(N, lambda_, lo), stop_at_event=True)
    above, _ = integrate(opts.params(N, lambda_, hi), stop_at_event=True)
    n = min(len(below.t), len(above.t))
    gap = np.abs(above.u[:n] - below.u[:n])
    bad = (gap > opts.separation_tol) | (below.up[:n] < 0) | (above.u[:n] > 0)
    k = int(np.argmax(bad)) if bad.any() else n
    k = max(k, 2)

    t_rel = float(below.t[k - 1])
    t = below.t[:k]
    u = 0.5 * (below.u[:k] + above.u[:k])
    up = 0.5 * (below.up[:k] + above.up[:k])
    if t_rel < opts.t_max:
        t_tail = _report_grid(t_rel, opts.t_max, opts.report_dt)[1:]
        if len(t_tail):
            u_tail = _far_field_tail(t_tail, t_rel, u[-1], opts.power, lambda_)
            up_tail = _far_field_slope(t_tail, t_rel, u[-1], opts.power, lambda_)
            t = np.concatenate([t, t_tail])
            u = np.concatenate([u, u_tail])
            up = np.concatenate([up, up_tail])

    a0 = 0.5 * (lo + hi)
    c = Classification(Tag.UNDETERMINED, t_rel, float(u[-1]))
    return RadialProfile(
        t, u, up, opts.params(N, lambda_, a0), c,
        t_nodes=below.t_nodes[below.t_nodes <= t_rel],
        topological=True,
        t_reliable=t_rel,
    )


def shoot_topological(
    N: int,
    lambda_: float,
    opts: ShootingOptions | None = None,
    log: Log = None,
) -> tuple[float, RadialProfile]:
    """(a₀, the shot at a₀ stopped at its deciding event)."""
    opts = opts or ShootingOptions()
    a0 = find_a0(N, lambda_, opts, log=log)
    profile, _ = integrate(opts.params(N, lambda_, a0), stop_at_event=True, log=log)
    return a0, profile


def tail_start(profile: RadialProfile) -> int:
    """Index after which the forcing stays below `beta_tail_tol`."""
    o = profile.meta.options
    above = profile.forcing() >= o.beta_tail_tol
    if above[-1]:
        raise TailNotConverged(
            f"forcing still {profile.forcing()[-1]:.3g} at t={profile.t[-1]:.6g} (a={profile.a!r})"
        )
    return int(len(above) - np.argmax(above[::-1])) if above.any() else 0


def compute_beta(profile: RadialProfile) -> float:
    """Decay exponent β = −lim u′ of a Negative profile.

    u′ only decreases (u″ = −forcing ≤ 0), so −u′ at the last sample is a
    lower bound; the forcing left beyond it decays like e^{(2−β)t} and adds
    forcing(T)/(β − 2).

    Raises:
        TailNotConverged: forcing never dropped below `beta_tail_tol`.
    """
    if profile.classification.tag is not Tag.NEGATIVE:
        raise ValueError(f"compute_beta needs a Negative profile, got {profile.classification.tag.value}")
    tail_start(profile)
    raw = float(-profile.up[-1])
    remainder = float(profile.forcing()[-1]) / (raw - 2) if raw > 2 else 0.0
    return raw + remainder


def _tail_fit(profile: RadialProfile) -> tuple[float, float]:
    """Least-squares (slope, intercept) of u over the last ln 10 of t."""
    t, u = profile.t, profile.u
    w = t >= t[-1] - log(10)
    slope, intercept = np.polyfit(t[w], u[w], 1)
    return float(slope), float(intercept)


def _left_tail(profile: RadialProfile) -> float:
    """∫_{−∞}^{t₀} λe^{2t}g(u) dt for u = u(t₀) + 2N(t − t₀), taking g(u) ≈ g(u₀)e^{u − u₀}."""
    t0, u0 = profile.t[0], profile.u[0]
    return profile.lambda_ * float(profile.meta.nonlinearity.g(u0)) * exp(2 * t0) / (2 + 2 * profile.N)


def _right_tail(profile: RadialProfile) -> float:
    """∫_T^∞ λe^{2t}e^{u} dt for the fitted linear tail u ≈ −βt + c."""
    slope, intercept = _tail_fit(profile)
    beta = -slope
    if beta <= 2:
        return 0.0
    T = profile.t[-1]
    return profile.lambda_ * exp(intercept + (2 - beta) * T) / (beta - 2)


def forcing_integral(profile: RadialProfile) -> float:
    """λ∫_ℝ e^{2t}g(u) dt with analytic tails.

    For topological profiles the integral stops at `t_reliable` and the
    remainder is u′(t_reliable), which the ODE gives exactly since u′ → 0.
    """
    if profile.topological:
        p = profile.reliable()
        return float(simpson(p.forcing(), x=p.t) + _left_tail(p) + p.up[-1])
    return float(simpson(profile.forcing(), x=profile.t) + _left_tail(profile) + _right_tail(profile))


def check_identities(profile: RadialProfile, beta: float) -> tuple[float, float]:
    """Relative residuals of the two integral identities of a Negative profile.

    β + 2N = λ∫e^{2t}g(u)dt and β²/2 − 2N² = 2λ∫e^{2t}G(u)dt, where G′ = g
    and G(−∞) = 0 (for p = 5, 2λG = (λ/3)[1 − (1 − e^u)⁶]).
    """
    N, lam = profile.N, profile.lambda_
    nl = profile.meta.nonlinearity
    i1 = forcing_integral(profile)
    with np.errstate(under='ignore'):
        energy_like = 2 * lam * np.exp(2 * profile.t) * nl.G(profile.u)
    i2 = float(simpson(energy_like, x=profile.t) + 2 * _left_tail(profile) + 2 * _right_tail(profile))
    lhs1 = beta + 2 * N
    lhs2 = beta * beta / 2 - 2 * N * N
    return abs(lhs1 - i1) / abs(lhs1), abs(lhs2 - i2) / abs(lhs2)


def beta_of_a(N: int, lambda_: float, a: float, opts: ShootingOptions | None = None) -> float:
    """β(a), or +inf if a does not classify Negative."""
    p = (opts or ShootingOptions()).params(N, lambda_, a)
    profile, c = integrate(p)
    if c.tag is not Tag.NEGATIVE:
        return float('inf')
    return compute_beta(profile)


def beta_sweep(
    N: int,
    lambda_: float,
    a_values,
    opts: ShootingOptions | None = None,
    workers: int = 1,
) -> list[tuple[float, float]]:
    """(a, β(a)) for each a; shots run on a process pool when workers > 1."""
    a_values = [float(a) for a in a_values]
    fn = partial(beta_of_a, N, lambda_, opts=opts or ShootingOptions())
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            betas = list(pool.map(fn, a_values))
    else:
        betas = [fn(a) for a in a_values]
    return list(zip(a_values, betas))


@dataclass(frozen=True)
class BetaInversion:
    """Result of solving β(a) = β_target."""
    a: float
    beta: float
    a0: float
    sign_changes: int


def find_a_for_beta(
    N: int,
    lambda_: float,
    beta_target: float,
    opts: ShootingOptions | None = None,
    log: Log = None,
) -> BetaInversion:
    """Shooting parameter a < a₀ with β(a) = β_target.

    β(a) is not known to be monotone, so the scan over a₀ − offsets records
    every sign change of β − β_target and refines the one nearest a₀.

    Raises:
        OutOfRange: β_target ≤ 2N + 4.
        NoBracket: no sign change over the scan.
    """
    opts = opts or ShootingOptions()
    if not beta_target > 2 * N + 4:
        raise OutOfRange(f"beta_target={beta_target!r} must exceed 2N + 4 = {2 * N + 4}")
    a0 = find_a0(N, lambda_, opts, log=log)
    offsets = sorted(opts.scan_offsets)
    samples = [(a0 - d, beta_of_a(N, lambda_, a0 - d, opts)) for d in offsets]
    samples = [(a, b) for a, b in samples if np.isfinite(b)]

    brackets = []
    for (a1, b1), (a2, b2) in zip(samples, samples[1:]):
        if (b1 - beta_target) * (b2 - beta_target) <= 0:
            brackets.append((a2, a1))
    if not brackets:
        raise NoBracket(
            f"beta - {beta_target!r} keeps one sign over a0 - [{offsets[0]!r}, {offsets[-1]!r}]"
        )
    lo, hi = brackets[0]
    if log:
        log(f"{len(brackets)} sign change(s); refining in [{lo!r}, {hi!r}]")

    def gap(a):
        return beta_of_a(N, lambda_, a, opts) - beta_target

    a = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    beta = beta_of_a(N, lambda_, a, opts)
    return BetaInversion(a=float(a), beta=beta, a0=a0, sign_changes=len(brackets))


@dataclass(frozen=True)
class PhysicalProfile:
    """Physical radial fields over r = e^t."""
    r: np.ndarray
    phisq: np.ndarray
    F12: np.ndarray
    energy_density: np.ndarray
    covariant_sq: np.ndarray


def to_physical(profile: RadialProfile) -> PhysicalProfile:
    """|φ|², F₁₂, energy density and |D_jφ|² along the profile.

    F₁₂ = (λ/2)e^u(1 − e^u)^5 is taken positive. The energy density is
    (κ²/2)F₁₂²/(|φ|²w) + w|D_jφ|² + V with w = 3(1 − |φ|²)² and
    V = (3/κ²)|φ|²(1 − |φ|²)⁸; |D_jφ|² = ½u_r²e^u.
    """
    lam = profile.lambda_
    kappa = Coupling.from_lambda(lam).kappa
    r = np.exp(profile.t)
    with np.errstate(under='ignore'):
        phisq = np.exp(profile.u)
        F12 = 0.5 * lam * profile.meta.nonlinearity.g(profile.u)
        covariant_sq = 0.5 * profile.up ** 2 * np.exp(profile.u - 2 * profile.t)
    s = np.minimum(phisq, 1.0)
    w = 3 * (1 - s) ** 2
    V = 3 / kappa ** 2 * s * (1 - s) ** 8
    # F₁₂²/(|φ|²w) stays finite: F₁₂ carries a factor |φ|²(1 − |φ|²)⁵
    with np.errstate(under='ignore'):
        magnetic = kappa ** 2 / 6 * (lam / 2) ** 2 * s * (1 - s) ** 8
    energy = magnetic + w * covariant_sq + V
    return PhysicalProfile(r, phisq, F12, energy, covariant_sq)
