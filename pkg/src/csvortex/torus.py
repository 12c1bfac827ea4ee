"""Doubly periodic solver: background u₀, monotone iteration, λ_c, sub-solutions and the action."""

from dataclasses import dataclass, field
from enum import Enum
from math import pi, sqrt
from typing import Callable, Literal

import numpy as np
from scipy import fft

from .errors import EpsTooLarge, MonotonicityViolation, UpperSeedFailure, VortexOnSharedNode
from .model import CONSTANTS, FIVE, NonlinearityConstants, VortexSet

Log = Callable[[str], None] | None
Laplacian = Literal['fd', 'spectral']

MONOTONE_SLACK = 1e-13
STALL_WINDOW = 50
# relative decrease over STALL_WINDOW sweeps below which the residual counts as stalled
STALL_DECREASE = 1e-3


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid; node (i, j) sits at (i·h_x, j·h_y)."""
    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError(f"periods must be positive, got {self.Lx}, {self.Ly}")
        for name, n in (('nx', self.nx), ('ny', self.ny)):
            if n < 16 or n % 2:
                raise ValueError(f"{name} must be even and >= 16, got {n}")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def cell(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx, self.ny

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing='ij')

    def displacement(self, p: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
        """Minimum-image displacement of every node from p."""
        X, Y = self.coords()
        dx = (X - p[0] + self.Lx / 2) % self.Lx - self.Lx / 2
        dy = (Y - p[1] + self.Ly / 2) % self.Ly - self.Ly / 2
        return dx, dy

    def node_of(self, p: tuple[float, float]) -> tuple[int, int]:
        x, y = p
        if not (0 <= x < self.Lx and 0 <= y < self.Ly):
            raise ValueError(f"vortex {p} outside [0, {self.Lx}) x [0, {self.Ly})")
        return int(round(x / self.hx)) % self.nx, int(round(y / self.hy)) % self.ny

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        kx = 2 * pi * fft.fftfreq(self.nx, d=self.hx)
        ky = 2 * pi * fft.fftfreq(self.ny, d=self.hy)
        return np.meshgrid(kx, ky, indexing='ij')

    def laplacian_symbol(self, kind: Laplacian = 'fd') -> np.ndarray:
        """Eigenvalues of the periodic Laplacian on the Fourier modes.

        'fd' is the 5-point stencil, −(4/h_x²)sin²(k_x h_x/2) − (4/h_y²)sin²(k_y h_y/2);
        'spectral' is −|k|².
        """
        KX, KY = self.wavenumbers()
        if kind == 'fd':
            return -(4 / self.hx ** 2) * np.sin(KX * self.hx / 2) ** 2 - (4 / self.hy ** 2) * np.sin(KY * self.hy / 2) ** 2
        if kind == 'spectral':
            return -(KX ** 2 + KY ** 2)
        raise ValueError(f"unknown laplacian {kind!r}")


@dataclass(frozen=True, eq=False)
class TorusField:
    values: np.ndarray
    grid: TorusGrid

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} != grid {self.grid.shape}")

    def mean(self) -> float:
        return float(self.values.mean())

    def __add__(self, other: 'TorusField') -> 'TorusField':
        return TorusField(self.values + other.values, self.grid)


def apply_laplacian(grid: TorusGrid, v: np.ndarray, kind: Laplacian = 'fd') -> np.ndarray:
    if kind == 'fd':
        return (
            (np.roll(v, 1, 0) - 2 * v + np.roll(v, -1, 0)) / grid.hx ** 2
            + (np.roll(v, 1, 1) - 2 * v + np.roll(v, -1, 1)) / grid.hy ** 2
        )
    return fft.ifft2(grid.laplacian_symbol(kind) * fft.fft2(v)).real


def solve_poisson(grid: TorusGrid, rhs: np.ndarray, kind: Laplacian = 'fd') -> np.ndarray:
    """Mean-zero solution of Δw = rhs − mean(rhs)."""
    sym = grid.laplacian_symbol(kind)
    sym[0, 0] = 1.0
    w_hat = fft.fft2(rhs) / sym
    w_hat[0, 0] = 0.0
    return fft.ifft2(w_hat).real


def build_background_u0(grid: TorusGrid, vortices: VortexSet, kind: Laplacian = 'fd') -> TorusField:
    """Mean-zero u₀ with Δu₀ = −4πN/|Ω| + 4πΣ n_s δ_{p_s}.

    Each Dirac mass sits on the nearest node with weight 4πn_s/(h_x h_y).

    Raises:
        VortexOnSharedNode: two vortices round to the same node.
    """
    src = np.zeros(grid.shape)
    taken: dict[tuple[int, int], tuple[float, float]] = {}
    for p, n in vortices:
        node = grid.node_of(p)
        if node in taken:
            raise VortexOnSharedNode(f"vortices {taken[node]} and {p} share node {node}; refine the grid")
        taken[node] = p
        src[node] += 4 * pi * n / grid.cell
    src -= 4 * pi * vortices.N / grid.area
    return TorusField(solve_poisson(grid, src, kind), grid)


def helmholtz_solve(grid: TorusGrid, K: float, rhs: TorusField | np.ndarray, kind: Laplacian = 'fd') -> TorusField:
    """Periodic v with (Δ − K)v = rhs, dividing each Fourier mode by (symbol − K)."""
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    values = rhs.values if isinstance(rhs, TorusField) else np.asarray(rhs, dtype=float)
    v = fft.ifft2(fft.fft2(values) / (grid.laplacian_symbol(kind) - K)).real
    return TorusField(v, grid)


@dataclass(frozen=True)
class SolverOptions:
    """Monotone-iteration settings.

    `K` overrides `K_factor`·λ; either way K must be at least (p + 1)·λ
    (6λ for the p = 5 model).
    """
    K: float | None = None
    K_factor: float | None = None
    tol: float = 1e-10
    max_iter: int = 5000
    divergence_drop: float = 50.0
    laplacian: Laplacian = 'fd'
    lambda_rel_width: float = 1e-3
    max_doublings: int = 40

    def K_for(self, lambda_: float, constants: NonlinearityConstants = CONSTANTS) -> float:
        floor = constants.default_K(lambda_)
        if self.K is not None:
            K = self.K
        elif self.K_factor is not None:
            K = self.K_factor * lambda_
        else:
            K = floor
        if K < floor * (1 - 1e-12):
            raise ValueError(f"K={K!r} below the monotone bound {floor!r}")
        return K


class Outcome(str, Enum):
    CONVERGED = 'Converged'
    DIVERGED = 'Diverged'
    NOT_CONVERGED = 'NotConverged'


@dataclass(frozen=True, eq=False)
class IterationOutcome:
    """Result of a monotone iteration.

    A Diverged run stopped for `reason` 'drop' (min u fell by more than
    `divergence_drop` with a stalled residual) or 'stalled' (max_iter with a
    residual that stopped shrinking). NotConverged ('exhausted') means
    max_iter ran out while the residual was still shrinking; it says nothing
    about existence.
    """
    tag: Outcome
    v: TorusField
    u0: TorusField
    iterations: int
    residual_history: np.ndarray
    lambda_: float
    K: float
    reason: str | None = None
    max_increment: float = -np.inf

    @property
    def converged(self) -> bool:
        return self.tag is Outcome.CONVERGED

    @property
    def u(self) -> np.ndarray:
        return self.u0.values + self.v.values

    @property
    def final_residual(self) -> float:
        return float(self.residual_history[-1]) if len(self.residual_history) else 0.0


def residual(grid: TorusGrid, v: np.ndarray, u0: np.ndarray, lambda_: float, N: int, kind: Laplacian = 'fd') -> np.ndarray:
    """Δv − λf(u₀ + v) − 4πN/|Ω|."""
    return apply_laplacian(grid, v, kind) - lambda_ * FIVE.f(u0 + v) - 4 * pi * N / grid.area


def flux_identity(grid: TorusGrid, u: np.ndarray, lambda_: float) -> float:
    """(λ/2)Σ e^u(1 − e^u)^5 h_x h_y; equals 2πN at a discrete solution."""
    return float(0.5 * lambda_ * FIVE.g(u).sum() * grid.cell)


def _stalled(history: list[float]) -> bool:
    return len(history) > STALL_WINDOW and history[-1] >= (1 - STALL_DECREASE) * history[-1 - STALL_WINDOW]


def monotone_iterate(
    grid: TorusGrid,
    vortices: VortexSet,
    lambda_: float,
    opts: SolverOptions | None = None,
    subsolution: TorusField | None = None,
    log: Log = None,
) -> IterationOutcome:
    """Monotone scheme (Δ − K)v_n = λf(u₀ + v_{n−1}) − Kv_{n−1} + 4πN/|Ω| from v₀ = −u₀.

    Iterates must be pointwise non-increasing (and stay above `subsolution`
    when one is given).

    Raises:
        MonotonicityViolation: an iterate rose by more than the slack.
    """
    opts = opts or SolverOptions()
    if lambda_ <= 0:
        raise ValueError(f"lambda must be positive, got {lambda_}")
    K = opts.K_for(lambda_)
    kind = opts.laplacian
    N = vortices.N
    u0 = build_background_u0(grid, vortices, kind)
    c = 4 * pi * N / grid.area
    symbol = grid.laplacian_symbol(kind) - K

    v = -u0.values
    f_prev = lambda_ * FIVE.f(u0.values + v)
    min_u0 = float((u0.values + v).min())
    history: list[float] = []
    max_inc = -np.inf
    tag, reason = Outcome.NOT_CONVERGED, 'exhausted'

    if N == 0:
        return IterationOutcome(Outcome.CONVERGED, TorusField(np.zeros(grid.shape), grid), u0, 0, np.zeros(1), lambda_, K)

    n = 0
    for n in range(1, opts.max_iter + 1):
        rhs = f_prev - K * v + c
        v_new = fft.ifft2(fft.fft2(rhs) / symbol).real
        inc = v_new - v
        slack = MONOTONE_SLACK * max(1.0, float(np.abs(v).max()))
        step_max = float(inc.max())
        max_inc = max(max_inc, step_max)
        if step_max > slack:
            raise MonotonicityViolation(
                f"iterate {n} rose by {step_max:.3g} (slack {slack:.3g})", iteration=n, excess=step_max,
            )
        if subsolution is not None:
            below = float((subsolution.values - v_new).max())
            if below > slack:
                raise MonotonicityViolation(
                    f"iterate {n} fell {below:.3g} below the sub-solution", iteration=n, excess=below,
                )
        f_new = lambda_ * FIVE.f(u0.values + v_new)
        # Δv_n − λf(u_n) − c, using the scheme to avoid another transform
        r = K * inc + f_prev - f_new
        res = float(np.abs(r).max())
        v, f_prev = v_new, f_new
        if res < opts.tol:
            # stop on the direct residual only
            res = max(res, float(np.abs(residual(grid, v, u0.values, lambda_, N, kind)).max()))
        history.append(res)
        if log and n % 500 == 0:
            log(f"iter {n}: residual {res:.3e}, min u {float((u0.values + v).min()):.4g}")
        if res < opts.tol:
            tag, reason = Outcome.CONVERGED, None
            break
        min_u = float((u0.values + v).min())
        if min_u < min_u0 - opts.divergence_drop and _stalled(history):
            tag, reason = Outcome.DIVERGED, 'drop'
            break
    else:
        if _stalled(history):
            tag, reason = Outcome.DIVERGED, 'stalled'

    if log:
        log(f"lambda={lambda_:.6g}: {tag.value} after {n} iterations ({reason or 'residual below tol'})")
    return IterationOutcome(
        tag, TorusField(v, grid), u0, n, np.asarray(history), lambda_, K, reason, max_inc,
    )


def lambda_lower_bound(N: int, area: float) -> float:
    """Necessary bound (6⁶/5⁵)·4πN/|Ω| on λ for a doubly periodic solution."""
    if N < 0 or area <= 0:
        raise ValueError(f"need N >= 0 and area > 0, got {N}, {area}")
    return 4 * pi * N / area / CONSTANTS.g_max


@dataclass(frozen=True)
class LambdaCritical:
    """Bisection estimate of λ_c; unpacks as (lambda_c, bracket_width)."""
    lambda_c: float
    bracket_width: float
    lower_bound: float
    scan: list[tuple[float, bool]] = field(default_factory=list)

    def __iter__(self):
        return iter((self.lambda_c, self.bracket_width))

    @property
    def kappa_c(self) -> float:
        return kappa_c_from_lambda_c(self.lambda_c)


def estimate_lambda_c(
    grid: TorusGrid,
    vortices: VortexSet,
    opts: SolverOptions | None = None,
    log: Log = None,
) -> LambdaCritical:
    """Bisect on λ between the necessary bound and a doubled upper seed.

    `monotone_iterate` is the oracle: only a Diverged run counts as "no
    solution", while Converged and NotConverged runs (residual still
    shrinking, iterates bounded) count as a solution. The result is an
    estimate rather than a certificate. `scan` records (λ, solution found)
    for every oracle call.

    Raises:
        UpperSeedFailure: `max_doublings` doublings all diverged.
    """
    opts = opts or SolverOptions()
    bound = lambda_lower_bound(vortices.N, grid.area)
    if vortices.N == 0:
        return LambdaCritical(0.0, 0.0, 0.0)
    scan: list[tuple[float, bool]] = []

    def solvable(lam: float) -> bool:
        out = monotone_iterate(grid, vortices, lam, opts, log=None)
        ok = out.tag is not Outcome.DIVERGED
        scan.append((lam, ok))
        if log:
            log(f"lambda={lam:.8g}: {out.tag.value}" + (f" ({out.reason})" if out.reason else ''))
        return ok

    lo, hi = bound, 2 * bound
    for _ in range(opts.max_doublings):
        if solvable(hi):
            break
        lo, hi = hi, 2 * hi
    else:
        raise UpperSeedFailure(f"every run diverged up to lambda={hi!r}")

    while (hi - lo) / hi > opts.lambda_rel_width:
        mid = 0.5 * (lo + hi)
        if solvable(mid):
            hi = mid
        else:
            lo = mid
    return LambdaCritical(0.5 * (lo + hi), hi - lo, bound, scan)


def kappa_c_from_lambda_c(lambda_c: float) -> float:
    if lambda_c <= 0:
        raise ValueError(f"lambda_c must be positive, got {lambda_c}")
    return sqrt(12 / lambda_c)


def kappa_upper_bound(N: int, area: float) -> float:
    """√(5⁵|Ω|/(6⁵·2πN)), the largest admissible critical κ."""
    return sqrt(5 ** 5 * area / (6 ** 5 * 2 * pi * N))


@dataclass(frozen=True, eq=False)
class Subsolution:
    """w₀ with e^{u₀+w₀} ≤ 1, valid as a sub-solution for λ ≥ `valid_for_lambda_ge`."""
    w0: TorusField
    valid_for_lambda_ge: float
    source: np.ndarray
    margin: float

    def __iter__(self):
        return iter((self.w0, self.valid_for_lambda_ge))


def _cutoff(d: np.ndarray, eps: float) -> np.ndarray:
    """1 on d ≤ ε, 0 on d ≥ 2ε, C¹ smoothstep in between."""
    s = np.clip((2 * eps - d) / eps, 0.0, 1.0)
    return s * s * (3 - 2 * s)


def construct_subsolution(
    grid: TorusGrid,
    vortices: VortexSet,
    eps: float,
    kind: Laplacian = 'fd',
    margins=None,
) -> Subsolution:
    """Sub-solution built from a cutoff source concentrated near the vortices.

    g_ε = (8πN/|Ω|)(f_ε − mean f_ε) with f_ε the cutoff around each vortex;
    Δw = g_ε; w₀ = w − max(u₀ + w) − m for the shift m that minimizes the
    λ threshold max(4πN/|Ω| − g_ε)/(μ₀(1 − μ₁)⁵), where μ₀, μ₁ are the inf
    and sup of e^{u₀+w₀} outside the ε-balls.

    Raises:
        EpsTooLarge: balls of radius 2ε overlap, or 2 − 8πNε²/|Ω| ≤ 1.
    """
    N = vortices.N
    if N == 0:
        return Subsolution(TorusField(np.zeros(grid.shape), grid), 0.0, np.zeros(grid.shape), 0.0)
    if eps < max(grid.hx, grid.hy):
        raise ValueError(f"eps={eps} is below the grid spacing")
    if not 2 - 8 * pi * N * eps ** 2 / grid.area > 1:
        raise EpsTooLarge(f"eps={eps}: 2 - 8*pi*N*eps^2/|Omega| <= 1")
    if 4 * eps >= min(grid.Lx, grid.Ly):
        raise EpsTooLarge(f"eps={eps}: 2eps-ball wraps around the torus")
    pts = vortices.points
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            dx = (p[0] - q[0] + grid.Lx / 2) % grid.Lx - grid.Lx / 2
            dy = (p[1] - q[1] + grid.Ly / 2) % grid.Ly - grid.Ly / 2
            if np.hypot(dx, dy) <= 4 * eps:
                raise EpsTooLarge(f"eps={eps}: 2eps-balls around {p} and {q} overlap")

    f_eps = np.zeros(grid.shape)
    inner = np.zeros(grid.shape, dtype=bool)
    for p in pts:
        d = np.hypot(*grid.displacement(p))
        f_eps = np.maximum(f_eps, _cutoff(d, eps))
        inner |= d < eps
    c = 4 * pi * N / grid.area
    g_eps = 2 * c * (f_eps - f_eps.mean())
    w = solve_poisson(grid, g_eps, kind)
    u0 = build_background_u0(grid, vortices, kind).values
    top = float((u0 + w).max())
    deficit = float(np.maximum(c - g_eps, 0.0).max())

    def threshold(m: float) -> float:
        s = np.exp(u0 + w - top - m)[~inner]
        mu0, mu1 = float(s.min()), float(s.max())
        return deficit / (mu0 * (1 - mu1) ** 5)

    margins = np.geomspace(1e-3, 8.0, 60) if margins is None else np.asarray(margins)
    best = min(margins, key=threshold)
    lam = threshold(best)
    w0 = w - top - best

    # Δw₀ ≥ λf(u₀ + w₀) + 4πN/|Ω| everywhere
    gap = g_eps - lam * FIVE.f(u0 + w0) - c
    if float(gap.min()) < -1e-9 * max(1.0, lam):
        raise EpsTooLarge(f"eps={eps}: sub-solution inequality fails by {-float(gap.min()):.3g}")
    return Subsolution(TorusField(w0, grid), lam, g_eps, float(best))


def action(
    v: TorusField,
    u0: TorusField,
    lambda_: float,
    N: int,
    kind: Laplacian = 'fd',
) -> float:
    """Discrete I(v) = Σ[½|∇v|² + (λ/6)(e^{u₀+v} − 1)⁶ + (4πN/|Ω|)v]h_x h_y.

    The gradient term is −½Σ vΔv with the same Laplacian as the solver
    (exact summation by parts), so the gradient of I is minus the residual.
    """
    grid = v.grid
    x = v.values
    dirichlet = -0.5 * float((x * apply_laplacian(grid, x, kind)).sum())
    potential = lambda_ * float(FIVE.F(u0.values + x).sum())
    linear = 4 * pi * N / grid.area * float(x.sum())
    return (dirichlet + potential + linear) * grid.cell


def action_gradient(v: TorusField, u0: TorusField, lambda_: float, N: int, kind: Laplacian = 'fd') -> np.ndarray:
    """Per-node gradient of `action` divided by the cell area."""
    return -residual(v.grid, v.values, u0.values, lambda_, N, kind)
