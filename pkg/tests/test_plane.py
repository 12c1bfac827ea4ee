"""Tests for the full-plane solver on nested squares."""

from dataclasses import replace
from math import exp, pi

import numpy as np
import pytest
from scipy.integrate import quad

from csvortex.errors import MonotonicityViolation
from csvortex.model import FIVE, VortexSet, far_field_amplitude
from csvortex.plane import (
    PlaneField,
    PlaneOptions,
    SquareDomain,
    background_u0_plane,
    closure_function,
    dirichlet_helmholtz_solve,
    dirichlet_laplacian,
    far_field_profile,
    flux_tail,
    monotone_iterate_plane,
    plane_flux,
    shallow_coupling,
    shallow_subsolution,
    solve_topological_plane,
    source_g_plane,
)
from csvortex.radial import topological_profile
from csvortex.torus import Outcome

ORIGIN = VortexSet.single(1)
MONOTONE = PlaneOptions(newton=False)


@pytest.fixture(scope='module')
def small():
    """N = 1, λ = 1 on [−4, 4]² with the plain monotone scheme."""
    return monotone_iterate_plane(SquareDomain(4.0, 63), ORIGIN, 1.0, MONOTONE)


@pytest.fixture(scope='module')
def solution():
    """Squares of half-width 2 and 4 on one lattice, N = 1, λ = 1."""
    return solve_topological_plane(ORIGIN, 1.0, [2.0, 4.0], 63, PlaneOptions(warmup=20))


@pytest.fixture(scope='module')
def wide():
    """Squares of half-width 10 and 20 on one lattice, N = 1, λ = 1."""
    return solve_topological_plane(ORIGIN, 1.0, [10.0, 20.0], 127)


class TestSquareDomain:
    """Test the square lattice."""

    def test_spacing(self):
        """Test h = 2R/(n + 1) and the node positions."""
        d = SquareDomain(4.0, 63)
        assert d.h == 0.125
        assert d.axis()[0] == pytest.approx(-3.875)
        assert d.axis(with_boundary=True)[-1] == pytest.approx(4.0)
        assert len(d.axis()) == 63

    def test_nested(self):
        """Test inner squares share the outer lattice."""
        outer = SquareDomain(4.0, 63)
        inner = outer.nested(2.0)
        assert inner.R == 2.0
        assert inner.h == outer.h
        k = inner.offset_in(outer)
        assert np.allclose(outer.axis()[k:k + inner.n], inner.axis())

    def test_nested_snaps_down(self):
        """Test a half-width off the lattice snaps to the largest square inside it."""
        outer = SquareDomain(4.0, 63)
        inner = outer.nested(2.3)
        assert inner.R <= 2.3
        assert (outer.n - inner.n) % 2 == 0

    def test_rejects(self):
        """Test bad sizes and vortices outside the square."""
        with pytest.raises(ValueError):
            SquareDomain(0.0, 10)
        with pytest.raises(ValueError):
            SquareDomain(1.0, 2)
        with pytest.raises(ValueError):
            SquareDomain(1.0, 15).check_contains(VortexSet.single(1, (1.0, 0.0)))

    def test_field_on(self):
        """Test slices of a nested field inside the outer interior."""
        outer = SquareDomain(4.0, 63)
        inner = outer.nested(2.0)
        sl = PlaneField(np.zeros((inner.n, inner.n)), inner).on(outer)
        X, _ = outer.coords()
        Xi, _ = inner.coords()
        assert np.allclose(X[sl], Xi)


class TestBackground:
    """Test u₀ and g."""

    def test_g_integrates_to_4pi(self):
        """Test ∫g = 4πN."""
        total, _ = quad(lambda r: 2 * pi * r * 4 / (1 + r * r) ** 2, 0, np.inf)
        assert total == pytest.approx(4 * pi)
        assert source_g_plane(0.0, 0.0, VortexSet.single(2)) == 8.0

    def test_u0_equation(self):
        """Test Δu₀ = −g away from the vortex, to O(h²)."""
        h = 1e-3
        x, y = 0.7, -0.4
        u = lambda a, b: background_u0_plane(a, b, ORIGIN)
        lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / h ** 2
        assert lap == pytest.approx(-source_g_plane(x, y, ORIGIN), rel=1e-4)

    def test_u0_clamped(self):
        """Test u₀ stays finite on a vortex when clamped."""
        val = background_u0_plane(0.0, 0.0, ORIGIN, r_min=0.1)
        assert val == pytest.approx(-np.log1p(100.0))
        assert background_u0_plane(0.0, 0.0, VortexSet()) == 0.0


class TestDirichletSolver:
    """Test the sine-transform Helmholtz solve."""

    @staticmethod
    def error(n, K=2.0):
        d = SquareDomain(1.0, n)
        exact = lambda X, Y: np.sin(2 * X + 0.3) * np.cos(Y) + X * Y
        X, Y = d.coords()
        rhs = (-5.0 - K) * np.sin(2 * X + 0.3) * np.cos(Y) - K * X * Y
        v = dirichlet_helmholtz_solve(d, K, rhs, boundary=exact)
        return float(np.abs(v.values - exact(X, Y)).max())

    def test_second_order(self):
        """Test halving h divides the error by about 4."""
        e1, e2, e3 = self.error(15), self.error(31), self.error(63)
        assert e1 / e2 > 3.5
        assert e2 / e3 > 3.5
        assert e3 < 1e-3

    def test_inverse_of_stencil(self):
        """Test the solve inverts the 5-point operator with the same frame."""
        d = SquareDomain(2.0, 31)
        X, Y = d.coords()
        rhs = np.exp(-X ** 2) * Y
        bc = lambda X, Y: X + 2 * Y
        v = dirichlet_helmholtz_solve(d, 3.0, rhs, boundary=bc)
        frame = bc(*d.coords(with_boundary=True))
        back = dirichlet_laplacian(d, v.values, frame) - 3.0 * v.values
        assert np.allclose(back, rhs, atol=1e-9)

    def test_rejects_nonpositive_K(self):
        """Test K must be positive."""
        d = SquareDomain(1.0, 7)
        with pytest.raises(ValueError):
            dirichlet_helmholtz_solve(d, -1.0, np.zeros((7, 7)))


class TestClosure:
    """Test boundary data."""

    def test_zero_closure(self):
        """Test the zero closure makes u vanish on the frame."""
        data = closure_function(ORIGIN, 1.0, 'zero', 0.0)
        X, Y = np.array([3.0]), np.array([4.0])
        assert data(X, Y)[0] == pytest.approx(-background_u0_plane(X, Y, ORIGIN)[0])

    def test_asymptotic_closure(self):
        """Test the asymptotic closure sets u to the radial topological profile of total multiplicity N."""
        zero = closure_function(ORIGIN, 12.0, 'zero', 0.0)
        asym = closure_function(ORIGIN, 12.0, 'asymptotic', 0.0)
        X, Y = np.array([3.0]), np.array([4.0])
        profile = far_field_profile(1, 12.0)
        assert asym(X, Y)[0] - zero(X, Y)[0] == pytest.approx(profile.evaluate(np.array([5.0]))[0])
        far = np.array([1e4])
        c = far_field_amplitude(12.0)
        assert profile.evaluate(far)[0] == pytest.approx(-c / 100.0, rel=0.1)

    def test_asymptotic_closure_centered(self):
        """Test separated vortices share one profile of total multiplicity about their weighted center."""
        vs = VortexSet(((-1.0, 0.0), (3.0, 0.0)), (3, 1))
        zero = closure_function(vs, 2.0, 'zero', 0.0)
        asym = closure_function(vs, 2.0, 'asymptotic', 0.0)
        X, Y = np.array([0.0]), np.array([6.0])
        expected = far_field_profile(4, 2.0).evaluate(np.array([6.0]))[0]
        assert asym(X, Y)[0] - zero(X, Y)[0] == pytest.approx(expected)

    def test_unknown(self):
        """Test unknown closures are refused."""
        with pytest.raises(ValueError):
            closure_function(ORIGIN, 1.0, 'linear', 0.0)

    def test_flux_tail_bounds(self):
        """Test the exterior flux lies between π·r u′ at the corner distance and at the half-width."""
        profile = far_field_profile(1, 12.0)
        tail = flux_tail(1, 12.0, 10.0)
        assert pi * profile.slope(np.sqrt(2) * 10.0) <= tail <= pi * profile.slope(10.0)
        assert flux_tail(1, 12.0, 40.0) < tail

    def test_flux_tail_completes_disc(self):
        """Test the radial flux inside the square plus the tail gives 2πN."""
        profile = far_field_profile(1, 12.0)
        S = 8.0
        x = np.linspace(-S, S, 1600)
        X, Y = np.meshgrid(x, x, indexing='ij')
        g = profile.meta.nonlinearity.g(profile.evaluate(np.hypot(X, Y)))
        inside = 0.5 * 12.0 * np.trapezoid(np.trapezoid(g, x, axis=1), x)
        assert inside + flux_tail(1, 12.0, S) == pytest.approx(2 * pi, rel=1e-3)


class TestMonotoneIteratePlane:
    """Test the Dirichlet monotone scheme."""

    def test_no_vortex(self):
        """Test N = 0 gives v ≡ 0."""
        out = monotone_iterate_plane(SquareDomain(2.0, 15), VortexSet(), 1.0)
        assert out.converged
        assert np.all(out.v.values == 0)
        assert np.all(out.u == 0)

    def test_converges_monotone(self, small):
        """Test the plain scheme converges with non-increasing iterates and u < 0."""
        assert small.tag is Outcome.CONVERGED
        assert small.newton_steps == 0
        assert small.max_increment <= 1e-10
        assert np.all(small.u < 0)
        assert small.final_residual < 1e-10

    def test_newton_agrees(self, small):
        """Test the Newton-accelerated solve lands on the same field."""
        out = monotone_iterate_plane(SquareDomain(4.0, 63), ORIGIN, 1.0, PlaneOptions(warmup=20))
        assert out.converged
        assert out.newton_steps > 0
        assert np.abs(out.v.values - small.v.values).max() < 1e-8

    def test_start_is_supersolution(self, small):
        """Test the solution lies below −u₀."""
        assert np.all(small.v.values <= -small.u0 + 1e-12)

    def test_subsolution_violation(self):
        """Test a 'sub-solution' above the start is caught."""
        d = SquareDomain(2.0, 15)
        X, Y = d.coords()
        bad = PlaneField(-background_u0_plane(X, Y, ORIGIN, d.h / 4) + 5.0, d)
        with pytest.raises(MonotonicityViolation):
            monotone_iterate_plane(d, ORIGIN, 1.0, MONOTONE, subsolution=bad)

    def test_maximal(self, small):
        """Test pushing the solution down by a bump and re-iterating returns to it."""
        d = small.domain
        X, Y = d.coords()
        bump = 0.5 * np.exp(-((X - 1) ** 2 + Y ** 2))
        again = monotone_iterate_plane(d, ORIGIN, 1.0, MONOTONE, v_init=small.v.values - bump)
        assert again.converged
        assert np.abs(again.v.values - small.v.values).max() < 1e-7

    def test_flux(self, small):
        """Test the flux is positive and below 2π on a small square."""
        phi = plane_flux(small)
        assert 0 < phi < 2 * pi

    def test_converged_on_direct_residual(self, small):
        """Test a Converged run meets tol on Δv − λf(u₀ + v) − g with its own frame."""
        d = small.domain
        direct = dirichlet_laplacian(d, small.v.values, small.frame) - FIVE.f(small.u) - small.source
        assert np.abs(direct).max() < 1e-10
        assert small.final_residual >= np.abs(direct).max()

    def test_budget_exhausted(self):
        """Test running out of sweeps is NotConverged, not Diverged."""
        short = replace(MONOTONE, solver=replace(MONOTONE.solver, max_iter=20))
        out = monotone_iterate_plane(SquareDomain(4.0, 63), ORIGIN, 1.0, short)
        assert out.tag is Outcome.NOT_CONVERGED
        assert out.reason == 'exhausted'
        assert out.iterations == 20

    def test_newton_budget_exhausted(self):
        """Test a Newton phase that runs out of steps is NotConverged with reason 'newton'."""
        opts = PlaneOptions(warmup=5, newton_max=1)
        out = monotone_iterate_plane(SquareDomain(4.0, 63), ORIGIN, 1.0, opts)
        assert out.tag is Outcome.NOT_CONVERGED
        assert out.reason == 'newton'


class TestExhaustion:
    """Test the nested-square schedule."""

    def test_decreasing_in_R(self, solution):
        """Test v on the larger square lies below v on the smaller one."""
        first, second = solution.stages
        assert first.max_decrease_violation is None
        assert second.max_decrease_violation <= 1e-8
        assert second.cauchy_gap > 0
        assert solution.cauchy_gap == second.cauchy_gap

    def test_flux_grows(self, solution):
        """Test Φ(R) increases with R."""
        first, second = solution.stages
        assert second.flux > first.flux
        assert solution.flux == second.flux

    def test_stage_report(self, solution):
        """Test the per-stage summary."""
        d = solution.stages[0].to_dict()
        assert d['R'] == 2.0
        assert d['n'] == 31

    def test_rejects_unsorted(self):
        """Test the schedule must increase."""
        with pytest.raises(ValueError):
            solve_topological_plane(ORIGIN, 1.0, [4.0, 2.0], 31)


@pytest.mark.slow
class TestBoundaryBand:
    """Test u → 0 toward the frame of the largest square."""

    def test_band_small(self, wide):
        """Test u < 0 and the ring next to the frame stays above −10⁻² at R = 20, λ = 1."""
        out = wide.outcome
        assert out.converged
        assert out.domain.R == pytest.approx(20.0)
        assert np.all(out.u < 0)
        assert out.boundary_band() < 1e-2

    def test_band_shrinks_with_R(self, wide):
        """Test the band value at R = 20 stays below 3× the one at R = 10."""
        first, second = wide.stages
        assert second.boundary_band < 3 * first.boundary_band


class TestShallowSubsolution:
    """Test the sub-solution built from the classical equation."""

    def test_coupling(self):
        """Test μ = λe^{−a}(e^{−a} − 1)⁴."""
        assert shallow_coupling(1.0, 1.0) == pytest.approx(exp(-1) * (exp(-1) - 1) ** 4)

    def test_rejects_nonpositive_a(self):
        """Test a must be positive."""
        with pytest.raises(ValueError):
            shallow_subsolution(ORIGIN, 1.0, 0.0, SquareDomain(2.0, 15))

    @pytest.mark.parametrize('n', [31, 63])
    def test_inequality(self, n):
        """Test the discrete sub-solution inequality at two resolutions."""
        d = SquareDomain(4.0, n)
        sub = shallow_subsolution(ORIGIN, 1.0, 1.0, d)
        assert sub.method == 'radial'
        assert sub.min_slack >= -10 * d.h ** 2
        assert np.all(sub.u_star <= 0)

    def test_far_field(self):
        """Test v_* approaches −a away from the vortex."""
        d = SquareDomain(4.0, 63)
        sub = shallow_subsolution(ORIGIN, 1.0, 1.0, d)
        v = sub.v_star.values
        c = d.n // 2
        assert abs(v[0, 0] + 1.0) < abs(v[c, c] + 1.0)

    def test_sandwich(self, small):
        """Test v_* ≤ v ≤ −u₀ and iterates never cross v_*."""
        d = small.domain
        sub = shallow_subsolution(ORIGIN, 1.0, 1.0, d)
        assert np.all(sub.v_star.values <= small.v.values + 1e-9)
        short = replace(MONOTONE, solver=replace(MONOTONE.solver, max_iter=50))
        out = monotone_iterate_plane(d, ORIGIN, 1.0, short, subsolution=sub.v_star)
        assert out.iterations == 50

    def test_separated_vortices(self):
        """Test non-coincident vortices go through the classical plane iteration."""
        d = SquareDomain(3.0, 31)
        vs = VortexSet(((-0.5, 0.0), (0.5, 0.0)), (1, 1))
        sub = shallow_subsolution(vs, 1.0, 1.0, d, MONOTONE)
        assert sub.method == 'plane'
        assert sub.min_slack >= -10 * d.h ** 2


@pytest.mark.slow
class TestCrossValidation:
    """Test the plane solver against the radial shooter."""

    def test_matches_radial(self):
        """Test |φ|² agrees within 1% on r ∈ [0.5, 5] for N = 1, λ = 12, R = 20."""
        opts = PlaneOptions(closure='asymptotic')
        out = monotone_iterate_plane(SquareDomain(20.0, 512), ORIGIN, 12.0, opts)
        assert out.converged
        d = out.domain
        x = d.axis()
        j = int(np.argmin(np.abs(x)))
        r = np.abs(x)
        sel = (r >= 0.5) & (r <= 5.0)
        plane_phisq = np.exp(out.u[sel, j])
        radial = topological_profile(1, 12.0)
        radial_phisq = np.exp(radial.evaluate(np.hypot(x[sel], x[j])))
        assert np.max(np.abs(plane_phisq - radial_phisq) / radial_phisq) < 0.01
        assert abs(plane_flux(out) - 2 * pi) / (2 * pi) < 1e-2

    def test_flux_with_tail(self):
        """Test the interior flux plus the exterior tail is 2π within 1% on a small square."""
        opts = PlaneOptions(closure='asymptotic')
        out = monotone_iterate_plane(SquareDomain(6.0, 255), ORIGIN, 12.0, opts)
        assert out.converged
        assert out.vortices == ORIGIN
        assert abs(plane_flux(out) - 2 * pi) / (2 * pi) < 1e-2
