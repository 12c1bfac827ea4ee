"""Dispatch a parsed RunConfig to its solver and write the run's artifacts."""

from datetime import datetime, timezone
from math import isfinite, pi
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import (
    LAPLACIAN_FLUX_TOLERANCE,
    SolveReport,
    covariant_decay_slope,
    decay_fit,
    five_point_laplacian,
    flux,
    laplacian_flux_estimate,
    log_singularity_laplacian,
    reconstruct_higgs_gauge,
)
from .errors import ConstraintError, CsvortexError, WindowTooShort
from .export import write_beta_vs_a, write_field, write_lambda_scan, write_physical, write_profile, write_report
from .plane import shallow_subsolution, solve_topological_plane
from .radial import (
    Tag,
    beta_sweep,
    check_identities,
    compute_beta,
    find_a0,
    find_a_for_beta,
    integrate,
    to_physical,
    topological_profile,
)
from .torus import (
    Outcome,
    TorusGrid,
    action,
    estimate_lambda_c,
    kappa_c_from_lambda_c,
    kappa_upper_bound,
    lambda_lower_bound,
    monotone_iterate,
)

Log = Callable[[str], None] | None

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_SOLUTION = 2

SOLVERS = {
    'radial-topological': 'radial',
    'radial-nontopological': 'radial',
    'radial-sweep': 'radial',
    'torus': 'torus',
    'lambda-critical': 'torus',
    'plane': 'plane',
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _report(config: RunConfig, status: str, **kwargs) -> SolveReport:
    return SolveReport(
        mode=config.mode,
        status=status,
        solver=SOLVERS[config.mode],
        N=config.N,
        lambda_=config.lambda_,
        kappa=config.kappa,
        **kwargs,
    )


def _laplacian_check(u, X, Y, vortices, grid, flux_value: float) -> dict:
    hx = float(X[1, 0] - X[0, 0])
    hy = float(Y[0, 1] - Y[0, 0])
    hg = reconstruct_higgs_gauge(u, X, Y, vortices, grid)
    lap = five_point_laplacian(u, hx, hy, periodic=grid is not None)
    if grid is None:
        # the torus u0 is the discrete Green function; only the plane carries ln r
        lap = lap - log_singularity_laplacian(X, Y, vortices)
    estimate = laplacian_flux_estimate(lap, hg.mask, hx * hy)
    rel = abs(estimate - flux_value) / abs(flux_value) if flux_value else abs(estimate)
    return {
        'flux_laplacian': estimate,
        'flux_laplacian_relative_error': rel,
        'flux_laplacian_ok': rel < LAPLACIAN_FLUX_TOLERANCE,
        'masked_nodes': len(hg.masked_nodes),
        'max_abs_phi': float(hg.abs_phi.max()),
    }


def _radial_topological(config: RunConfig, out: Path, log: Log) -> SolveReport:
    N, lam = config.N, config.lambda_
    profile = topological_profile(N, lam, config.shooting_options(), log=log)
    phi = flux(profile)
    write_profile(out, profile)
    write_physical(out, to_physical(profile))
    extra = {'t_reliable': profile.t_reliable}
    if N:
        extra['flux_quantization_error'] = abs(phi - 2 * pi * N) / (2 * pi * N)
    return _report(
        config, Outcome.CONVERGED.value,
        flux=phi, a=profile.a,
        convergence={'samples': len(profile.t), 'ode_residual': float(np.abs(profile.reliable().ode_residual()).max())},
        extra=extra,
    )


def _radial_nontopological(config: RunConfig, out: Path, log: Log) -> SolveReport:
    N, lam = config.N, config.lambda_
    opts = config.shooting_options()
    t = config.targets
    extra = {}
    if t.beta is not None:
        inv = find_a_for_beta(N, lam, t.beta, opts, log=log)
        a = inv.a
        extra.update(beta_target=t.beta, a0=inv.a0, sign_changes=inv.sign_changes)
    else:
        a = float(t.a)
    profile, c = integrate(opts.params(N, lam, a), log=log)
    if c.tag is not Tag.NEGATIVE:
        raise ConstraintError(f"a={a!r} classifies {c.tag.value}; non-topological solutions need a < a0")
    beta = compute_beta(profile)
    residuals = check_identities(profile, beta)
    phi = flux(profile)
    extra['flux_identity_error'] = abs(phi - pi * (2 * N + beta)) / phi
    try:
        slope = decay_fit(profile)
        extra['covariant_decay_slope'] = covariant_decay_slope(profile)
    except WindowTooShort as e:
        slope = None
        extra['decay_fit_error'] = e.to_dict()
    write_profile(out, profile)
    write_physical(out, to_physical(profile))
    return _report(
        config, Outcome.CONVERGED.value,
        flux=phi, beta=beta, a=a, identity_residuals=residuals, decay_slope=slope,
        convergence={'samples': len(profile.t), 'turning_time': c.event_time},
        extra=extra,
    )


def _radial_sweep(config: RunConfig, out: Path, log: Log) -> SolveReport:
    N, lam = config.N, config.lambda_
    opts = config.shooting_options()
    t = config.targets
    a0 = find_a0(N, lam, opts, log=log)
    if t.a_range is not None:
        a_values = np.linspace(*t.a_range, t.samples)
    else:
        a_values = a0 + np.linspace(*t.a_offset_range, t.samples)
    if log:
        log(f"sweeping {len(a_values)} shots on {t.workers} worker(s)")
    rows = beta_sweep(N, lam, a_values, opts, workers=t.workers)
    write_beta_vs_a(out, rows)
    finite = [b for _, b in rows if isfinite(b)]
    return _report(
        config, Outcome.CONVERGED.value,
        convergence={'samples': len(rows), 'negative': len(finite)},
        extra={
            'a0': a0,
            'beta_min': min(finite) if finite else None,
            'beta_max': max(finite) if finite else None,
            'all_above_range_floor': all(b > 2 * N + 4 for b in finite),
        },
    )


def _torus(config: RunConfig, out: Path, log: Log) -> SolveReport:
    d = config.domain
    grid = TorusGrid(d.Lx, d.Ly, d.nx, d.ny)
    lam = config.lambda_
    bound = lambda_lower_bound(config.N, grid.area)
    outcome = monotone_iterate(grid, config.vortices, lam, config.solver_options(), log=log)
    convergence = {
        'iterations': outcome.iterations,
        'final_residual': outcome.final_residual,
        'reason': outcome.reason,
        'K': outcome.K,
        'max_increment': outcome.max_increment,
    }
    extra = {'lambda_lower_bound': bound, 'below_necessary_bound': lam < bound}
    if not outcome.converged:
        return _report(config, outcome.tag.value, convergence=convergence, extra=extra)
    phi = flux(outcome)
    X, Y = grid.coords()
    write_field(out, X, Y, outcome.u)
    extra['action'] = action(outcome.v, outcome.u0, lam, config.N, d.laplacian)
    extra['max_u'] = float(outcome.u.max())
    if config.N:
        extra['flux_quantization_error'] = abs(phi - 2 * pi * config.N) / (2 * pi * config.N)
        extra.update(_laplacian_check(outcome.u, X, Y, config.vortices, grid, phi))
    return _report(config, outcome.tag.value, flux=phi, convergence=convergence, extra=extra)


def _plane(config: RunConfig, out: Path, log: Log) -> SolveReport:
    d = config.domain
    lam = config.lambda_
    opts = config.plane_options()
    sol = solve_topological_plane(config.vortices, lam, d.R_schedule, d.n, opts, log=log)
    o = sol.outcome
    convergence = {
        'iterations': o.iterations,
        'newton_steps': o.newton_steps,
        'final_residual': o.final_residual,
        'reason': o.reason,
        'K': o.K,
        'cauchy_gap': sol.cauchy_gap,
        'stages': [s.to_dict() for s in sol.stages],
    }
    extra = {'closure': o.closure, 'boundary_band': o.boundary_band()}
    if config.targets.subsolution_a is not None:
        sub = shallow_subsolution(
            config.vortices, lam, config.targets.subsolution_a, o.domain, opts,
            config.shooting_options(), log=log,
        )
        extra['subsolution'] = {
            'a': sub.a, 'mu': sub.mu, 'method': sub.method, 'min_slack': sub.min_slack,
            'max_excess_over_solution': float((sub.v_star.values - o.v.values).max()),
        }
    if not o.converged:
        return _report(config, o.tag.value, convergence=convergence, extra=extra)
    phi = sol.flux
    X, Y = o.domain.coords()
    write_field(out, X, Y, o.u)
    extra['max_u'] = float(o.u.max())
    if config.N:
        extra['flux_quantization_error'] = abs(phi - 2 * pi * config.N) / (2 * pi * config.N)
        extra.update(_laplacian_check(o.u, X, Y, config.vortices, None, phi))
    return _report(config, o.tag.value, flux=phi, convergence=convergence, extra=extra)


def _lambda_critical(config: RunConfig, out: Path, log: Log) -> SolveReport:
    d = config.domain
    grid = TorusGrid(d.Lx, d.Ly, d.nx, d.ny)
    lc = estimate_lambda_c(grid, config.vortices, config.solver_options(), log=log)
    write_lambda_scan(out, lc.scan)
    extra = {
        'lambda_c': lc.lambda_c,
        'bracket_width': lc.bracket_width,
        'lambda_lower_bound': lc.lower_bound,
    }
    if config.N:
        extra['kappa_c'] = kappa_c_from_lambda_c(lc.lambda_c)
        extra['kappa_upper_bound'] = kappa_upper_bound(config.N, grid.area)
    return _report(
        config, Outcome.CONVERGED.value,
        convergence={'oracle_calls': len(lc.scan)},
        extra=extra,
    )


MODES = {
    'radial-topological': _radial_topological,
    'radial-nontopological': _radial_nontopological,
    'radial-sweep': _radial_sweep,
    'torus': _torus,
    'plane': _plane,
    'lambda-critical': _lambda_critical,
}


def execute(config: RunConfig, log: Log = None) -> SolveReport:
    """Run the configured mode and write its artifacts, report.json last.

    Solver failures are captured in the report (status "error") rather than
    raised.
    """
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    try:
        report = MODES[config.mode](config, out, log)
    except CsvortexError as e:
        report = _report(config, 'error', error=e.to_dict())
    except ValueError as e:
        report = _report(config, 'error', error={'code': 'invalid_argument', 'message': str(e)})
    report.provenance = {
        'config_hash': config.digest(),
        'version': __version__,
        'started': started,
        'finished': _now(),
    }
    write_report(out, report)
    return report


def exit_code(report: SolveReport) -> int:
    if report.status == Outcome.CONVERGED.value:
        return EXIT_OK
    if report.status == Outcome.DIVERGED.value:
        return EXIT_NO_SOLUTION
    return EXIT_ERROR


def run(config: RunConfig, log: Log = None) -> int:
    """Execute `config`; 0 on Converged, 2 on Diverged, 1 on NotConverged or error."""
    return exit_code(execute(config, log))
