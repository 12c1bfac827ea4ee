"""CSV and JSON artifact writers."""

from pathlib import Path

import numpy as np

from .diagnostics import SolveReport
from .radial import PhysicalProfile, RadialProfile

FMT = '%.17g'


def _write_columns(path: Path, header: str, *columns) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
    np.savetxt(path, data, fmt=FMT, delimiter=',', header=header, comments='')
    return path


def write_profile(out: Path, profile: RadialProfile) -> Path:
    return _write_columns(Path(out) / 'profile.csv', 't,u,up', profile.t, profile.u, profile.up)


def write_physical(out: Path, phys: PhysicalProfile) -> Path:
    return _write_columns(
        Path(out) / 'physical.csv', 'r,phisq,F12,energy_density',
        phys.r, phys.phisq, phys.F12, phys.energy_density,
    )


def write_field(out: Path, X: np.ndarray, Y: np.ndarray, u: np.ndarray) -> Path:
    """Row-major (x, y, u) triples."""
    return _write_columns(Path(out) / 'field.csv', 'x,y,u', X.ravel(), Y.ravel(), u.ravel())


def write_beta_vs_a(out: Path, rows: list[tuple[float, float]]) -> Path:
    a, beta = zip(*rows) if rows else ((), ())
    return _write_columns(Path(out) / 'plotdata' / 'beta_vs_a.csv', 'a,beta', a, beta)


def write_lambda_scan(out: Path, scan: list[tuple[float, bool]]) -> Path:
    """One row per oracle call, sorted by λ; `converged` is 1 or 0."""
    rows = sorted(scan)
    path = Path(out) / 'plotdata' / 'lambda_scan.csv'
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ['lambda,converged'] + [f"{lam!r},{int(ok)}" for lam, ok in rows]
    path.write_text('\n'.join(lines) + '\n')
    return path


def write_report(out: Path, report: SolveReport) -> Path:
    path = Path(out) / 'report.json'
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json())
    return path
