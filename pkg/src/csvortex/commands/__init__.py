"""Shared wiring for the per-mode subcommands."""

from pathlib import Path

from utz import err
from utz.cli import flag, opt

from ..config import parse_config
from ..errors import CsvortexError, SchemaError
from ..runner import EXIT_ERROR, execute, exit_code


def run_options(fn):
    """-c/--config, -o/--out, -l/--lambda and -v/--verbose."""
    fn = flag('-v', '--verbose', help='Log solver progress to stderr')(fn)
    fn = opt('-l', '--lambda', 'lambda_', type=float, help='Override the coupling with this lambda')(fn)
    fn = opt('-o', '--out', help='Output directory (overrides the config)')(fn)
    fn = opt('-c', '--config', 'config_path', required=True, help='JSON run configuration')(fn)
    return fn


def invoke(mode: str, config_path: str, out: str | None, lambda_: float | None, verbose: bool) -> None:
    """Parse, run and exit with the run's status code; prints the report path on stdout."""
    try:
        config = parse_config(Path(config_path).read_text())
        if config.mode != mode:
            raise SchemaError('$.mode', f"config is for {config.mode!r}, not {mode!r}")
        config = config.with_overrides(lambda_=lambda_, output=out)
    except OSError as e:
        err(f"Error: could not read {config_path}: {e}")
        exit(EXIT_ERROR)
    except CsvortexError as e:
        err(f"Error: {e}")
        exit(EXIT_ERROR)

    report = execute(config, log=err if verbose else None)
    if report.error:
        err(f"Error ({report.error['code']}): {report.error['message']}")
    elif report.status != 'Converged':
        reason = report.convergence.get('reason')
        err(f"{mode}: {report.status}" + (f" ({reason})" if reason else ''))
    print(Path(config.output) / 'report.json')
    exit(exit_code(report))
