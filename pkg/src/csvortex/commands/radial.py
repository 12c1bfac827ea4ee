"""Radial shooting commands: topological, non-topological and β(a) sweeps."""

from . import invoke, run_options


def register(cli):
    """Register command with CLI."""

    @cli.command('radial-topological')
    @run_options
    def radial_topological(config_path, out, lambda_, verbose):
        """Shoot for the topological radial vortex (u → 0 at infinity)."""
        invoke('radial-topological', config_path, out, lambda_, verbose)

    @cli.command('radial-nontopological')
    @run_options
    def radial_nontopological(config_path, out, lambda_, verbose):
        """Non-topological radial vortex for a target decay exponent β or shooting parameter a."""
        invoke('radial-nontopological', config_path, out, lambda_, verbose)

    @cli.command('radial-sweep')
    @run_options
    def radial_sweep(config_path, out, lambda_, verbose):
        """Tabulate β(a) over a range of shooting parameters."""
        invoke('radial-sweep', config_path, out, lambda_, verbose)
