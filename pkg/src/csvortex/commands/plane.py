"""Full-plane topological command."""

from . import invoke, run_options


def register(cli):
    """Register command with CLI."""

    @cli.command()
    @run_options
    def plane(config_path, out, lambda_, verbose):
        """Solve on growing squares and report the flux and Cauchy gap per stage."""
        invoke('plane', config_path, out, lambda_, verbose)
