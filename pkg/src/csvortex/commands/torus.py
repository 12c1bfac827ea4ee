"""Doubly periodic commands."""

from . import invoke, run_options


def register(cli):
    """Register command with CLI."""

    @cli.command()
    @run_options
    def torus(config_path, out, lambda_, verbose):
        """Monotone iteration for vortices on a periodic cell; exits 2 if it diverges.

        Exits 1 when max_iter runs out while the residual is still falling.
        The Laplacian defaults to the 5-point 'fd' stencil; set
        domain.laplacian to 'spectral' in the config for the Fourier symbol.
        """
        invoke('torus', config_path, out, lambda_, verbose)

    @cli.command('lambda-critical')
    @run_options
    def lambda_critical(config_path, out, lambda_, verbose):
        """Bisect for the critical coupling below which no periodic solution is found.

        Uses the same Laplacian as `torus` ('fd' unless domain.laplacian is 'spectral').
        """
        invoke('lambda-critical', config_path, out, lambda_, verbose)
