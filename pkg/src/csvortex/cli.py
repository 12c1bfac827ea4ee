"""CLI entry point for csvortex."""

from click import group

from . import __version__


@group()
def cli():
    """Self-dual Chern–Simons vortex solvers."""
    pass


@cli.command()
def version():
    """Print the package version."""
    print(__version__)


# Register modular commands
from .commands import radial as radial_cmd
from .commands import torus as torus_cmd
from .commands import plane as plane_cmd

radial_cmd.register(cli)
torus_cmd.register(cli)
plane_cmd.register(cli)


if __name__ == '__main__':
    cli()
