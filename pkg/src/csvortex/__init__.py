"""csvortex - vortex solutions of the generalized self-dual Chern–Simons equation."""

__version__ = "0.1.0"
