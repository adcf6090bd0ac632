"""Render kicked-hj CSV outputs into figures.

This package reads the documented CSV schemas only; it never imports the
simulation library, so the files are the full interface.
"""

from .figures import plot_lyapunov, plot_orbit, plot_profile, plot_rate
from .readers import SchemaError

__all__ = ["SchemaError", "plot_lyapunov", "plot_orbit", "plot_profile", "plot_rate"]
