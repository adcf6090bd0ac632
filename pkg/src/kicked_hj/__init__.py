"""Randomly kicked Hamilton-Jacobi equations on the torus.

Discrete Lax-Oleinik semigroups for kicked scalar Hamilton-Jacobi
equations, their backward/forward stationary solutions, global
minimizing orbits, Lyapunov exponents of the associated twist maps,
and empirical measurement of the exponential convergence rate.
"""

__version__ = "0.1.0"

from .grid import GridFunction, TorusPoint  # noqa: F401
from .forcing import BasisPotential, CoefficientDistribution, ForcingModel  # noqa: F401
