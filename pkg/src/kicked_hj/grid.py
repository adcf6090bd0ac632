"""Uniform periodic grids on the torus [0,1)^d and basic norms.

Grid functions are immutable samplings of real-valued functions on a
uniform n^d grid with spacing h = 1/n, stored row-major so that the
multi-index (i_1, ..., i_d) sits at the point (i_1*h, ..., i_d*h).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridFunction",
    "TorusPoint",
    "as_coords",
    "fd_gradient",
    "grid_coordinates",
    "min_lift",
    "nearest_index",
    "oscillation",
    "semiconcavity_modulus",
    "star_seminorm",
    "torus_distance",
    "wrap",
]


def wrap(x) -> np.ndarray:
    """Reduce coordinates into the fundamental domain [0, 1)^d."""
    out = np.mod(np.asarray(x, dtype=np.float64), 1.0)
    # np.mod can return 1.0 when x is a tiny negative number; fold it back.
    return np.where(out >= 1.0, 0.0, out)


@dataclass(frozen=True)
class TorusPoint:
    """A point on the torus, coordinates reduced to [0, 1)^d."""

    coords: np.ndarray

    def __init__(self, coords):
        coords = wrap(np.atleast_1d(np.asarray(coords, dtype=np.float64)))
        if coords.ndim != 1 or coords.size not in (1, 2):
            raise ValueError("torus points are 1- or 2-dimensional")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.size

    def __iter__(self):
        return iter(self.coords)


def as_coords(x, dim: int | None = None) -> np.ndarray:
    """Coerce a TorusPoint / scalar / array-like to a float coordinate vector."""
    if isinstance(x, TorusPoint):
        c = np.array(x.coords, dtype=np.float64)
    else:
        c = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if dim is not None and c.size != dim:
        raise ValueError(f"expected {dim} coordinates, got {c.size}")
    return c


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Immutable sampling of a real function on the uniform torus grid.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    n : int
        Points per axis; the grid has n**dim points.
    values : ndarray
        Shape (n,) for dim=1 or (n, n) for dim=2, finite reals.
    """

    dim: int
    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != (self.n,) * self.dim:
            raise ValueError(f"values must have shape {(self.n,) * self.dim}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @classmethod
    def from_values(cls, values) -> "GridFunction":
        v = np.asarray(values, dtype=np.float64)
        if v.ndim not in (1, 2):
            raise ValueError("values must be a 1-D or 2-D array")
        if v.ndim == 2 and v.shape[0] != v.shape[1]:
            raise ValueError("2-D values must be square")
        return cls(dim=v.ndim, n=v.shape[0], values=v)

    @classmethod
    def constant(cls, dim: int, n: int, c: float = 0.0) -> "GridFunction":
        return cls(dim=dim, n=n, values=np.full((n,) * dim, float(c)))

    @classmethod
    def sample(cls, dim: int, n: int, fn) -> "GridFunction":
        """Sample ``fn`` (vectorized over coordinate arrays) on the grid."""
        ax = np.arange(n) / n
        if dim == 1:
            return cls(dim=1, n=n, values=np.asarray(fn(ax), dtype=np.float64))
        x1, x2 = np.meshgrid(ax, ax, indexing="ij")
        return cls(dim=2, n=n, values=np.asarray(fn(x1, x2), dtype=np.float64))

    def point(self, index) -> np.ndarray:
        """Coordinates of a grid multi-index."""
        idx = np.atleast_1d(np.asarray(index, dtype=np.int64))
        return wrap(idx * self.h)


def grid_coordinates(dim: int, n: int):
    """Coordinate arrays of the grid, one (n,)*dim array per axis."""
    ax = np.arange(n) / n
    if dim == 1:
        return (ax,)
    return tuple(np.meshgrid(ax, ax, indexing="ij"))


def star_seminorm(f: GridFunction) -> float:
    """min_C sup |f - C| over the grid, equal to (max f - min f) / 2."""
    v = f.values
    return 0.5 * (float(np.max(v)) - float(np.min(v)))


def oscillation(f: GridFunction) -> float:
    """max f - min f over the grid."""
    v = f.values
    return float(np.max(v)) - float(np.min(v))


def min_lift(x, y) -> np.ndarray:
    """Minimal-norm representative of y - x modulo Z^d.

    Each component lies in (-1/2, 1/2]; the half-period tie goes to +1/2.
    """
    dx = as_coords(y) - as_coords(x)
    d = np.mod(dx, 1.0)
    d[d >= 1.0] = 0.0
    return np.where(d <= 0.5, d, d - 1.0)


def torus_distance(x, y) -> float:
    """Euclidean distance on the torus."""
    return float(np.linalg.norm(min_lift(x, y)))


def nearest_index(n: int, x) -> tuple[int, ...]:
    """Nearest grid multi-index to a torus point (round half up)."""
    c = wrap(as_coords(x))
    idx = np.floor(c * n + 0.5).astype(np.int64) % n
    return tuple(int(i) for i in idx)


def fd_gradient(f: GridFunction, index) -> np.ndarray:
    """Central-difference gradient at a grid multi-index, periodic wrap."""
    v = f.values
    n, h = f.n, f.h
    idx = np.atleast_1d(np.asarray(index, dtype=np.int64)) % n
    if idx.size != f.dim:
        raise ValueError(f"index must have {f.dim} components")
    out = np.empty(f.dim)
    for a in range(f.dim):
        up = idx.copy()
        dn = idx.copy()
        up[a] = (up[a] + 1) % n
        dn[a] = (dn[a] - 1) % n
        out[a] = (v[tuple(up)] - v[tuple(dn)]) / (2.0 * h)
    return out


def semiconcavity_modulus(f: GridFunction) -> float:
    """Largest second difference (f(i+1) - 2 f(i) + f(i-1)) / h^2 over points and axes."""
    v = f.values
    h2 = f.h * f.h
    worst = -np.inf
    for a in range(f.dim):
        second = np.roll(v, -1, axis=a) - 2.0 * v + np.roll(v, 1, axis=a)
        worst = max(worst, float(np.max(second)))
    return worst / h2
