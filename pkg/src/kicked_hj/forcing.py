"""Random kicked forcing potentials F_j(x) = sum_i xi_j^i F_i(x).

The basis potentials F_i are single trigonometric modes on the torus;
the coefficients xi_j are i.i.d. across integer kick times j and are
produced by a counter-based generator keyed on (seed, j), so any time
index (including negative ones) can be sampled independently and
deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .grid import GridFunction, as_coords, grid_coordinates

__all__ = [
    "BasisPotential",
    "CoefficientDistribution",
    "ForcingModel",
    "default_model",
    "eval_F",
    "eval_gradF",
    "eval_hessF",
    "grid_F",
    "sample_xi",
    "zero_model",
]

_TWO_PI = 2.0 * np.pi
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class BasisPotential:
    """One trigonometric mode a*cos(2 pi k.x) or a*sin(2 pi k.x)."""

    kind: str
    wavevector: tuple[int, ...]
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError("kind must be 'cos' or 'sin'")
        wv = tuple(int(k) for k in self.wavevector)
        if len(wv) not in (1, 2):
            raise ValueError("wavevector must have 1 or 2 components")
        if all(k == 0 for k in wv):
            raise ValueError("wavevector must be nonzero")
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        object.__setattr__(self, "wavevector", wv)
        object.__setattr__(self, "amplitude", float(self.amplitude))

    @property
    def dim(self) -> int:
        return len(self.wavevector)

    def _phase(self, x: np.ndarray):
        k = np.asarray(self.wavevector, dtype=np.float64)
        return _TWO_PI * np.tensordot(np.asarray(x, dtype=np.float64), k, axes=([-1], [0]))

    def value(self, x) -> float:
        p = self._phase(as_coords(x, self.dim))
        return self.amplitude * (np.cos(p) if self.kind == "cos" else np.sin(p))

    def gradient(self, x) -> np.ndarray:
        k = np.asarray(self.wavevector, dtype=np.float64)
        p = self._phase(as_coords(x, self.dim))
        if self.kind == "cos":
            return -self.amplitude * _TWO_PI * np.sin(p) * k
        return self.amplitude * _TWO_PI * np.cos(p) * k

    def hessian(self, x) -> np.ndarray:
        k = np.asarray(self.wavevector, dtype=np.float64)
        p = self._phase(as_coords(x, self.dim))
        kk = np.outer(k, k)
        if self.kind == "cos":
            return -self.amplitude * _TWO_PI**2 * np.cos(p) * kk
        return -self.amplitude * _TWO_PI**2 * np.sin(p) * kk

    def grid_values(self, n: int) -> np.ndarray:
        axes = grid_coordinates(self.dim, n)
        p = _TWO_PI * sum(k * ax for k, ax in zip(self.wavevector, axes))
        return self.amplitude * (np.cos(p) if self.kind == "cos" else np.sin(p))


@dataclass(frozen=True)
class CoefficientDistribution:
    """Distribution of one i.i.d. kick coefficient."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "gaussian":
            if len(self.params) != 1 or self.params[0] <= 0:
                raise ValueError("gaussian distribution needs sigma > 0")
        elif self.kind == "uniform":
            if len(self.params) != 2 or not self.params[0] < self.params[1]:
                raise ValueError("uniform distribution needs lo < hi")
        else:
            raise ValueError("kind must be 'gaussian' or 'uniform'")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "CoefficientDistribution":
        return cls("gaussian", (sigma,))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "CoefficientDistribution":
        return cls("uniform", (lo, hi))

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map uniform(0,1) samples through the inverse CDF."""
        if self.kind == "gaussian":
            return self.params[0] * ndtri(u)
        lo, hi = self.params
        return lo + (hi - lo) * u


@dataclass(frozen=True)
class ForcingModel:
    """Kicked forcing: at integer time j the potential is sum_i xi_j^i F_i.

    time_offset shifts the realization in time: a model with offset m
    sees at local time j the coefficients the base model sees at j + m.
    """

    basis: tuple[BasisPotential, ...]
    dist: CoefficientDistribution
    seed: int
    time_offset: int = 0

    def __post_init__(self):
        basis = tuple(self.basis)
        if not basis:
            raise ValueError("basis must be nonempty")
        dims = {b.dim for b in basis}
        if len(dims) != 1:
            raise ValueError("all basis potentials must share one dimension")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "time_offset", int(self.time_offset))

    @property
    def dim(self) -> int:
        return self.basis[0].dim

    @property
    def num_modes(self) -> int:
        return len(self.basis)

    def shifted(self, m: int) -> "ForcingModel":
        """The forcing as seen after shifting time by m steps."""
        return ForcingModel(self.basis, self.dist, self.seed, self.time_offset + int(m))


def sample_xi(model: ForcingModel, j: int) -> np.ndarray:
    """Coefficient vector xi_j, a pure function of (model.seed, j).

    Counter-based: a Philox stream keyed on (seed, j) emits two 32-bit
    words per coefficient, assembled into a 53-bit uniform in (0, 1)
    and mapped through the distribution's inverse CDF.  Works for any
    integer j, negative times included.
    """
    t = int(j) + model.time_offset
    key = np.array([model.seed & _MASK64, t & _MASK64], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    m = model.num_modes
    words = gen.integers(0, 1 << 32, size=2 * m, dtype=np.uint64)
    mant = ((words[0::2] << np.uint64(32)) | words[1::2]) >> np.uint64(11)
    u = (mant.astype(np.float64) + 0.5) * 2.0**-53
    return model.dist.from_uniform(u)


def eval_F(model: ForcingModel, j: int, x) -> float:
    """Kick potential F_j at a point."""
    xi = sample_xi(model, j)
    return float(sum(c * b.value(x) for c, b in zip(xi, model.basis)))


def eval_gradF(model: ForcingModel, j: int, x) -> np.ndarray:
    """Gradient of F_j at a point."""
    xi = sample_xi(model, j)
    out = np.zeros(model.dim)
    for c, b in zip(xi, model.basis):
        out += c * b.gradient(x)
    return out


def eval_hessF(model: ForcingModel, j: int, x) -> np.ndarray:
    """Hessian of F_j at a point."""
    xi = sample_xi(model, j)
    out = np.zeros((model.dim, model.dim))
    for c, b in zip(xi, model.basis):
        out += c * b.hessian(x)
    return out


def grid_F(model: ForcingModel, j: int, n: int) -> GridFunction:
    """F_j sampled on the n^d grid."""
    xi = sample_xi(model, j)
    vals = np.zeros((n,) * model.dim)
    for c, b in zip(xi, model.basis):
        vals += c * b.grid_values(n)
    return GridFunction(dim=model.dim, n=n, values=vals)


def default_model(dim: int = 1, seed: int = 42, sigma: float = 1.0,
                  amplitude: float = 0.01) -> ForcingModel:
    """Low-mode trig basis with gaussian coefficients.

    dim=1 uses {cos 2 pi x, sin 2 pi x}; dim=2 adds the same pair in the
    second coordinate, which embeds the torus in coefficient space.  The
    mild default amplitude keeps the discrete dynamics in the measurable
    regime: strong kicks make grid solves coalesce exactly within a few
    steps, leaving no decay window to fit, and blow up the O(h) constants
    of backtracked orbits.
    """
    if dim == 1:
        basis = (
            BasisPotential("cos", (1,), amplitude),
            BasisPotential("sin", (1,), amplitude),
        )
    elif dim == 2:
        basis = (
            BasisPotential("cos", (1, 0), amplitude),
            BasisPotential("sin", (1, 0), amplitude),
            BasisPotential("cos", (0, 1), amplitude),
            BasisPotential("sin", (0, 1), amplitude),
        )
    else:
        raise ValueError("dim must be 1 or 2")
    return ForcingModel(basis, CoefficientDistribution.gaussian(sigma), seed)


def zero_model(dim: int = 1, seed: int = 0) -> ForcingModel:
    """Zero forcing (amplitude-0 basis); the free inf-convolution dynamics."""
    return default_model(dim=dim, seed=seed, amplitude=0.0)
