"""Twist maps on the cylinder and Lyapunov exponents along orbits.

Each kick induces the exact symplectic map
    v' = v - grad F_j(x),   x' = x + v'  (mod 1),
whose Jacobian [[I - H, I], [-H, I]] (H the kick Hessian) has unit
determinant.  Lyapunov exponents are extracted by QR re-orthonormalized
products of these Jacobians along an orbit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forcing import ForcingModel, eval_gradF, eval_hessF, grid_F
from .grid import GridFunction, as_coords, min_lift, wrap
from .lax import Orbit

__all__ = [
    "LyapunovResult",
    "PhasePoint",
    "c2_norm",
    "iterate_twist",
    "lyapunov_exponents",
    "lyapunov_from_matrices",
    "twist_jacobian",
    "twist_map",
    "twist_map_inverse",
    "velocity_lipschitz_bound",
    "verify_minimizer_is_orbit",
]


@dataclass(frozen=True)
class PhasePoint:
    """Cylinder point: torus position and unreduced velocity."""

    x: np.ndarray
    v: np.ndarray

    def __init__(self, x, v):
        xv = wrap(np.atleast_1d(np.asarray(x, dtype=np.float64)))
        vv = np.atleast_1d(np.asarray(v, dtype=np.float64))
        if xv.shape != vv.shape or xv.size not in (1, 2):
            raise ValueError("x and v must be vectors of matching dimension 1 or 2")
        xv.setflags(write=False)
        vv.setflags(write=False)
        object.__setattr__(self, "x", xv)
        object.__setattr__(self, "v", vv)

    @property
    def dim(self) -> int:
        return self.x.size


def _as_phase(p) -> PhasePoint:
    if isinstance(p, PhasePoint):
        return p
    x, v = p
    return PhasePoint(x, v)


def twist_map(j: int, p, model: ForcingModel) -> PhasePoint:
    """Kick at time j then free flight: (x, v) -> (x + v', v') with v' = v - grad F_j(x)."""
    pp = _as_phase(p)
    v1 = pp.v - eval_gradF(model, j, pp.x)
    return PhasePoint(wrap(pp.x + v1), v1)


def twist_map_inverse(j: int, p, model: ForcingModel) -> PhasePoint:
    """Inverse of twist_map at time j: x = x' - v', v = v' + grad F_j(x)."""
    pp = _as_phase(p)
    x0 = wrap(pp.x - pp.v)
    return PhasePoint(x0, pp.v + eval_gradF(model, j, x0))


def iterate_twist(model: ForcingModel, p0, t0: int, steps: int, b=None) -> Orbit:
    """Iterate the twist maps from (x, v) at time t0 for the given number of steps."""
    pp = _as_phase(p0)
    xs = [np.array(pp.x)]
    vs = [np.array(pp.v)]
    cur = pp
    for i in range(steps):
        cur = twist_map(t0 + i, cur, model)
        xs.append(np.array(cur.x))
        vs.append(np.array(cur.v))
    return Orbit((t0, t0 + steps), np.asarray(xs), np.asarray(vs))


def twist_jacobian(j: int, x, model: ForcingModel) -> np.ndarray:
    """Jacobian [[I - H, I], [-H, I]] of the twist map at (x, .), H = hess F_j(x)."""
    d = model.dim
    H = eval_hessF(model, j, as_coords(x, d))
    eye = np.eye(d)
    top = np.hstack([eye - H, eye])
    bot = np.hstack([-H, eye])
    return np.vstack([top, bot])


@dataclass(frozen=True)
class LyapunovResult:
    """Lyapunov exponents (ascending) with per-step running averages."""

    exponents: np.ndarray
    window: int
    per_step_log: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.exponents, dtype=np.float64)
        e.setflags(write=False)
        object.__setattr__(self, "exponents", e)


def lyapunov_from_matrices(mats) -> LyapunovResult:
    """QR-based Lyapunov exponents of a product of cocycle matrices.

    mats has shape (T, k, k), applied in order mats[0], mats[1], ...
    Re-orthonormalizes every step and accumulates log |diag R|.
    """
    mats = np.asarray(mats, dtype=np.float64)
    T, k, k2 = mats.shape
    if k != k2:
        raise ValueError("matrices must be square")
    if T < 1:
        raise ValueError("need at least one matrix")
    Q = np.eye(k)
    sums = np.zeros(k)
    log = np.empty((T, k))
    for t in range(T):
        Q, Rm = np.linalg.qr(mats[t] @ Q)
        diag = np.diag(Rm).copy()
        sign = np.sign(diag)
        sign[sign == 0.0] = 1.0
        Q = Q * sign  # keep R diagonal positive
        sums += np.log(np.abs(diag))
        log[t] = np.sort(sums / (t + 1))
    return LyapunovResult(exponents=np.sort(sums / T), window=T, per_step_log=log)


def lyapunov_exponents(orbit: Orbit, model: ForcingModel) -> LyapunovResult:
    """Lyapunov exponents of the twist cocycle along an orbit's positions."""
    if len(orbit) < 10:
        raise ValueError("orbit too short for Lyapunov estimation (need >= 10 points)")
    t0, t1 = orbit.times
    mats = np.empty((t1 - t0, 2 * orbit.dim, 2 * orbit.dim))
    for i, j in enumerate(range(t0, t1)):
        mats[i] = twist_jacobian(j, orbit.x[i], model)
    return lyapunov_from_matrices(mats)


def verify_minimizer_is_orbit(orbit: Orbit, model: ForcingModel) -> float:
    """Largest deviation of the orbit from the twist-map recursion.

    For each step compares (x_{j+1}, v_{j+1}) with the twist image of
    (x_j, v_j); returns the max over steps of the torus distance in x
    plus the Euclidean gap in v.  Backtracked grid minimizers satisfy
    this up to a grid-resolution residual.
    """
    t0, t1 = orbit.times
    worst = 0.0
    for i, j in enumerate(range(t0, t1)):
        img = twist_map(j, PhasePoint(orbit.x[i], orbit.v[i]), model)
        dx = float(np.linalg.norm(min_lift(img.x, orbit.x[i + 1])))
        dv = float(np.linalg.norm(orbit.v[i + 1] - img.v))
        worst = max(worst, dx + dv)
    return worst


def c2_norm(model: ForcingModel, j: int, n: int = 512) -> float:
    """Grid estimate of the C^2 norm of the kick potential F_j."""
    F = grid_F(model, j, n)
    sup_f = float(np.max(np.abs(F.values)))
    axes = range(model.dim)
    grad_sq = np.zeros_like(F.values)
    hess_sup = 0.0
    for a in axes:
        da = (np.roll(F.values, -1, axis=a) - np.roll(F.values, 1, axis=a)) / (2 * F.h)
        grad_sq = grad_sq + da * da
        for c in axes:
            if c == a:
                dd = (np.roll(F.values, -1, axis=a) - 2 * F.values + np.roll(F.values, 1, axis=a)) / F.h**2
            else:
                dd = (np.roll(np.roll(F.values, -1, axis=a), -1, axis=c)
                      - np.roll(np.roll(F.values, -1, axis=a), 1, axis=c)
                      - np.roll(np.roll(F.values, 1, axis=a), -1, axis=c)
                      + np.roll(np.roll(F.values, 1, axis=a), 1, axis=c)) / (4 * F.h**2)
            hess_sup = max(hess_sup, float(np.max(np.abs(dd))))
    return sup_f + float(np.max(np.sqrt(grad_sq))) + hess_sup


def velocity_lipschitz_bound(model: ForcingModel, j: int) -> float:
    """Lipschitz constant 2 sqrt(d) (|F_j|_C2 + 2) tying velocity gaps to position gaps."""
    return 2.0 * np.sqrt(model.dim) * (c2_norm(model, j) + 2.0)
