"""Discrete Lax-Oleinik operators for kicked Hamilton-Jacobi dynamics.

Between consecutive integer times the motion is free, so one backward
step is a min-plus convolution with the kernel |v|^2/2 - b.v applied to
phi - F_j (the kick at the start time j is included in the step j -> j+1).
The convolution minimizes over grid sources together with their integer
lifts, restricted to R whole periods on each side of the base period.

The fast path computes each axis by the lower envelope of parabolas in
O(R n) per line; the brute-force path enumerates every lifted source and
is kept as an independent oracle.  Both resolve ties by the smallest
lifted linear index (row-major over lifted axis indices).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .forcing import ForcingModel, eval_gradF, grid_F
from .grid import GridFunction, as_coords, nearest_index, wrap

__all__ = [
    "Orbit",
    "SolveResult",
    "backtrack_minimizer",
    "backward_solve",
    "backward_step",
    "forward_solve",
    "forward_step",
    "minplus_conv_quadratic",
    "minplus_conv_quadratic_brute",
    "minplus_conv_quadratic_scan",
    "one_step_action",
    "replication_bound",
]


@njit(cache=True, nogil=True)
def _envelope_pass(f, c, p, out, arg):
    """Lower envelope of the parabolas q -> f[q] + c (x - q)^2, q = 0..len(f)-1.

    Queries p must be increasing.  Writes the envelope value and the
    owning parabola index; a query exactly on a boundary between two
    parabolas is assigned to the left (smaller index) one, and for
    parabolas of equal height the intersection abscissa (q + v)/2 is
    computed exactly, so exact value ties go to the smallest index.
    """
    L = f.shape[0]
    v = np.empty(L, dtype=np.int64)
    z = np.empty(L + 1, dtype=np.float64)
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, L):
        while True:
            vk = v[k]
            s = 0.5 * (q + vk) + (f[q] - f[vk]) / (2.0 * c * (q - vk))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for o in range(p.shape[0]):
        po = p[o]
        while z[k + 1] < po:
            k += 1
        vk = v[k]
        dq = po - vk
        out[o] = f[vk] + c * dq * dq
        arg[o] = vk


@njit(cache=True, nogil=True)
def _conv1d(g, beta, c, R):
    n = g.shape[0]
    L = (2 * R + 1) * n
    m_lo = -R * n
    f = np.empty(L)
    for r in range(L):
        f[r] = g[(r + m_lo) % n]
    p = np.empty(n)
    for o in range(n):
        p[o] = o - beta - m_lo
    out = np.empty(n)
    rel = np.empty(n, dtype=np.int64)
    _envelope_pass(f, c, p, out, rel)
    arg = np.empty(n, dtype=np.int64)
    for o in range(n):
        out[o] = out[o] - c * beta * beta
        arg[o] = rel[o] + m_lo
    return out, arg


@njit(cache=True, nogil=True)
def _conv2d(g, beta1, beta2, c, R):
    n = g.shape[0]
    L = (2 * R + 1) * n
    m_lo = -R * n
    f = np.empty(L)
    line = np.empty(n)
    rel = np.empty(n, dtype=np.int64)
    # pass over the last axis: t[i1, o2] = min_{m2} g[i1, m2] + kernel_2
    p2 = np.empty(n)
    for o in range(n):
        p2[o] = o - beta2 - m_lo
    t = np.empty((n, n))
    a2 = np.empty((n, n), dtype=np.int64)
    for i1 in range(n):
        for r in range(L):
            f[r] = g[i1, (r + m_lo) % n]
        _envelope_pass(f, c, p2, line, rel)
        for o in range(n):
            t[i1, o] = line[o] - c * beta2 * beta2
            a2[i1, o] = rel[o] + m_lo
    # pass over the first axis on the partially convolved values
    p1 = np.empty(n)
    for o in range(n):
        p1[o] = o - beta1 - m_lo
    out = np.empty((n, n))
    a = np.empty((n, n, 2), dtype=np.int64)
    for o2 in range(n):
        for r in range(L):
            f[r] = t[(r + m_lo) % n, o2]
        _envelope_pass(f, c, p1, line, rel)
        for o1 in range(n):
            m1 = rel[o1] + m_lo
            out[o1, o2] = line[o1] - c * beta1 * beta1
            a[o1, o2, 0] = m1
            a[o1, o2, 1] = a2[m1 % n, o2]
    return out, a


@njit(cache=True, nogil=True)
def _brute1d(g, b, h, R):
    n = g.shape[0]
    m_lo = -R * n
    m_hi = (R + 1) * n
    out = np.empty(n)
    arg = np.empty(n, dtype=np.int64)
    for o in range(n):
        best = np.inf
        bm = 0
        for m in range(m_lo, m_hi):
            v = (o - m) * h
            val = g[m % n] + (0.5 * v * v - b * v)
            if val < best:
                best = val
                bm = m
        out[o] = best
        arg[o] = bm
    return out, arg


@njit(cache=True, nogil=True)
def _scan2d(g, b1, b2, h, R):
    """Axis-separated direct enumeration of the lifted min-plus convolution.

    Stage one scans every lifted source along the second axis for each
    (row, output) pair; stage two scans every lifted source along the
    first axis on top of the stage-one minima.  Both stages use strict-<
    updates over increasing lifted indices, so ties resolve to the
    lexicographically smallest lifted pair, the same rule as the
    pairwise scan, at O(n^2 L) cost instead of O(n^2 L^2).
    """
    n = g.shape[0]
    m_lo = -R * n
    m_hi = (R + 1) * n
    t = np.empty((n, n))
    ta2 = np.empty((n, n), dtype=np.int64)
    for i1 in range(n):
        for o2 in range(n):
            best = np.inf
            bm2 = 0
            for m2 in range(m_lo, m_hi):
                v2 = (o2 - m2) * h
                val = g[i1, m2 % n] + (0.5 * v2 * v2 - b2 * v2)
                if val < best:
                    best = val
                    bm2 = m2
            t[i1, o2] = best
            ta2[i1, o2] = bm2
    out = np.empty((n, n))
    arg = np.empty((n, n, 2), dtype=np.int64)
    for o1 in range(n):
        for o2 in range(n):
            best = np.inf
            bm1 = 0
            for m1 in range(m_lo, m_hi):
                v1 = (o1 - m1) * h
                val = t[m1 % n, o2] + (0.5 * v1 * v1 - b1 * v1)
                if val < best:
                    best = val
                    bm1 = m1
            out[o1, o2] = best
            arg[o1, o2, 0] = bm1
            arg[o1, o2, 1] = ta2[bm1 % n, o2]
    return out, arg


@njit(cache=True, nogil=True)
def _brute2d(g, b1, b2, h, R):
    n = g.shape[0]
    m_lo = -R * n
    m_hi = (R + 1) * n
    out = np.empty((n, n))
    arg = np.empty((n, n, 2), dtype=np.int64)
    for o1 in range(n):
        for o2 in range(n):
            best = np.inf
            bm1 = 0
            bm2 = 0
            for m1 in range(m_lo, m_hi):
                v1 = (o1 - m1) * h
                g1 = g[m1 % n]
                for m2 in range(m_lo, m_hi):
                    v2 = (o2 - m2) * h
                    val = g1[m2 % n] + (0.5 * (v1 * v1 + v2 * v2) - (b1 * v1 + b2 * v2))
                    if val < best:
                        best = val
                        bm1 = m1
                        bm2 = m2
            out[o1, o2] = best
            arg[o1, o2, 0] = bm1
            arg[o1, o2, 1] = bm2
    return out, arg


def _as_drift(b, dim: int) -> np.ndarray:
    bv = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if bv.size == 1 and dim == 2:
        bv = np.full(2, bv[0])
    if bv.size != dim:
        raise ValueError(f"drift b must have {dim} components")
    if not np.all(np.isfinite(bv)):
        raise ValueError("drift b must be finite")
    return bv


def minplus_conv_quadratic(g: GridFunction, b, R: int):
    """out(y) = min over lifted grid x of g(x) + |y-x|^2/2 - b.(y-x).

    The minimum runs over source indices together with integer lifts
    covering R periods on each side.  Returns the convolved grid
    function and the argmin map of lifted axis indices (shape (n,) for
    dim 1, (n, n, 2) for dim 2); source index = lifted mod n.
    """
    R = int(R)
    if R < 1:
        raise ValueError("replication R must be at least 1")
    bv = _as_drift(b, g.dim)
    n = g.n
    c = 0.5 / (n * n)  # h^2 / 2
    if g.dim == 1:
        out, arg = _conv1d(g.values, bv[0] * n, c, R)
    else:
        out, arg = _conv2d(g.values, bv[0] * n, bv[1] * n, c, R)
    return GridFunction(dim=g.dim, n=n, values=out), arg


def minplus_conv_quadratic_brute(g: GridFunction, b, R: int):
    """Direct enumeration oracle for minplus_conv_quadratic.

    Scans every lifted source in increasing linear index with strict-<
    updates, so ties resolve to the smallest lifted linear index.
    """
    R = int(R)
    if R < 1:
        raise ValueError("replication R must be at least 1")
    bv = _as_drift(b, g.dim)
    h = g.h
    if g.dim == 1:
        out, arg = _brute1d(g.values, bv[0], h, R)
    else:
        out, arg = _brute2d(g.values, bv[0], bv[1], h, R)
    return GridFunction(dim=g.dim, n=g.n, values=out), arg


def minplus_conv_quadratic_scan(g: GridFunction, b, R: int):
    """Axis-separated enumeration oracle for minplus_conv_quadratic.

    Same strict-< smallest-lifted-index tie rule as
    minplus_conv_quadratic_brute, with the two axes scanned in
    sequence, so two-dimensional inputs cost O(n^2 L) instead of
    O(n^2 L^2).  One-dimensional inputs delegate to the pairwise scan.
    """
    R = int(R)
    if R < 1:
        raise ValueError("replication R must be at least 1")
    bv = _as_drift(b, g.dim)
    h = g.h
    if g.dim == 1:
        out, arg = _brute1d(g.values, bv[0], h, R)
    else:
        out, arg = _scan2d(g.values, bv[0], bv[1], h, R)
    return GridFunction(dim=g.dim, n=g.n, values=out), arg


def replication_bound(g_values: np.ndarray, b) -> int:
    """Periods needed so the convolution covers every minimizing displacement.

    Comparing any minimizer against the candidate x = y - b gives
    |v - b|^2 / 2 <= osc(g), hence |v|_inf <= |b|_inf + sqrt(2 osc(g)).
    """
    osc = float(np.max(g_values)) - float(np.min(g_values))
    b_inf = float(np.max(np.abs(np.atleast_1d(np.asarray(b, dtype=np.float64)))))
    return int(math.ceil(b_inf + math.sqrt(2.0 * max(osc, 0.0)))) + 1


def one_step_action(x, y, j: int, model: ForcingModel, b) -> float:
    """Action of the one-step motion x -> y through the kick at time j.

    min over integer lifts k of |y + k - x|^2/2 - b.(y + k - x), minus
    F_j(x); the per-axis quadratic is minimized over lifts near b.
    """
    from .forcing import eval_F

    d = model.dim
    xv = as_coords(x, d)
    yv = as_coords(y, d)
    bv = _as_drift(b, d)
    total = 0.0
    for a in range(d):
        dy = yv[a] - xv[a]
        k0 = round(bv[a] - dy)
        best = np.inf
        for k in range(k0 - 2, k0 + 3):
            v = dy + k
            val = 0.5 * v * v - bv[a] * v
            if val < best:
                best = val
        total += best
    return total - eval_F(model, j, xv)


@dataclass(frozen=True)
class Orbit:
    """Discrete orbit: positions on the torus and arrival displacements.

    x[i] is the position at time times[0] + i (reduced mod 1); v[i] is
    the unreduced displacement arriving at x[i] from x[i-1].  The first
    entry v[0] is extended through the inverse twist map so that every
    time carries an arrival velocity.
    """

    times: tuple[int, int]
    x: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        t0, t1 = self.times
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(self.x, dtype=np.float64)))
        v = np.ascontiguousarray(np.atleast_2d(np.asarray(self.v, dtype=np.float64)))
        if x.shape != v.shape or x.shape[0] != t1 - t0 + 1:
            raise ValueError("orbit arrays must both have one row per time")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", (int(t0), int(t1)))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def index(self, j: int) -> int:
        t0, t1 = self.times
        if not t0 <= j <= t1:
            raise KeyError(f"time {j} outside orbit window {self.times}")
        return j - t0

    def consistency_residual(self) -> float:
        """max over steps of dist(x_j, x_{j-1} + v_j) on the torus."""
        if len(self) < 2:
            return 0.0
        pred = wrap(self.x[:-1] + self.v[1:])
        diff = np.abs(pred - self.x[1:])
        diff = np.minimum(diff, 1.0 - diff)
        return float(np.max(diff))


@dataclass
class SolveResult:
    """Snapshots of an iterated Lax-Oleinik solve.

    snapshots[j] holds the solution at integer time j.  For backward
    solves argmin_maps[j] maps each grid point at time j to the lifted
    axis indices of its minimizing source at time j-1; for forward
    solves argmin_maps[j] points from time j to time j+1.
    normalization_log[j] records the constant subtracted at time j;
    adding the accumulated constants back reproduces the unnormalized
    solve.
    """

    snapshots: dict[int, GridFunction]
    argmin_maps: dict[int, np.ndarray] | None
    normalization_log: dict[int, float]
    b: np.ndarray
    model: ForcingModel
    direction: str = "backward"

    @property
    def times(self) -> tuple[int, int]:
        ts = sorted(self.snapshots)
        return ts[0], ts[-1]

    def offset(self, j: int) -> float:
        """Total constant subtracted from snapshot j, in solve order."""
        t0, t1 = self.times
        if self.direction == "backward":
            span = range(t0, j + 1)
        else:
            span = range(t1, j - 1, -1)
        total = 0.0
        for i in span:
            total += self.normalization_log.get(i, 0.0)
        return total

    def unnormalized_values(self, j: int) -> np.ndarray:
        return self.snapshots[j].values + self.offset(j)


def backward_step(phi: GridFunction, j: int, model: ForcingModel, b, *, track: bool = False):
    """One backward Lax-Oleinik step from time j to j+1.

    Returns (K phi, argmin map or None); the kick F_j acts on the
    source side of the convolution.
    """
    Fj = grid_F(model, j, phi.n)
    g = GridFunction(phi.dim, phi.n, phi.values - Fj.values)
    R = replication_bound(g.values, b)
    out, arg = minplus_conv_quadratic(g, b, R)
    return out, (arg if track else None)


def forward_step(phi: GridFunction, j: int, model: ForcingModel, b, *, track: bool = False):
    """One forward (adjoint) step producing the solution at time j from time j+1.

    K-check phi(x) = F_j(x) + sup_v [phi(x+v) - |v|^2/2 + b.v], realized
    as a negated min-plus convolution of -phi with drift -b.
    """
    Fj = grid_F(model, j, phi.n)
    bv = _as_drift(b, phi.dim)
    neg = GridFunction(phi.dim, phi.n, -phi.values)
    R = replication_bound(neg.values, bv)
    conv, arg = minplus_conv_quadratic(neg, -bv, R)
    out = GridFunction(phi.dim, phi.n, Fj.values - conv.values)
    return out, (arg if track else None)


def _normalized(phi: GridFunction, enabled: bool):
    if not enabled:
        return phi, 0.0
    c = float(np.min(phi.values))
    return GridFunction(phi.dim, phi.n, phi.values - c), c


def backward_solve(phi: GridFunction, m: int, n_time: int, model: ForcingModel, b, *,
                   track_argmin: bool = False, normalize: bool = False) -> SolveResult:
    """Iterate backward steps, producing K_{m,j} phi for every j in [m, n_time]."""
    if n_time < m:
        raise ValueError("time window must satisfy m <= n")
    bv = _as_drift(b, phi.dim)
    snaps: dict[int, GridFunction] = {}
    maps: dict[int, np.ndarray] | None = {} if track_argmin else None
    log: dict[int, float] = {}
    cur, log[m] = _normalized(phi, normalize)
    snaps[m] = cur
    for j in range(m, n_time):
        nxt, arg = backward_step(cur, j, model, bv, track=track_argmin)
        nxt, log[j + 1] = _normalized(nxt, normalize)
        snaps[j + 1] = nxt
        if track_argmin:
            maps[j + 1] = arg
        cur = nxt
    return SolveResult(snaps, maps, log, bv, model, direction="backward")


def forward_solve(phi: GridFunction, m: int, n_time: int, model: ForcingModel, b, *,
                  track_argmax: bool = False, normalize: bool = False) -> SolveResult:
    """Iterate forward steps downward in time, from phi at time n_time to time m."""
    if n_time < m:
        raise ValueError("time window must satisfy m <= n")
    bv = _as_drift(b, phi.dim)
    snaps: dict[int, GridFunction] = {}
    maps: dict[int, np.ndarray] | None = {} if track_argmax else None
    log: dict[int, float] = {}
    cur, log[n_time] = _normalized(phi, normalize)
    snaps[n_time] = cur
    for j in range(n_time - 1, m - 1, -1):
        prv, arg = forward_step(cur, j, model, bv, track=track_argmax)
        prv, log[j] = _normalized(prv, normalize)
        snaps[j] = prv
        if track_argmax:
            maps[j] = arg
        cur = prv
    return SolveResult(snaps, maps, log, bv, model, direction="forward")


def _grid_point(idx: tuple[int, ...], n: int) -> np.ndarray:
    return np.asarray(idx, dtype=np.float64) / n


def backtrack_minimizer(result: SolveResult, y) -> Orbit:
    """Walk the argmin maps from the final time down to the initial time.

    y is snapped to the nearest grid point at the final time.  Returns
    the minimizing orbit with unreduced per-step displacements; the
    arrival displacement at the initial time comes from the inverse
    twist-map extension v_m = v_{m+1} + grad F_m(x_m).
    """
    if result.direction != "backward" or result.argmin_maps is None:
        raise ValueError("backtracking needs a backward solve with tracked argmin maps")
    t0, t1 = result.times
    model = result.model
    some = result.snapshots[t1]
    n, dim = some.n, some.dim
    idx = nearest_index(n, as_coords(y, dim))
    xs = [_grid_point(idx, n)]
    vs = []
    for t in range(t1, t0, -1):
        amap = result.argmin_maps[t]
        if dim == 1:
            m = int(amap[idx[0]])
            v = np.array([(idx[0] - m) / n])
            idx = (m % n,)
        else:
            m1, m2 = int(amap[idx[0], idx[1], 0]), int(amap[idx[0], idx[1], 1])
            v = np.array([(idx[0] - m1) / n, (idx[1] - m2) / n])
            idx = (m1 % n, m2 % n)
        xs.append(_grid_point(idx, n))
        vs.append(v)
    xs.reverse()
    vs.reverse()
    if vs:
        v0 = vs[0] + eval_gradF(model, t0, xs[0])
    else:
        v0 = np.zeros(dim)
    vs.insert(0, v0)
    return Orbit((t0, t1), np.asarray(xs), np.asarray(vs))
