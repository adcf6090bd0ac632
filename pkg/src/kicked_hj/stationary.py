"""Stationary solutions of the kicked dynamics and their minimizing orbits.

psi_minus is the pullback limit of the backward semigroup started from 0
deep in the past; psi_plus is the mirror pushforward limit from the far
future.  Their difference Q controls where global minimizers live: the
argmin of Q(., j) traces the global minimizing orbit, and the finite-time
variant Q^N built from a backward solve is a discrete Lyapunov function
for backtracked minimizers.

Stored snapshots are normalized to grid minimum 0 at each time.  Because
cross-time comparisons (Q^N monotonicity/constancy) are not invariant to
per-time constants, the pair also records per-time offsets that restore
the semigroup-consistent fields produced by the actual runs.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .forcing import ForcingModel, eval_gradF
from .grid import GridFunction, as_coords, min_lift, nearest_index
from .lax import Orbit, SolveResult, backward_solve, forward_solve

__all__ = [
    "StationaryPair",
    "compute_psi_minus",
    "compute_psi_plus",
    "compute_stationary_pair",
    "global_minimizer",
    "guiding_orbit",
    "nondegeneracy_estimate",
    "q_consistent",
    "q_function",
    "quadratic_bounds",
]


@dataclass
class StationaryPair:
    """Backward/forward stationary solutions over a common time window.

    psi_minus[j] and psi_plus[j] are min-0 normalized snapshots for every
    j in the window; minus_offsets/plus_offsets restore the
    semigroup-consistent values (snapshot + offset).  residual is the
    largest star-seminorm change of any snapshot when the burn-in that
    produced the fields is halved, i.e. the self-reported convergence
    error of the pullback/pushforward.
    """

    psi_minus: dict[int, GridFunction]
    psi_plus: dict[int, GridFunction]
    window: tuple[int, int]
    burn_in: int
    residual: float
    n: int
    minus_offsets: dict[int, float] = field(repr=False, default_factory=dict)
    plus_offsets: dict[int, float] = field(repr=False, default_factory=dict)
    minus_argmin_maps: dict[int, np.ndarray] | None = field(repr=False, default=None)
    plus_argmax_maps: dict[int, np.ndarray] | None = field(repr=False, default=None)


def _zero(model: ForcingModel, n: int) -> GridFunction:
    return GridFunction.constant(model.dim, n, 0.0)


def _pullback(model: ForcingModel, n: int, b, window, burn_in: int, track: bool):
    """Backward pullback of 0 from window[0] - burn_in; normalized snapshots plus offsets."""
    lo, hi = window
    burn = backward_solve(_zero(model, n), lo - burn_in, lo, model, b, normalize=True)
    run = backward_solve(burn.snapshots[lo], lo, hi, model, b,
                         track_argmin=track, normalize=True)
    base = burn.offset(lo)
    snaps = {j: run.snapshots[j] for j in range(lo, hi + 1)}
    offsets = {j: base + run.offset(j) for j in range(lo, hi + 1)}
    return snaps, offsets, (run.argmin_maps if track else None)


def _pushforward(model: ForcingModel, n: int, b, window, burn_in: int, track: bool):
    """Forward pushforward of 0 from window[1] + burn_in; normalized snapshots plus offsets."""
    lo, hi = window
    burn = forward_solve(_zero(model, n), hi, hi + burn_in, model, b, normalize=True)
    run = forward_solve(burn.snapshots[hi], lo, hi, model, b,
                        track_argmax=track, normalize=True)
    base = burn.offset(hi)
    snaps = {j: run.snapshots[j] for j in range(lo, hi + 1)}
    offsets = {j: base + run.offset(j) for j in range(lo, hi + 1)}
    return snaps, offsets, (run.argmin_maps if track else None)


def compute_psi_minus(model: ForcingModel, n: int, b, window, burn_in: int) -> dict[int, GridFunction]:
    """Backward stationary approximation: pullback of 0 over the window, min-0 normalized."""
    _check_window(window)
    snaps, _, _ = _pullback(model, n, b, window, burn_in, track=False)
    return snaps


def compute_psi_plus(model: ForcingModel, n: int, b, window, burn_in: int) -> dict[int, GridFunction]:
    """Forward stationary approximation: pushforward of 0 over the window, min-0 normalized."""
    _check_window(window)
    snaps, _, _ = _pushforward(model, n, b, window, burn_in, track=False)
    return snaps


def _check_window(window):
    lo, hi = window
    if hi < lo:
        raise ValueError("window must satisfy lo <= hi")


def _residual(a: dict[int, GridFunction], b: dict[int, GridFunction]) -> float:
    worst = 0.0
    for j in a:
        diff = a[j].values - b[j].values
        worst = max(worst, 0.5 * (float(np.max(diff)) - float(np.min(diff))))
    return worst


def compute_stationary_pair(model: ForcingModel, n: int, b, window, burn_in: int | None = None,
                            *, tol: float = 1e-9, cap_factor: int = 64,
                            track: bool = True) -> StationaryPair:
    """Build both stationary solutions with an automatically deepened burn-in.

    Starting from burn_in (default 4x the window length) the burn-in is
    doubled until the star-seminorm residual between consecutive depths
    drops below tol or the depth reaches cap_factor times the window
    length.  The returned fields come from the deepest run.
    """
    _check_window(window)
    lo, hi = window
    wl = hi - lo + 1
    B = int(burn_in) if burn_in is not None else 4 * wl
    B = max(B, 1)
    cap = max(cap_factor * wl, 2 * B)
    prev_minus, _, _ = _pullback(model, n, b, window, B, track=False)
    prev_plus, _, _ = _pushforward(model, n, b, window, B, track=False)
    while True:
        minus, m_off, m_maps = _pullback(model, n, b, window, 2 * B, track=track)
        plus, p_off, p_maps = _pushforward(model, n, b, window, 2 * B, track=track)
        residual = max(_residual(prev_minus, minus), _residual(prev_plus, plus))
        if residual < tol or 2 * B >= cap:
            return StationaryPair(
                psi_minus=minus, psi_plus=plus, window=(lo, hi), burn_in=2 * B,
                residual=residual, n=n, minus_offsets=m_off, plus_offsets=p_off,
                minus_argmin_maps=m_maps, plus_argmax_maps=p_maps)
        prev_minus, prev_plus = minus, plus
        B *= 2


def q_function(pair: StationaryPair, j: int) -> GridFunction:
    """Q(., j) = psi_minus - psi_plus at time j (per-time constant arbitrary)."""
    pm = pair.psi_minus[j]
    pp = pair.psi_plus[j]
    return GridFunction(pm.dim, pm.n, pm.values - pp.values)


def q_consistent(pair: StationaryPair, j: int) -> np.ndarray:
    """Q(., j) with the semigroup-consistent constants, comparable across times."""
    return (pair.psi_minus[j].values + pair.minus_offsets[j]) \
        - (pair.psi_plus[j].values + pair.plus_offsets[j])


def _argmin_index(values: np.ndarray, degeneracy_tol: float = 1e-12):
    flat = int(np.argmin(values))
    vmin = values.reshape(-1)[flat]
    degenerate = int(np.sum(values <= vmin + degeneracy_tol)) > 1
    if values.ndim == 1:
        return (flat,), degenerate
    return (flat // values.shape[1], flat % values.shape[1]), degenerate


def global_minimizer(pair: StationaryPair, model: ForcingModel, b) -> Orbit:
    """Orbit of per-time argmins of Q with velocities from the pullback argmin maps.

    A degenerate (non-unique within 1e-12) argmin triggers a warning, not
    an error.  v_j is the displacement arriving at x_j along the backward
    minimizer, read off the psi_minus argmin map; at the window's first
    time it is extended through the inverse twist map.
    """
    if pair.minus_argmin_maps is None:
        raise ValueError("stationary pair was built without argmin tracking")
    lo, hi = pair.window
    n = pair.n
    dim = pair.psi_minus[lo].dim
    xs = np.empty((hi - lo + 1, dim))
    vs = np.empty((hi - lo + 1, dim))
    idxs = []
    for j in range(lo, hi + 1):
        idx, degenerate = _argmin_index(q_function(pair, j).values)
        if degenerate:
            warnings.warn(f"argmin of Q at time {j} is degenerate to 1e-12", RuntimeWarning)
        idxs.append(idx)
        xs[j - lo] = np.asarray(idx, dtype=np.float64) / n
    for j in range(lo + 1, hi + 1):
        amap = pair.minus_argmin_maps[j]
        idx = idxs[j - lo]
        if dim == 1:
            m = int(amap[idx[0]])
            vs[j - lo] = (idx[0] - m) / n
        else:
            m1 = int(amap[idx[0], idx[1], 0])
            m2 = int(amap[idx[0], idx[1], 1])
            vs[j - lo] = ((idx[0] - m1) / n, (idx[1] - m2) / n)
    if hi > lo:
        vs[0] = vs[1] + eval_gradF(model, lo, xs[0])
    else:
        vs[0] = 0.0
    return Orbit((lo, hi), xs, vs)


def guiding_orbit(result: SolveResult, pair: StationaryPair, model: ForcingModel, b):
    """Forward minimizer from the argmin of Q^N at the solve's initial time.

    Q^N(., j) = psi^N(., j) - psi_plus(., j) built from the backward solve
    in `result` and the consistent psi_plus field.  Returns the orbit and
    the drift max-min of Q^N along it, which the finite-time theory says
    is constant.
    """
    if pair.plus_argmax_maps is None:
        raise ValueError("stationary pair was built without argmax tracking")
    t0, t1 = result.times
    lo, hi = pair.window
    if t0 < lo or t1 > hi:
        raise ValueError("solve window must lie inside the stationary window")
    n = pair.n
    dim = pair.psi_plus[t0].dim

    def qn_at(j: int, idx) -> float:
        sn = result.unnormalized_values(j)
        pp = pair.psi_plus[j].values + pair.plus_offsets[j]
        return float(sn[idx] - pp[idx])

    q0 = result.unnormalized_values(t0) - (pair.psi_plus[t0].values + pair.plus_offsets[t0])
    idx, _ = _argmin_index(q0)
    xs = [np.asarray(idx, dtype=np.float64) / n]
    vs = []
    qvals = [qn_at(t0, idx)]
    for j in range(t0, t1):
        amap = pair.plus_argmax_maps[j]
        if dim == 1:
            m = int(amap[idx[0]])
            vs.append(np.array([(m - idx[0]) / n]))
            idx = (m % n,)
        else:
            m1 = int(amap[idx[0], idx[1], 0])
            m2 = int(amap[idx[0], idx[1], 1])
            vs.append(np.array([(m1 - idx[0]) / n, (m2 - idx[1]) / n]))
            idx = (m1 % n, m2 % n)
        xs.append(np.asarray(idx, dtype=np.float64) / n)
        qvals.append(qn_at(j + 1, idx))
    if vs:
        v0 = vs[0] + eval_gradF(model, t0, xs[0])
    else:
        v0 = np.zeros(dim)
    vs.insert(0, v0)
    drift = float(np.max(qvals) - np.min(qvals))
    return Orbit((t0, t1), np.asarray(xs), np.asarray(vs)), drift


def _ratio_field(pair: StationaryPair, orbit: Orbit, radius_max: float, t_star: int):
    Q = q_function(pair, t_star).values
    n = pair.n
    dim = Q.ndim
    x0 = orbit.x[orbit.index(t_star)]
    i0 = nearest_index(n, x0)
    ax = np.arange(n) / n
    if dim == 1:
        d = ax - x0[0]
        d = np.where(np.mod(d, 1.0) <= 0.5, np.mod(d, 1.0), np.mod(d, 1.0) - 1.0)
        dist = np.abs(d)
    else:
        d1 = np.mod(ax - x0[0], 1.0)
        d1 = np.where(d1 <= 0.5, d1, d1 - 1.0)
        d2 = np.mod(ax - x0[1], 1.0)
        d2 = np.where(d2 <= 0.5, d2, d2 - 1.0)
        dist = np.sqrt(d1[:, None] ** 2 + d2[None, :] ** 2)
    mask = (dist > 0) & (dist <= radius_max)
    gaps = Q - Q[i0]
    return gaps[mask] / dist[mask] ** 2


def _common_time(pair: StationaryPair, orbit: Orbit) -> int:
    lo = max(pair.window[0], orbit.times[0])
    hi = min(pair.window[1], orbit.times[1])
    if hi < lo:
        raise ValueError("pair window and orbit do not overlap")
    return 0 if lo <= 0 <= hi else lo


def nondegeneracy_estimate(pair: StationaryPair, orbit: Orbit, radius_max: float = 0.1) -> float:
    """Fitted quadratic-growth constant of Q around the minimizing point.

    min over grid points with 0 < |x - x_0| <= radius_max (torus metric)
    of (Q(x) - Q(x_0)) / |x - x_0|^2, evaluated at time 0 when the window
    contains it.  Positive values certify nondegenerate pinching.
    """
    ratios = _ratio_field(pair, orbit, radius_max, _common_time(pair, orbit))
    return float(np.min(ratios))


def quadratic_bounds(pair: StationaryPair, orbit: Orbit, radius_max: float = 0.1):
    """Two-sided pinching constants (a, K): a r^2 <= Q - Q(x_0) <= K r^2 locally."""
    ratios = _ratio_field(pair, orbit, radius_max, _common_time(pair, orbit))
    return float(np.min(ratios)), float(np.max(ratios))
