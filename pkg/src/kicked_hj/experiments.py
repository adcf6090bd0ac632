"""Measurement harness: convergence-rate runs, the consolidated property
suite, and grid-refinement studies.

The headline experiment solves backward from a family of initial
conditions over growing horizons N and fits the decay of the star
seminorm distance to a deeply burned-in reference field.  Everything is
deterministic given (config, seed): coefficient draws are counter-based,
initial conditions come from a seeded generator, and reductions run in a
fixed order even when the error table is filled by a thread pool.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import lyapunov_exponents, velocity_lipschitz_bound, LyapunovResult
from .forcing import ForcingModel, grid_F
from .grid import GridFunction, semiconcavity_modulus, torus_distance
from .lax import backtrack_minimizer, backward_solve, forward_solve
from .stationary import (
    StationaryPair,
    compute_stationary_pair,
    global_minimizer,
    q_consistent,
    quadratic_bounds,
)

__all__ = [
    "ConvergenceReport",
    "PropertyRow",
    "RefinementRow",
    "canonical_digest",
    "convergence_rate",
    "initial_conditions",
    "invariant_suite",
    "lyapunov_run",
    "refinement_study",
]


def canonical_digest(payload) -> str:
    """Stable 16-hex-digit digest of a JSON-serializable payload."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def model_payload(model: ForcingModel, b, n: int) -> dict:
    """Canonical description of a run setup, suitable for canonical_digest."""
    bv = np.atleast_1d(np.asarray(b, dtype=np.float64))
    return {
        "dimension": model.dim,
        "grid_points": int(n),
        "b": [float(c) for c in bv],
        "basis": [
            {"kind": p.kind, "wavevector": list(p.wavevector), "amplitude": p.amplitude}
            for p in model.basis
        ],
        "distribution": {"kind": model.dist.kind, "params": list(model.dist.params)},
        "seed": model.seed,
        "time_offset": model.time_offset,
    }


# --------------------------------------------------------------------------
# initial conditions


def _trig_fn(modes, coeffs):
    def fn(*coords):
        out = np.zeros_like(coords[0])
        for kv, (a, c) in zip(modes, coeffs):
            phase = np.zeros_like(coords[0])
            for axis, k in enumerate(kv):
                phase = phase + 2.0 * math.pi * k * coords[axis]
            scale = 0.25 / (1.0 + sum(abs(k) for k in kv))
            out = out + scale * (a * np.cos(phase) + c * np.sin(phase))
        return out

    return fn


def _cone_fn(centers, offsets, slopes):
    def fn(*coords):
        best = None
        for center, off, slope in zip(centers, offsets, slopes):
            sq = np.zeros_like(coords[0])
            for axis, c in enumerate(center):
                d = np.mod(coords[axis] - c, 1.0)
                d = np.where(d <= 0.5, d, d - 1.0)
                sq = sq + d * d
            cand = off + slope * np.sqrt(sq)
            best = cand if best is None else np.minimum(best, cand)
        return best

    return fn


def initial_conditions(dim: int, count: int, seed: int):
    """Deterministic family [(id, fn)]: one zero, one trig polynomial, then
    piecewise-linear cone minima.  fn is vectorized over coordinate arrays,
    matching GridFunction.sample, so the same family evaluates on any grid."""
    if count < 3:
        raise ValueError("need at least 3 initial conditions")
    rng = np.random.default_rng(int(seed))
    if dim == 1:
        modes = [(1,), (2,), (3,)]
    else:
        modes = [(1, 0), (0, 1), (1, 1), (2, 1)]
    coeffs = rng.normal(size=(len(modes), 2))
    fns = [
        ("phi0_zero", lambda *coords: np.zeros_like(coords[0])),
        ("phi1_trig", _trig_fn(modes, coeffs)),
    ]
    while len(fns) < count:
        centers = rng.random((3, dim))
        offsets = 0.2 * rng.random(3)
        slopes = 0.5 + rng.random(3)
        fns.append((f"phi{len(fns)}_cone", _cone_fn(centers, offsets, slopes)))
    return fns


# --------------------------------------------------------------------------
# convergence rate


@dataclass
class ConvergenceReport:
    """Measured decay of ||K_{-N,0} phi - psi_minus_ref||_* against N.

    errors maps each initial-condition id to its error sequence over
    N_values; sup_errors is the per-N max over initial conditions, the
    quantity the rate is fitted on.  The fit uses only points above
    floor_estimate: the level where runs at n and n/2 stop agreeing,
    clamped from below at the fp-noise scale of coalesced grid solves.
    per_phi_lambda carries the per-initial-condition rates; lyapunov the
    exponents along the global minimizer for the same realization.
    """

    N_values: list[int]
    errors: dict[str, list[float]]
    sup_errors: list[float]
    lambda_fit: float
    r_squared: float
    fit_range: tuple[int, int]
    floor_estimate: float
    lyapunov: LyapunovResult | None
    config_digest: str
    flags: tuple[str, ...] = ()
    per_phi_lambda: dict[str, float] = field(default_factory=dict)
    poly_r_squared: float = float("nan")
    coarse_sup_errors: list[float] | None = None

    def __post_init__(self):
        for pid, es in self.errors.items():
            if any(e < 0 for e in es):
                raise ValueError(f"negative error for {pid}")
        if not (math.isnan(self.r_squared) or 0.0 <= self.r_squared <= 1.0):
            raise ValueError("r_squared out of [0, 1]")


def _line_fit(xs, ys):
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(np.dot(resid, resid))
    dev = y - y.mean()
    ss_tot = float(np.dot(dev, dev))
    if ss_tot <= 0.0:
        r2 = 1.0 if ss_res <= 1e-28 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(coef[0]), float(coef[1]), r2


def _reference(model: ForcingModel, n: int, b, burn: int) -> np.ndarray:
    zero = GridFunction.constant(model.dim, n, 0.0)
    run = backward_solve(zero, -burn, 0, model, b, normalize=True)
    return run.snapshots[0].values


def _seminorm_gap(a: np.ndarray, ref: np.ndarray) -> float:
    diff = a - ref
    return 0.5 * (float(np.max(diff)) - float(np.min(diff)))


def _error_table(model, b, n, N_values, fns, ref, threads):
    def cell(fn, N):
        phi = GridFunction.sample(model.dim, n, fn)
        run = backward_solve(phi, -N, 0, model, b, normalize=True)
        return _seminorm_gap(run.snapshots[0].values, ref)

    table = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {
                (pid, N): pool.submit(cell, fn, N)
                for pid, fn in fns
                for N in N_values
            }
            for key, fut in futs.items():
                table[key] = fut.result()
    else:
        for pid, fn in fns:
            for N in N_values:
                table[(pid, N)] = cell(fn, N)
    return {pid: [table[(pid, N)] for N in N_values] for pid, fn in fns}


def _floor_from_curves(N_values, fine, coarse) -> float:
    """Error level where the n and n/2 sup-curves diverge (relative gap > 1/2)."""
    for e1, e2 in zip(fine, coarse):
        m = max(e1, e2)
        if m > 0.0 and abs(e1 - e2) > 0.5 * m:
            return e1
    return 0.0


# Fields that coalesce on the grid differ by accumulated rounding only;
# anything this close to machine precision is noise, not decay.
_EPS_FLOOR = 64.0 * np.finfo(np.float64).eps


def _fit_block(N_values, errors, floor):
    pts = [(N, e) for N, e in zip(N_values, errors) if e > floor]
    if len(pts) < 2:
        return float("nan"), float("nan"), None, float("nan"), len(pts)
    ns = [p[0] for p in pts]
    logs = [math.log(p[1]) for p in pts]
    slope, _, r2 = _line_fit(ns, logs)
    slope_p, _, r2_poly = _line_fit([math.log(m) for m in ns], logs)
    return -slope, r2, (ns[0], ns[-1]), r2_poly, len(pts)


def lyapunov_run(model: ForcingModel, n: int, b, window: int):
    """Stationary pair, global minimizer, and exponents over a centered window."""
    lo = -(window // 2)
    hi = window - window // 2
    pair = compute_stationary_pair(model, n, b, (lo, hi), burn_in=4 * window)
    orbit = global_minimizer(pair, model, b)
    return pair, orbit, lyapunov_exponents(orbit, model)


def convergence_rate(model: ForcingModel, b, n: int, N_values, num_initials: int,
                     seed: int, *, threads: int = 1, include_lyapunov: bool = True,
                     lyapunov_window: int = 2000, floor_grid: int | None = None,
                     config_digest: str | None = None) -> ConvergenceReport:
    """Measure the decay rate of backward solves toward the stationary field.

    For each initial condition phi_s and horizon N the error is
    ||K_{-N,0} phi_s - ref||_* with ref the pullback of 0 with burn-in
    2 max(N).  The rate is the slope of log sup_errors vs N over points
    above the discretization floor, estimated by repeating the run at
    floor_grid (default n // 2) and locating where the curves diverge.
    A log-log refit flags runs whose decay is closer to polynomial.
    """
    Ns = sorted({int(N) for N in N_values})
    if not Ns or Ns[0] < 1:
        raise ValueError("N_values must be positive integers")
    if num_initials < 3:
        raise ValueError("num_initials must be at least 3")
    threads = max(1, int(threads))
    maxN = Ns[-1]
    fns = initial_conditions(model.dim, num_initials, seed)
    if config_digest is None:
        payload = {"setup": model_payload(model, b, n), "N_values": Ns,
                   "num_initials": int(num_initials), "experiment_seed": int(seed)}
        config_digest = canonical_digest(payload)

    ref = _reference(model, n, b, 2 * maxN)
    errors = _error_table(model, b, n, Ns, fns, ref, threads)
    sup_errors = [max(errors[pid][i] for pid, _ in fns) for i in range(len(Ns))]

    n2 = floor_grid if floor_grid is not None else n // 2
    coarse_sup = None
    floor = _EPS_FLOOR
    if n2 >= 16 and n2 != n:
        ref2 = _reference(model, n2, b, 2 * maxN)
        errors2 = _error_table(model, b, n2, Ns, fns, ref2, threads)
        coarse_sup = [max(errors2[pid][i] for pid, _ in fns) for i in range(len(Ns))]
        floor = max(floor, _floor_from_curves(Ns, sup_errors, coarse_sup))

    lam, r2, fit_range, r2_poly, npts = _fit_block(Ns, sup_errors, floor)
    flags = []
    if npts < 4:
        flags.append("insufficient-decay-window")
    # short exponential windows can lose an r-squared race to the log-log
    # refit by a hair; only a clear margin marks polynomial decay
    if npts >= 3 and r2_poly > r2 + 0.02:
        flags.append("non-exponential")
    per_phi = {}
    for pid, _ in fns:
        lam_p, _, _, _, k = _fit_block(Ns, errors[pid], floor)
        if k >= 2:
            per_phi[pid] = lam_p

    lya = None
    if include_lyapunov:
        _, _, lya = lyapunov_run(model, n, b, lyapunov_window)

    return ConvergenceReport(
        N_values=Ns, errors=errors, sup_errors=sup_errors,
        lambda_fit=lam, r_squared=r2,
        fit_range=fit_range if fit_range is not None else (0, 0),
        floor_estimate=floor, lyapunov=lya, config_digest=config_digest,
        flags=tuple(flags), per_phi_lambda=per_phi, poly_r_squared=r2_poly,
        coarse_sup_errors=coarse_sup)


# --------------------------------------------------------------------------
# invariant suite


@dataclass(frozen=True)
class PropertyRow:
    """One line of the pass/fail table: PASS iff max_violation <= tolerance."""

    name: str
    trials: int
    max_violation: float
    tolerance: float

    @property
    def status(self) -> str:
        return "PASS" if self.max_violation <= self.tolerance else "FAIL"


def _random_phi(rng, dim, n):
    if dim == 1:
        def fn(x):
            out = np.zeros_like(x)
            for k in (1, 2, 3):
                a, c = rng.normal(size=2) / (2.0 * k)
                out += a * np.cos(2 * math.pi * k * x) + c * np.sin(2 * math.pi * k * x)
            return out
    else:
        def fn(x1, x2):
            out = np.zeros_like(x1)
            for k1, k2 in ((1, 0), (0, 1), (1, 1)):
                a, c = rng.normal(size=2) / 2.0
                ph = 2 * math.pi * (k1 * x1 + k2 * x2)
                out += a * np.cos(ph) + c * np.sin(ph)
            return out
    return GridFunction.sample(dim, n, fn)


def _default_solve(phi, m, t, model, b):
    return backward_solve(phi, m, t, model, b)


def _row_contraction(model, b, n, rng, trials, steps=10):
    worst = -math.inf
    for _ in range(trials):
        f1 = _random_phi(rng, model.dim, n)
        f2 = _random_phi(rng, model.dim, n)
        r1 = backward_solve(f1, -steps, 0, model, b)
        r2 = backward_solve(f2, -steps, 0, model, b)
        gaps = [_seminorm_gap(r1.snapshots[j].values, r2.snapshots[j].values)
                for j in range(-steps, 1)]
        # data sits at -steps; the gap must shrink as the solution evolves
        worst = max(worst, max(gaps[i + 1] - gaps[i] for i in range(steps)))
    return PropertyRow("contraction", trials, worst, 1e-12)


def _row_semigroup(model, b, n, rng, trials, solve_fn):
    worst = 0.0
    for _ in range(trials):
        phi = _random_phi(rng, model.dim, n)
        s = int(rng.integers(-8, 9))
        t = s + int(rng.integers(1, 16))
        u = t + int(rng.integers(1, 16))
        whole = solve_fn(phi, s, u, model, b)
        first = solve_fn(phi, s, t, model, b)
        second = solve_fn(first.snapshots[t], t, u, model, b)
        gap = float(np.max(np.abs(whole.snapshots[u].values - second.snapshots[u].values)))
        worst = max(worst, gap)
    return PropertyRow("semigroup", trials, worst, 1e-10)


def _row_monotonicity(model, b, n, rng, trials, steps=5):
    worst = -math.inf
    for _ in range(trials):
        f1 = _random_phi(rng, model.dim, n)
        bump = np.abs(_random_phi(rng, model.dim, n).values)
        f2 = GridFunction(f1.dim, f1.n, f1.values + bump)
        r1 = backward_solve(f1, -steps, 0, model, b)
        r2 = backward_solve(f2, -steps, 0, model, b)
        worst = max(worst, float(np.max(r1.snapshots[0].values
                                        - r2.snapshots[0].values)))
    return PropertyRow("monotonicity", trials, worst, 1e-12)


def _row_equivariance(model, b, n, rng, trials, steps=5):
    worst = 0.0
    for _ in range(trials):
        phi = _random_phi(rng, model.dim, n)
        c = float(rng.normal() * 10.0)
        shifted = GridFunction(phi.dim, phi.n, phi.values + c)
        r1 = backward_solve(phi, -steps, 0, model, b)
        r2 = backward_solve(shifted, -steps, 0, model, b)
        gap = float(np.max(np.abs(r2.snapshots[0].values
                                  - r1.snapshots[0].values - c)))
        worst = max(worst, gap)
    return PropertyRow("constant_equivariance", trials, worst, 1e-12)


def _row_forward_backward(model, b, n, rng, trials):
    worst = -math.inf
    for _ in range(trials):
        phi = _random_phi(rng, model.dim, n)
        k = int(rng.integers(1, 7))
        back = backward_solve(phi, -k, 0, model, b)
        forth = forward_solve(back.snapshots[0], -k, 0, model, b)
        worst = max(worst, float(np.max(forth.snapshots[-k].values - phi.values)))
    return PropertyRow("forward_backward", trials, worst, 1e-12)


def _row_semiconcavity(model, b, n, rng, trials):
    worst = -math.inf
    for _ in range(trials):
        phi = _random_phi(rng, model.dim, n)
        k = int(rng.integers(1, 4))
        run = backward_solve(phi, -k, 0, model, b)
        worst = max(worst, semiconcavity_modulus(run.snapshots[0]))
    return PropertyRow("semiconcavity", trials, worst, 2.0 + 10.0 / n)


def _hessian_sup(model, window, n=512) -> float:
    worst = 0.0
    for j in range(window[0], window[1] + 1):
        f = grid_F(model, j, n)
        neg = GridFunction(f.dim, f.n, -f.values)
        worst = max(worst, semiconcavity_modulus(f), semiconcavity_modulus(neg))
    return worst


def _row_graph_lipschitz(model, b, n, rng, trials, steps=12):
    phi = _random_phi(rng, model.dim, n)
    run = backward_solve(phi, -steps, 0, model, b, track_argmin=True)
    khat = max(velocity_lipschitz_bound(model, j) for j in range(-steps, 1))
    slack = (2.0 + _hessian_sup(model, (-steps, 0))) / n
    worst = -math.inf
    for _ in range(trials):
        y1 = rng.random(model.dim)
        y2 = rng.random(model.dim)
        o1 = backtrack_minimizer(run, y1)
        o2 = backtrack_minimizer(run, y2)
        # skip the first node: its velocity is an inverse-map extension
        for i in range(1, len(o1)):
            dx = torus_distance(o1.x[i], o2.x[i])
            dv = float(np.linalg.norm(o1.v[i] - o2.v[i]))
            worst = max(worst, dv - khat * dx)
    return PropertyRow("graph_lipschitz", trials, worst, slack)


def _row_stationarity(pair: StationaryPair, model, b, trials):
    lo, hi = pair.window
    fresh = backward_solve(pair.psi_minus[lo], lo, hi, model, b)
    worst = 0.0
    count = 0
    for j in range(lo, hi + 1):
        gap = _seminorm_gap(fresh.snapshots[j].values, pair.psi_minus[j].values)
        worst = max(worst, gap)
        count += 1
    return PropertyRow("stationarity", count, worst, 1e-10)


def _qn_values(run, pair, orbit):
    out = []
    for i, j in enumerate(range(orbit.times[0], orbit.times[1] + 1)):
        idx = tuple(np.round(orbit.x[i] * pair.n).astype(int) % pair.n)
        sn = run.unnormalized_values(j)
        pp = pair.psi_plus[j].values + pair.plus_offsets[j]
        out.append(float(sn[idx] - pp[idx]))
    return out


def _row_qn_monotonicity(pair, model, b, rng, trials):
    lo, hi = pair.window
    phi = _random_phi(rng, model.dim, pair.n)
    run = backward_solve(phi, lo, hi, model, b, track_argmin=True)
    worst = -math.inf
    for _ in range(trials):
        orbit = backtrack_minimizer(run, rng.random(model.dim))
        q = _qn_values(run, pair, orbit)
        worst = max(worst, max(q[i] - q[i + 1] for i in range(len(q) - 1)))
    return PropertyRow("qn_monotonicity", trials, worst, 1e-10)


def _row_qinf_monotonicity(pair, model, b, rng, trials):
    lo, hi = pair.window
    xq = {j: q_consistent(pair, j) for j in range(lo, hi + 1)}
    mins = {j: float(np.min(xq[j])) for j in xq}
    run_like = _MinusView(pair, model)
    worst = -math.inf
    for _ in range(trials):
        orbit = backtrack_minimizer(run_like, rng.random(model.dim))
        gaps = []
        for i, j in enumerate(range(lo, hi + 1)):
            idx = tuple(np.round(orbit.x[i] * pair.n).astype(int) % pair.n)
            gaps.append(xq[j][idx] - mins[j])
        worst = max(worst, max(gaps[i] - gaps[i + 1] for i in range(len(gaps) - 1)))
    return PropertyRow("qinf_monotonicity", trials, worst, 1e-8 + 4.0 * pair.residual)


class _MinusView:
    """Adapter exposing a stationary psi_minus field like a tracked solve."""

    def __init__(self, pair: StationaryPair, model: ForcingModel):
        if pair.minus_argmin_maps is None:
            raise ValueError("pair lacks argmin tracking")
        self.snapshots = pair.psi_minus
        self.argmin_maps = pair.minus_argmin_maps
        self.direction = "backward"
        self.model = model
        self._window = pair.window

    @property
    def times(self):
        return self._window


def _row_pinching(pair, model, b, trials):
    orbit = global_minimizer(pair, model, b)
    a_hat, _ = quadratic_bounds(pair, orbit, radius_max=0.1)
    return PropertyRow("pinching", 1, -a_hat, 0.0)


def invariant_suite(model: ForcingModel, b, n: int, seed: int, trials: int,
                    *, solve_fn=None) -> list[PropertyRow]:
    """Run every structural property `trials` times and tabulate violations.

    solve_fn(phi, s, t, model, b) -> SolveResult is the operator under
    test for the composition check; substituting a corrupted solver is
    the suite's negative control.  All other rows use the library
    operators directly.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(int(seed))
    solve = solve_fn if solve_fn is not None else _default_solve
    rows = [
        _row_contraction(model, b, n, rng, trials),
        _row_semigroup(model, b, n, rng, trials, solve),
        _row_monotonicity(model, b, n, rng, trials),
        _row_equivariance(model, b, n, rng, trials),
        _row_forward_backward(model, b, n, rng, trials),
        _row_semiconcavity(model, b, n, rng, trials),
        _row_graph_lipschitz(model, b, n, rng, trials),
    ]
    pair = compute_stationary_pair(model, n, b, (-12, 0))
    rows.append(_row_stationarity(pair, model, b, trials))
    rows.append(_row_qn_monotonicity(pair, model, b, rng, trials))
    rows.append(_row_qinf_monotonicity(pair, model, b, rng, trials))
    rows.append(_row_pinching(pair, model, b, trials))
    return rows


# --------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class RefinementRow:
    """Per-resolution rate fit plus the change against the previous grid."""

    n: int
    lambda_fit: float
    r_squared: float
    cauchy_diff: float


def _subsample(values: np.ndarray, stride: int) -> np.ndarray:
    if values.ndim == 1:
        return values[::stride]
    return values[::stride, ::stride]


def refinement_study(model: ForcingModel, b, n_values, N: int, seed: int,
                     *, num_initials: int = 3, threads: int = 1) -> list[RefinementRow]:
    """Rate fits across resolutions plus Cauchy differences of the reference.

    The Cauchy column is the star seminorm of (psi_ref at the previous n)
    minus (psi_ref at this n subsampled to it); it requires each n to be
    a multiple of its predecessor and is NaN otherwise.
    """
    ns = sorted({int(v) for v in n_values})
    if not ns or ns[0] < 16:
        raise ValueError("resolutions must be at least 16")
    if N < 8:
        raise ValueError("N must be at least 8 to fit a rate")
    N_values = list(range(4, N + 1, 4))
    rows = []
    prev_ref = None
    prev_n = None
    for n in ns:
        rep = convergence_rate(model, b, n, N_values, num_initials, seed,
                               threads=threads, include_lyapunov=False)
        ref = _reference(model, n, b, 2 * N)
        cauchy = float("nan")
        if prev_ref is not None and n % prev_n == 0:
            cauchy = _seminorm_gap(_subsample(ref, n // prev_n), prev_ref)
        rows.append(RefinementRow(n=n, lambda_fit=rep.lambda_fit,
                                  r_squared=rep.r_squared, cauchy_diff=cauchy))
        prev_ref, prev_n = ref, n
    return rows
