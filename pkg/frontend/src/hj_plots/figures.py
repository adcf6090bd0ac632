"""Figure rendering for the four table kinds.

Pure file-to-file transformations: each function reads one CSV, writes
one image, and returns a small summary of what it drew (fit numbers,
markers) so callers and tests can assert on the annotated values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .readers import read_lyapunov, read_orbit, read_profile, read_rate

__all__ = [
    "LyapunovFigure",
    "OrbitFigure",
    "ProfileFigure",
    "RateFigure",
    "plot_lyapunov",
    "plot_orbit",
    "plot_profile",
    "plot_rate",
]


def _finish(ax, out_path, title, xlabel, ylabel):
    if title:
        ax.set_title(title)
    if xlabel:
        ax.set_xlabel(xlabel)
    if ylabel:
        ax.set_ylabel(ylabel)
    fig = ax.figure
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


@dataclass(frozen=True)
class RateFigure:
    """What the rate plot annotated: the fit, or the no-decay flag."""

    lambda_fit: float | None
    r_squared: float | None
    annotation: str
    decayed: bool


def _fit_loglinear(N, E):
    """Least-squares slope/intercept/R^2 of log E against N (E > 0 only)."""
    pts = [(n, math.log(e)) for n, e in zip(N, E) if e > 0.0]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return float(slope), float(intercept), max(min(r2, 1.0), 0.0), x


def plot_rate(in_path: str, out_path: str, *, title=None, xlabel=None,
              ylabel=None) -> RateFigure:
    """Semilog-y sup error against horizon, fitted line and rate annotated."""
    data = read_rate(in_path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for pid, curve in sorted(data.per_phi.items()):
        if len(curve) == len(data.N):
            ax.semilogy(data.N, _positive(curve), color="steelblue",
                        alpha=0.35, lw=1.0, label="_nolegend_")
    ax.semilogy(data.N, _positive(data.sup_error), "o-", color="crimson",
                lw=2.0, label="sup error")

    fit = _fit_loglinear(data.N, data.sup_error)
    if fit is None or fit[0] >= -1e-12:
        result = RateFigure(None, None, "no decay", False)
    else:
        slope, intercept, r2, xs = fit
        lam = -slope
        line = np.exp(intercept + slope * xs)
        ax.semilogy(xs, line, "--", color="black", lw=1.2,
                    label=f"fit: e^(-{lam:.3f} N)")
        result = RateFigure(lam, r2,
                            f"lambda_fit = {lam:.6f}\nR^2 = {r2:.4f}", True)
    ax.text(0.03, 0.06, result.annotation, transform=ax.transAxes,
            fontsize=10, va="bottom",
            bbox={"boxstyle": "round", "fc": "white", "alpha": 0.8})
    ax.set_xlabel("horizon N")
    ax.set_ylabel("sup error")
    ax.legend(loc="upper right")
    _finish(ax, out_path, title, xlabel, ylabel)
    return result


def _positive(values):
    """Mask non-positive entries for log-scale plotting."""
    return [v if v > 0.0 else math.nan for v in values]


@dataclass(frozen=True)
class ProfileFigure:
    """Slice that was drawn and where the gap attains its minimum."""

    time: int
    argmin_index: int
    q_min: float


def plot_profile(in_path: str, out_path: str, *, title=None, xlabel=None,
                 ylabel=None) -> ProfileFigure:
    """Backward/forward stationary profiles and their gap at the final time."""
    data = read_profile(in_path)
    t = data.times[-1]
    n = len(data.x_index[t])
    x = [i / n for i in data.x_index[t]]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(x, data.psi_minus[t], label="psi_minus", color="navy")
    ax.plot(x, data.psi_plus[t], label="psi_plus", color="darkorange")
    ax.plot(x, data.q[t], label="q = psi_minus - psi_plus", color="seagreen")
    k = min(range(n), key=lambda i: data.q[t][i])
    ax.axvline(x[k], color="gray", ls=":", lw=1.0)
    ax.plot([x[k]], [data.q[t][k]], "v", color="seagreen", ms=8,
            label="argmin q")
    ax.set_xlabel("x")
    ax.set_ylabel(f"profiles at time {t}")
    ax.legend(loc="best", fontsize=9)
    _finish(ax, out_path, title, xlabel, ylabel)
    return ProfileFigure(time=t, argmin_index=data.x_index[t][k],
                         q_min=data.q[t][k])


@dataclass(frozen=True)
class OrbitFigure:
    """Dimension and number of samples drawn."""

    dim: int
    steps: int


def _break_wraps(watch, carry=()):
    """NaN-break every series where any `watch` series jumps across the seam.

    `watch` holds the periodic coordinates that decide where breaks go;
    `carry` series (e.g. time) receive breaks at the same positions.
    """
    series = tuple(watch) + tuple(carry)
    out = [[s[0]] for s in series]
    for i in range(1, len(series[0])):
        if any(abs(s[i] - s[i - 1]) > 0.5 for s in watch):
            for col in out:
                col.append(math.nan)
        for s, col in zip(series, out):
            col.append(s[i])
    return out


def plot_orbit(in_path: str, out_path: str, *, title=None, xlabel=None,
               ylabel=None) -> OrbitFigure:
    """Position against time in 1-d, path on the unit square in 2-d."""
    data = read_orbit(in_path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if data.dim == 1:
        xs = [p[0] for p in data.x]
        ts = [float(t) for t in data.time]
        bx, bt = _break_wraps([xs], [ts])
        ax.plot(bt, bx, "-", color="navy", lw=1.2)
        ax.plot(data.time, xs, "o", color="navy", ms=4)
        ax.set_xlabel("time")
        ax.set_ylabel("x (mod 1)")
        ax.set_ylim(-0.02, 1.02)
    else:
        x1 = [p[0] for p in data.x]
        x2 = [p[1] for p in data.x]
        b1, b2 = _break_wraps([x1, x2])
        ax.plot(b1, b2, "-", color="navy", lw=1.0)
        ax.plot(x1, x2, "o", color="navy", ms=4)
        ax.plot([x1[0]], [x2[0]], "s", color="crimson", ms=7, label="start")
        ax.set_xlabel("x_1 (mod 1)")
        ax.set_ylabel("x_2 (mod 1)")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.legend(loc="best", fontsize=9)
    _finish(ax, out_path, title, xlabel, ylabel)
    return OrbitFigure(dim=data.dim, steps=len(data.time))


@dataclass(frozen=True)
class LyapunovFigure:
    """Final running-average value of each exponent."""

    final: tuple[float, ...]


def plot_lyapunov(in_path: str, out_path: str, *, title=None, xlabel=None,
                  ylabel=None) -> LyapunovFigure:
    """Running averages of every exponent against step count."""
    data = read_lyapunov(in_path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, curve in enumerate(data.lambdas):
        ax.plot(data.step, curve, lw=1.4, label=f"lambda_{i + 1}")
    ax.axhline(0.0, color="gray", ls=":", lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("running average")
    ax.legend(loc="best", fontsize=9)
    _finish(ax, out_path, title, xlabel, ylabel)
    return LyapunovFigure(final=tuple(c[-1] for c in data.lambdas))
