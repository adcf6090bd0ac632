"""CSV readers for the four documented table schemas.

Every reader skips `#` comment lines, validates the header against the
schema for its figure kind, and raises SchemaError carrying the exact
column diff on mismatch.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

__all__ = [
    "LyapunovData",
    "OrbitData",
    "ProfileData",
    "RateData",
    "SchemaError",
    "read_lyapunov",
    "read_orbit",
    "read_profile",
    "read_rate",
]


class SchemaError(ValueError):
    """Header mismatch; carries the missing/unexpected column diff."""

    def __init__(self, kind: str, expected: list[str], got: list[str]):
        self.kind = kind
        self.expected = list(expected)
        self.got = list(got)
        self.missing = [c for c in expected if c not in got]
        self.unexpected = [c for c in got if c not in expected]
        super().__init__(
            f"{kind}: header mismatch; missing columns {self.missing}, "
            f"unexpected columns {self.unexpected}"
        )


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    rows = list(csv.reader(lines))
    if not rows:
        raise SchemaError("table", ["<any header>"], [])
    return rows[0], rows[1:]


def _require(kind: str, expected: list[str], got: list[str]) -> None:
    if got != expected:
        raise SchemaError(kind, expected, got)


@dataclass(frozen=True)
class RateData:
    """Convergence errors: per-horizon sup errors plus per-initial curves."""

    N: list[int]
    sup_error: list[float]
    per_phi: dict[str, list[float]]


def read_rate(path: str) -> RateData:
    header, rows = _read_table(path)
    _require("rate", ["N", "phi_id", "error", "sup_error"], header)
    N_values: list[int] = []
    sup: dict[int, float] = {}
    per_phi: dict[str, dict[int, float]] = {}
    for raw in rows:
        n, pid, err, sup_err = int(raw[0]), raw[1], float(raw[2]), float(raw[3])
        if n not in sup:
            N_values.append(n)
            sup[n] = sup_err
        per_phi.setdefault(pid, {})[n] = err
    return RateData(
        N=N_values,
        sup_error=[sup[n] for n in N_values],
        per_phi={pid: [curve[n] for n in N_values if n in curve]
                 for pid, curve in per_phi.items()},
    )


@dataclass(frozen=True)
class ProfileData:
    """Stationary profiles per time: backward, forward, and their gap."""

    times: list[int]
    x_index: dict[int, list[int]]
    psi_minus: dict[int, list[float]]
    psi_plus: dict[int, list[float]]
    q: dict[int, list[float]]


def read_profile(path: str) -> ProfileData:
    header, rows = _read_table(path)
    _require("profile", ["time", "x_index", "psi_minus", "psi_plus", "q"], header)
    times: list[int] = []
    xi: dict[int, list[int]] = {}
    pm: dict[int, list[float]] = {}
    pp: dict[int, list[float]] = {}
    q: dict[int, list[float]] = {}
    for raw in rows:
        t = int(raw[0])
        if t not in xi:
            times.append(t)
            xi[t], pm[t], pp[t], q[t] = [], [], [], []
        xi[t].append(int(raw[1]))
        pm[t].append(float(raw[2]))
        pp[t].append(float(raw[3]))
        q[t].append(float(raw[4]))
    return ProfileData(times=times, x_index=xi, psi_minus=pm, psi_plus=pp, q=q)


@dataclass(frozen=True)
class OrbitData:
    """Minimizer orbit samples: positions and arrival velocities per time."""

    dim: int
    time: list[int]
    x: list[tuple[float, ...]]
    v: list[tuple[float, ...]]


def read_orbit(path: str) -> OrbitData:
    header, rows = _read_table(path)
    if len(header) >= 5:
        expected, dim = ["time", "x_1", "x_2", "v_1", "v_2"], 2
    else:
        expected, dim = ["time", "x_1", "v_1"], 1
    _require("orbit", expected, header)
    time = [int(r[0]) for r in rows]
    x = [tuple(float(c) for c in r[1:1 + dim]) for r in rows]
    v = [tuple(float(c) for c in r[1 + dim:1 + 2 * dim]) for r in rows]
    return OrbitData(dim=dim, time=time, x=x, v=v)


@dataclass(frozen=True)
class LyapunovData:
    """Running averages of each exponent, one column per exponent."""

    step: list[int]
    lambdas: list[list[float]]


def read_lyapunov(path: str) -> LyapunovData:
    header, rows = _read_table(path)
    k = max(len(header) - 1, 1)
    expected = ["step"] + [f"lambda_{i + 1}" for i in range(k)]
    _require("lyapunov", expected, header)
    step = [int(r[0]) for r in rows]
    lambdas = [[float(r[i + 1]) for r in rows] for i in range(k)]
    return LyapunovData(step=step, lambdas=lambdas)
