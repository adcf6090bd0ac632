"""Command-line front end: strict JSON configs in, reproducible CSV out.

Configs are validated against a closed schema (unknown keys are errors,
every violation is reported with its field path) so a typo cannot
silently change the physics.  Every output file starts with a comment
line carrying the digest of the canonicalized config; re-running a
command with the same config reproduces the bytes exactly.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .experiments import (
    canonical_digest,
    convergence_rate,
    invariant_suite,
    lyapunov_run,
    refinement_study,
)
from .forcing import BasisPotential, CoefficientDistribution, ForcingModel
from .grid import GridFunction
from .lax import backtrack_minimizer, backward_solve
from .stationary import compute_stationary_pair, global_minimizer, q_function

__all__ = ["ConfigError", "RunConfig", "main", "parse_config", "run"]

COMMANDS = ("converge", "stationary", "lyapunov", "orbit", "check", "refine")

_TOP_KEYS = {"dimension", "grid_points", "b", "basis", "distribution", "seed"} | set(COMMANDS)

_SECTION_KEYS = {
    "converge": {"N_values", "num_initials", "include_lyapunov", "lyapunov_window"},
    "stationary": {"window", "burn_in"},
    "lyapunov": {"window"},
    "orbit": {"window", "kind", "endpoint"},
    "check": {"trials"},
    "refine": {"n_values", "N"},
}


class ConfigError(ValueError):
    """Carries every validation failure, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    """Validated run setup plus the raw sections for each command."""

    dimension: int
    grid_points: int
    b: np.ndarray
    model: ForcingModel
    seed: int
    sections: dict = field(default_factory=dict)
    digest: str = ""


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (_is_int(x) or isinstance(x, float)) and math.isfinite(x)


def _check_section(name: str, sec, dim: int, errors: list) -> None:
    if not isinstance(sec, dict):
        errors.append(f"{name}: must be an object")
        return
    for k in sec:
        if k not in _SECTION_KEYS[name]:
            errors.append(f"{name}.{k}: unknown key")

    def window_pair(key="window"):
        w = sec.get(key)
        if w is None:
            errors.append(f"{name}.{key}: required")
        elif (not isinstance(w, list) or len(w) != 2 or not all(_is_int(v) for v in w)
              or w[0] > w[1]):
            errors.append(f"{name}.{key}: must be [lo, hi] integers with lo <= hi")

    if name == "converge":
        nv = sec.get("N_values")
        if not isinstance(nv, list) or not nv or not all(_is_int(v) and v >= 1 for v in nv):
            errors.append("converge.N_values: must be a nonempty list of integers >= 1")
        s = sec.get("num_initials")
        if not _is_int(s) or s < 3:
            errors.append("converge.num_initials: must be an integer >= 3")
        if "include_lyapunov" in sec and not isinstance(sec["include_lyapunov"], bool):
            errors.append("converge.include_lyapunov: must be a boolean")
        if "lyapunov_window" in sec and (not _is_int(sec["lyapunov_window"])
                                         or sec["lyapunov_window"] < 10):
            errors.append("converge.lyapunov_window: must be an integer >= 10")
    elif name == "stationary":
        window_pair()
        if "burn_in" in sec and (not _is_int(sec["burn_in"]) or sec["burn_in"] < 1):
            errors.append("stationary.burn_in: must be an integer >= 1")
    elif name == "lyapunov":
        w = sec.get("window")
        if not _is_int(w) or w < 10:
            errors.append("lyapunov.window: must be an integer >= 10")
    elif name == "orbit":
        window_pair()
        kind = sec.get("kind", "global")
        if kind not in ("global", "backtracked"):
            errors.append("orbit.kind: must be 'global' or 'backtracked'")
        if "endpoint" in sec:
            e = sec["endpoint"]
            if not isinstance(e, list) or len(e) != dim or not all(_is_num(v) for v in e):
                errors.append(f"orbit.endpoint: must be a list of {dim} numbers")
    elif name == "check":
        t = sec.get("trials")
        if not _is_int(t) or t < 1:
            errors.append("check.trials: must be an integer >= 1")
    elif name == "refine":
        nv = sec.get("n_values")
        if (not isinstance(nv, list) or len(nv) < 2
                or not all(_is_int(v) and v >= 16 for v in nv)):
            errors.append("refine.n_values: must be a list of at least 2 integers >= 16")
        N = sec.get("N")
        if not _is_int(N) or N < 8:
            errors.append("refine.N: must be an integer >= 8")


def _parse_basis(raw, dim: int, errors: list):
    if not isinstance(raw, list) or not raw:
        errors.append("basis: must be a nonempty list")
        return None
    out = []
    for i, item in enumerate(raw):
        path = f"basis[{i}]"
        if not isinstance(item, dict):
            errors.append(f"{path}: must be an object")
            continue
        for k in item:
            if k not in ("kind", "wavevector", "amplitude"):
                errors.append(f"{path}.{k}: unknown key")
        kind = item.get("kind")
        wv = item.get("wavevector")
        amp = item.get("amplitude")
        ok = True
        if kind not in ("cos", "sin"):
            errors.append(f"{path}.kind: must be 'cos' or 'sin'")
            ok = False
        if (not isinstance(wv, list) or len(wv) != dim
                or not all(_is_int(v) for v in wv) or not any(wv)):
            errors.append(f"{path}.wavevector: must be {dim} integers, not all zero")
            ok = False
        if not _is_num(amp):
            errors.append(f"{path}.amplitude: must be a finite number")
            ok = False
        if ok:
            out.append(BasisPotential(kind, tuple(wv), float(amp)))
    return out if len(out) == len(raw) else None


def _parse_distribution(raw, errors: list):
    if not isinstance(raw, dict):
        errors.append("distribution: must be an object")
        return None
    for k in raw:
        if k not in ("kind", "params"):
            errors.append(f"distribution.{k}: unknown key")
    kind = raw.get("kind")
    params = raw.get("params")
    if kind not in ("gaussian", "uniform"):
        errors.append("distribution.kind: must be 'gaussian' or 'uniform'")
        return None
    if not isinstance(params, dict):
        errors.append("distribution.params: must be an object")
        return None
    if kind == "gaussian":
        extra = set(params) - {"sigma"}
        if extra or not _is_num(params.get("sigma")) or params["sigma"] <= 0:
            errors.append("distribution.params.sigma: must be a number > 0")
            return None
        return CoefficientDistribution.gaussian(float(params["sigma"]))
    extra = set(params) - {"lo", "hi"}
    if (extra or not _is_num(params.get("lo")) or not _is_num(params.get("hi"))
            or not params["lo"] < params["hi"]):
        errors.append("distribution.params: must have numbers lo < hi")
        return None
    return CoefficientDistribution.uniform(float(params["lo"]), float(params["hi"]))


def parse_config(path: str, *, command: str | None = None) -> RunConfig:
    """Read and validate a JSON config; raises ConfigError listing every problem."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be an object"])

    errors: list[str] = []
    for k in raw:
        if k not in _TOP_KEYS:
            errors.append(f"unknown key: {k}")

    dim = raw.get("dimension")
    if dim not in (1, 2):
        errors.append("dimension: must be 1 or 2")
        dim = 1
    n = raw.get("grid_points")
    if not _is_int(n) or n < 16:
        errors.append("grid_points: must be an integer >= 16")
    bv = raw.get("b")
    if not isinstance(bv, list) or len(bv) != dim or not all(_is_num(v) for v in bv):
        errors.append(f"b: must be a list of {dim} numbers")
        bv = [0.0] * dim
    seed = raw.get("seed")
    if not _is_int(seed):
        errors.append("seed: must be an integer")
        seed = 0
    basis = _parse_basis(raw.get("basis"), dim, errors)
    dist = _parse_distribution(raw.get("distribution"), errors)

    for name in COMMANDS:
        if name in raw:
            _check_section(name, raw[name], dim, errors)
    if command is not None and command not in raw:
        errors.append(f"{command}: section required for this command")

    if errors:
        raise ConfigError(errors)

    model = ForcingModel(tuple(basis), dist, seed)
    return RunConfig(
        dimension=dim, grid_points=int(n), b=np.asarray(bv, dtype=np.float64),
        model=model, seed=int(seed),
        sections={k: raw[k] for k in COMMANDS if k in raw},
        digest=canonical_digest(raw))


# --------------------------------------------------------------------------
# output formatting


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_table(path: str, digest: str, header: list[str], rows, sep: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config {digest}\n")
        fh.write(sep.join(header) + "\n")
        for row in rows:
            fh.write(sep.join(_fmt(v) for v in row) + "\n")


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_json_safe(float(v)) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return _json_safe(float(x) if isinstance(x, np.floating) else int(x))
    return x


# --------------------------------------------------------------------------
# commands


def _cmd_converge(cfg: RunConfig, out: str, threads: int, verbose: bool) -> int:
    sec = cfg.sections["converge"]
    rep = convergence_rate(
        cfg.model, cfg.b, cfg.grid_points, sec["N_values"], sec["num_initials"],
        cfg.seed, threads=threads,
        include_lyapunov=sec.get("include_lyapunov", True),
        lyapunov_window=sec.get("lyapunov_window", 2000),
        config_digest=cfg.digest)
    ids = list(rep.errors)
    rows = []
    for i, N in enumerate(rep.N_values):
        for pid in ids:
            rows.append((N, pid, rep.errors[pid][i], rep.sup_errors[i]))
    _write_table(os.path.join(out, "errors.csv"), cfg.digest,
                 ["N", "phi_id", "error", "sup_error"], rows)
    summary = {
        "config": cfg.digest,
        "N_values": rep.N_values,
        "sup_errors": rep.sup_errors,
        "lambda_fit": rep.lambda_fit,
        "r_squared": rep.r_squared,
        "poly_r_squared": rep.poly_r_squared,
        "fit_range": list(rep.fit_range),
        "floor_estimate": rep.floor_estimate,
        "flags": list(rep.flags),
        "per_phi_lambda": rep.per_phi_lambda,
        "lyapunov_exponents": rep.lyapunov.exponents if rep.lyapunov else None,
    }
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if verbose:
        print(f"lambda_fit={rep.lambda_fit!r} r_squared={rep.r_squared!r} "
              f"flags={list(rep.flags)}", file=sys.stderr)
    return 0


def _cmd_stationary(cfg: RunConfig, out: str, threads: int, verbose: bool) -> int:
    sec = cfg.sections["stationary"]
    lo, hi = sec["window"]
    pair = compute_stationary_pair(cfg.model, cfg.grid_points, cfg.b, (lo, hi),
                                   burn_in=sec.get("burn_in"))
    rows = []
    for j in range(lo, hi + 1):
        pm = pair.psi_minus[j].values.reshape(-1)
        pp = pair.psi_plus[j].values.reshape(-1)
        q = q_function(pair, j).values.reshape(-1)
        for idx in range(pm.size):
            rows.append((j, idx, pm[idx], pp[idx], q[idx]))
    _write_table(os.path.join(out, "stationary.csv"), cfg.digest,
                 ["time", "x_index", "psi_minus", "psi_plus", "q"], rows)
    if verbose:
        print(f"burn_in={pair.burn_in} residual={pair.residual!r}", file=sys.stderr)
    return 0


def _cmd_lyapunov(cfg: RunConfig, out: str, threads: int, verbose: bool) -> int:
    sec = cfg.sections["lyapunov"]
    _, _, lya = lyapunov_run(cfg.model, cfg.grid_points, cfg.b, sec["window"])
    k = lya.per_step_log.shape[1]
    header = ["step"] + [f"lambda_{i + 1}" for i in range(k)]
    rows = [(s + 1, *lya.per_step_log[s]) for s in range(lya.per_step_log.shape[0])]
    _write_table(os.path.join(out, "lyapunov.csv"), cfg.digest, header, rows)
    if verbose:
        print(f"exponents={list(lya.exponents)!r}", file=sys.stderr)
    return 0


def _cmd_orbit(cfg: RunConfig, out: str, threads: int, verbose: bool) -> int:
    sec = cfg.sections["orbit"]
    lo, hi = sec["window"]
    kind = sec.get("kind", "global")
    if kind == "global":
        pair = compute_stationary_pair(cfg.model, cfg.grid_points, cfg.b, (lo, hi))
        orbit = global_minimizer(pair, cfg.model, cfg.b)
    else:
        phi = GridFunction.constant(cfg.dimension, cfg.grid_points, 0.0)
        run = backward_solve(phi, lo, hi, cfg.model, cfg.b, track_argmin=True)
        endpoint = sec.get("endpoint", [0.0] * cfg.dimension)
        orbit = backtrack_minimizer(run, np.asarray(endpoint, dtype=np.float64))
    header = ["time"] + [f"x_{a + 1}" for a in range(cfg.dimension)] \
        + [f"v_{a + 1}" for a in range(cfg.dimension)]
    rows = [(j, *orbit.x[i], *orbit.v[i])
            for i, j in enumerate(range(lo, hi + 1))]
    _write_table(os.path.join(out, "orbit.csv"), cfg.digest, header, rows)
    return 0


def _cmd_check(cfg: RunConfig, out: str, threads: int, verbose: bool) -> int:
    sec = cfg.sections["check"]
    rows = invariant_suite(cfg.model, cfg.b, cfg.grid_points, cfg.seed, sec["trials"])
    table = [(r.name, r.trials, r.max_violation, r.tolerance, r.status) for r in rows]
    _write_table(os.path.join(out, "check.tsv"), cfg.digest,
                 ["property", "trials", "max_violation", "tolerance", "status"],
                 table, sep="\t")
    failed = [r.name for r in rows if r.status != "PASS"]
    if verbose or failed:
        for r in rows:
            print(f"{r.name}\t{r.status}", file=sys.stderr)
    return 3 if failed else 0


def _cmd_refine(cfg: RunConfig, out: str, threads: int, verbose: bool) -> int:
    sec = cfg.sections["refine"]
    rows = refinement_study(cfg.model, cfg.b, sec["n_values"], sec["N"], cfg.seed,
                            threads=threads)
    table = [(r.n, r.lambda_fit, r.r_squared, r.cauchy_diff) for r in rows]
    _write_table(os.path.join(out, "refine.csv"), cfg.digest,
                 ["n", "lambda_fit", "r_squared", "cauchy_diff"], table)
    return 0


_RUNNERS = {
    "converge": _cmd_converge,
    "stationary": _cmd_stationary,
    "lyapunov": _cmd_lyapunov,
    "orbit": _cmd_orbit,
    "check": _cmd_check,
    "refine": _cmd_refine,
}


def run(command: str, config: RunConfig, *, out: str = ".", threads: int = 1,
        verbose: bool = False) -> int:
    """Execute one command; returns the process exit code."""
    if command not in _RUNNERS:
        print(f"unknown command: {command}", file=sys.stderr)
        return 1
    if command not in config.sections:
        print(f"{command}: section required for this command", file=sys.stderr)
        return 1
    os.makedirs(out, exist_ok=True)
    try:
        return _RUNNERS[command](config, out, threads, verbose)
    except Exception as exc:  # runtime failure, distinct from validation
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _resolve_threads(arg: int | None) -> int:
    if arg is None:
        env = os.environ.get("KICKED_HJ_THREADS", "")
        arg = int(env) if env.strip() else 1
    if arg == 0:
        return os.cpu_count() or 1
    return max(1, arg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kicked-hj",
        description="Simulate randomly kicked Hamilton-Jacobi dynamics on the torus.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
    except ValueError:
        print("KICKED_HJ_THREADS must be an integer", file=sys.stderr)
        return 1
    try:
        config = parse_config(args.config, command=args.command)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 1
    return run(args.command, config, out=args.out, threads=threads,
               verbose=args.verbose)


if __name__ == "__main__":
    sys.exit(main())
