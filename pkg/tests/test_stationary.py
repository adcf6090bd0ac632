import warnings

import numpy as np
import pytest

from kicked_hj.dynamics import verify_minimizer_is_orbit
from kicked_hj.forcing import default_model, zero_model
from kicked_hj.grid import GridFunction, torus_distance
from kicked_hj.lax import backward_solve, backward_step, forward_step
from kicked_hj.stationary import (
    compute_psi_minus,
    compute_psi_plus,
    compute_stationary_pair,
    global_minimizer,
    guiding_orbit,
    nondegeneracy_estimate,
    q_consistent,
    q_function,
    quadratic_bounds,
)

MODEL = default_model(seed=42)
B = 0.0


@pytest.fixture(scope="module")
def pair():
    return compute_stationary_pair(MODEL, 256, B, (-10, 0), tol=1e-10)


def test_pair_converges_and_is_normalized(pair):
    assert pair.window == (-10, 0)
    assert pair.residual <= 1e-10
    assert sorted(pair.psi_minus) == list(range(-10, 1))
    assert sorted(pair.psi_plus) == list(range(-10, 1))
    for j in range(-10, 1):
        assert np.min(pair.psi_minus[j].values) == pytest.approx(0.0, abs=1e-15)
        assert np.min(pair.psi_plus[j].values) == pytest.approx(0.0, abs=1e-15)
    assert pair.burn_in >= 44  # at least one doubling of the 4x window default


def test_backward_field_is_a_fixed_point_of_the_step(pair):
    for j in (-10, -6, -1):
        out, _ = backward_step(pair.psi_minus[j], j, MODEL, B)
        d = out.values - pair.psi_minus[j + 1].values
        assert 0.5 * (d.max() - d.min()) <= 1e-10


def test_forward_field_is_a_fixed_point_of_the_step(pair):
    for j in (-10, -5, -1):
        out, _ = forward_step(pair.psi_plus[j + 1], j, MODEL, B)
        d = out.values - pair.psi_plus[j].values
        assert 0.5 * (d.max() - d.min()) <= 1e-10


def test_q_fields_differ_by_a_per_time_constant(pair):
    for j in (-10, -4, 0):
        gap = q_consistent(pair, j) - q_function(pair, j).values
        assert gap.max() - gap.min() <= 1e-12


def test_consistent_q_minimum_is_constant_across_times(pair):
    mins = [float(np.min(q_consistent(pair, j))) for j in range(-10, 1)]
    assert max(mins) - min(mins) <= 1e-8 + 4 * pair.residual


def test_global_minimizer_is_unique_and_nearly_an_orbit(pair):
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        orbit = global_minimizer(pair, MODEL, B)
    assert orbit.times == (-10, 0)
    assert verify_minimizer_is_orbit(orbit, MODEL) <= 5.0 / pair.n
    # every position minimizes Q at its time
    for j in (-10, -5, 0):
        q = q_consistent(pair, j)
        at = q[tuple(np.round(orbit.x[orbit.index(j)] * pair.n).astype(int) % pair.n)]
        assert at == pytest.approx(float(np.min(q)), abs=1e-15)


def test_degenerate_minimizer_warns():
    flat = compute_stationary_pair(zero_model(), 64, 0.0, (-3, 0))
    with pytest.warns(RuntimeWarning):
        global_minimizer(flat, zero_model(), 0.0)


def test_zero_forcing_fields_vanish():
    snaps = compute_psi_minus(zero_model(), 64, 0.0, (-4, 0), burn_in=8)
    for f in snaps.values():
        assert np.max(np.abs(f.values)) <= 1e-14
    snaps = compute_psi_plus(zero_model(), 64, 0.0, (-4, 0), burn_in=8)
    for f in snaps.values():
        assert np.max(np.abs(f.values)) <= 1e-14


def test_window_validation():
    with pytest.raises(ValueError):
        compute_stationary_pair(MODEL, 32, 0.0, (1, 0))
    with pytest.raises(ValueError):
        compute_psi_minus(MODEL, 32, 0.0, (2, -2), burn_in=4)


def test_untracked_pair_cannot_backtrack():
    p = compute_stationary_pair(MODEL, 64, 0.0, (-2, 0), track=False)
    with pytest.raises(ValueError):
        global_minimizer(p, MODEL, 0.0)


def test_guiding_orbit_keeps_its_level_and_lands_on_the_minimizer(pair):
    res = backward_solve(
        GridFunction.constant(1, 256, 0.0), -10, 0, MODEL, B, normalize=True
    )
    orbit, drift = guiding_orbit(res, pair, MODEL, B)
    assert orbit.times == (-10, 0)
    assert drift <= 1e-8
    ref = global_minimizer(pair, MODEL, B)
    assert torus_distance(orbit.x[-1], ref.x[-1]) <= 2.0 / pair.n


def test_pinching_constants_are_positive_and_ordered(pair):
    orbit = global_minimizer(pair, MODEL, B)
    a_hat = nondegeneracy_estimate(pair, orbit, radius_max=0.1)
    lo, hi = quadratic_bounds(pair, orbit, radius_max=0.1)
    assert a_hat == lo
    assert 0.0 < lo <= hi
    # shrinking the radius can only raise the worst-case ratio
    assert nondegeneracy_estimate(pair, orbit, radius_max=0.05) >= lo - 1e-15
