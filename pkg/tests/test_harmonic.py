import os
import sys

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import catalog
import env as envs
import harmonic
from exceptions import NonMeanZeroError, ParameterDomainError

weak = catalog.get("E_weak")
symmetric = envs.tilt(weak, envs.classify(weak).delta)
nonlattice = catalog.get("E_weak2")
nonlattice_tilted = envs.tilt(nonlattice, envs.classify(nonlattice).delta)
CAP = 200_000


def within(estimate, target, band=4.0):
    return abs(estimate.value - target) <= band * estimate.se + estimate.bias_bound + 1e-12


def test_zero_argument_is_exact():
    assert harmonic.renewal_U(symmetric, 0.0).value == 1.0
    assert harmonic.renewal_V(symmetric, 0.0).value == 1.0
    assert harmonic.renewal_U(symmetric, 0.0).se == 0.0


def test_simple_walk_U():
    u1, u2 = harmonic.renewal_U_grid(symmetric, [1.0, 2.0], samples=2_000, cap=CAP, seed=3)
    assert within(u1, 2.0)
    assert within(u2, 3.0)
    assert u1.value <= u2.value


def test_simple_walk_V():
    v1, v2 = harmonic.renewal_V_grid(symmetric, [-1.0, -2.0], samples=4_000, cap=CAP, seed=3)
    # weak ascending ladder heights of the simple walk are 0 or 1 with probability 1/2
    assert within(v1, 2.0)
    assert within(v2, 4.0)


def test_grid_is_monotone():
    grid = harmonic.renewal_U_grid(nonlattice_tilted, [0.0, 0.5, 1.0, 2.0, 3.0], samples=1_000, cap=CAP, seed=5)
    values = [g.value for g in grid]
    assert values[0] == 1.0
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_two_estimators_agree():
    ladder = harmonic.renewal_U(symmetric, 1.0, samples=2_000, cap=CAP, seed=7)
    horizon = harmonic.renewal_U_horizon(symmetric, 1.0, horizon=10_000, samples=1_000, seed=7)
    # the horizon sum misses terms of order horizon^{-1/2}
    assert abs(ladder.value - horizon.value) <= 4 * (ladder.se + horizon.se) + ladder.bias_bound + 0.05


@pytest.mark.parametrize("x", [0.0, 1.0, 2.0])
def test_U_is_harmonic(x):
    check = harmonic.harmonic_check("U", symmetric, x, samples=2_000, cap=CAP, seed=11)
    assert abs(check.residual) <= 4 * check.se + check.bias_bound + 1e-12


@pytest.mark.parametrize("x", [0.0, -1.0, -2.0])
def test_V_is_harmonic(x):
    check = harmonic.harmonic_check("V", symmetric, x, samples=2_000, cap=CAP, seed=11)
    assert abs(check.residual) <= 4 * check.se + check.bias_bound + 1e-12


@pytest.mark.parametrize("which,x", [("U", 1.0), ("V", -1.0)])
def test_harmonic_on_nonlattice_walk(which, x):
    check = harmonic.harmonic_check(which, nonlattice_tilted, x, samples=2_000, cap=CAP, seed=13)
    assert abs(check.residual) <= 4 * check.se + check.bias_bound + 1e-12


def test_requires_mean_zero_walk():
    with pytest.raises(NonMeanZeroError):
        harmonic.renewal_U(weak, 1.0)


def test_argument_sign():
    with pytest.raises(ParameterDomainError):
        harmonic.renewal_U(symmetric, -1.0)
    with pytest.raises(ParameterDomainError):
        harmonic.renewal_V(symmetric, 1.0)
