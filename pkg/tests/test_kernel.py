import math
import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import catalog
import kernel
from exceptions import BudgetExceededError, SampleSizeError

single = catalog.get("D1")
weak = catalog.get("E_weak")


@pytest.fixture(scope="module")
def weak_exact():
    return kernel.kernel_exact(weak, 10)


def test_single_state_closed_forms():
    series = kernel.kernel_exact(single, 3)
    assert series.H[0].value == pytest.approx(1.0 - math.exp(-1.0 / 3.0), abs=1e-12)
    assert series.H[0].value == pytest.approx(0.283469, abs=1e-6)
    # e^{-1/3} (1 - e^{-1/7}): G(F(0)) = e^{-1/3} and 1 - F(F(0)) = 1/7
    assert series.H[1].value == pytest.approx(math.exp(-1.0 / 3.0) * (1.0 - math.exp(-1.0 / 7.0)), abs=1e-12)
    assert series.H[1].value == pytest.approx(0.0953862, abs=1e-7)
    assert series.Hstar[0].n == 1
    assert series.Hstar[0].value == pytest.approx(0.150899, abs=1e-6)
    assert series.gamma == pytest.approx(0.5)


def test_weak_first_entry(weak_exact):
    # 1 - F_k(0) = m_k / (1 + b_k), and G is Poisson(1) in both states
    expected = 0.3 * (1.0 - math.exp(-math.e / 3.0)) + 0.7 * (1.0 - math.exp(-2.0 / (3.0 * math.e)))
    assert weak_exact.H[0].value == pytest.approx(expected, abs=1e-12)
    assert weak_exact.H[0].value == pytest.approx(0.3310155, abs=1e-7)
    assert len(weak_exact.H) == 11
    assert len(weak_exact.Hstar) == 10


def test_geometric_tail_bound(weak_exact):
    for entry in weak_exact.H:
        assert entry.value <= weak_exact.tail_const * weak_exact.gamma ** (entry.n + 1) + 1e-15


def test_workers_do_not_change_exact_values(weak_exact):
    parallel = kernel.kernel_exact(weak, 10, workers=2)
    assert [e.value for e in parallel.H] == pytest.approx([e.value for e in weak_exact.H], abs=1e-15)


def test_budget():
    with pytest.raises(BudgetExceededError):
        kernel.kernel_exact(weak, 20, budget=1000)


def test_tilted_estimator_is_exact_for_one_state():
    exact = kernel.kernel_exact(single, 5)
    for n in range(6):
        plain, normalized = kernel.kernel_mc(single, n, 500, "tilted", seed=3)
        assert plain.se == 0.0
        assert plain.value == pytest.approx(exact.H[n].value, abs=1e-12)
        if n >= 1:
            assert normalized.value == pytest.approx(exact.Hstar[n - 1].value, abs=1e-12)


def test_monte_carlo_agrees_with_enumeration(weak_exact):
    target = weak_exact.H[10].value
    tilted, _ = kernel.kernel_mc(weak, 10, 50_000, "tilted", seed=11)
    direct, _ = kernel.kernel_mc(weak, 10, 50_000, "direct", seed=11)
    assert abs(tilted.value - target) <= 4 * tilted.se
    assert abs(direct.value - target) <= 4 * direct.se
    assert tilted.se < direct.se


def test_monte_carlo_is_reproducible():
    first = kernel.kernel_mc(weak, 6, 5_000, "tilted", seed=5, workers=3)
    second = kernel.kernel_mc(weak, 6, 5_000, "tilted", seed=5, workers=3)
    assert first == second


def test_too_few_samples():
    with pytest.raises(SampleSizeError):
        kernel.kernel_mc(weak, 3, 10)


def test_hybrid_switches_to_monte_carlo():
    series = kernel.kernel_hybrid(weak, 8, 2_000, seed=2, budget=100)
    methods = [e.method for e in series.H]
    assert methods[0] == "exact"
    assert methods[-1] == "tilted-mc"
    assert len(series.H) == 9 and len(series.Hstar) == 8


def test_synthetic_kernel():
    series = kernel.synthetic_geometric_kernel(0.5, 0.5, 4)
    assert [e.value for e in series.H] == pytest.approx([0.5 * 0.5 ** (n + 1) for n in range(5)])
    assert all(e.value == 0.0 for e in series.Hstar)
    assert series.tail_const == 0.5


def test_r1():
    closed_form = 1.0 - (math.exp(-1.0 / 3.0) - math.exp(-1.0)) / (1.0 - math.exp(-1.0))
    assert kernel.r1(single) == pytest.approx(closed_form, abs=1e-12)
    assert kernel.r1(single) == pytest.approx(0.448440, abs=2e-6)


@pytest.mark.parametrize("env", [single, weak], ids=["single", "weak"])
def test_b_series_reproduces_kernel(env):
    exact = kernel.kernel_exact(env, 6)
    gamma = exact.gamma
    for n in range(7):
        b = kernel.b_series(env, "next", "G0", n)
        assert b.value * gamma ** (n + 1) == pytest.approx(exact.H[n].value, rel=1e-12)
    for n in range(1, 7):
        b = kernel.b_series(env, "next", "G0-normalized", n)
        assert b.value * gamma ** (n + 1) == pytest.approx(exact.Hstar[n - 1].value, rel=1e-12)


def test_b_series_monte_carlo_matches_enumeration():
    exact = kernel.b_series(weak, 0.5, "G0", 8)
    estimate = kernel.b_series(weak, 0.5, "G0", 8, method="tilted-mc", samples=20_000, seed=4)
    assert abs(estimate.value - exact.value) <= 4 * estimate.se


def test_argmin_decomposition_sums_to_total():
    parts = kernel.b_series_by_argmin(weak, 0.5, "G0", 8)
    assert parts.shape == (9,)
    assert np.all(parts >= 0.0)
    assert parts.sum() == pytest.approx(kernel.b_series(weak, 0.5, "G0", 8).value, rel=1e-12)


def test_power_initial_law_at_one_vanishes():
    assert kernel.b_series(weak, 1.0, "power", 4, z=2).value == 0.0


def test_quenched_survival_bound():
    assert kernel.survival_bound_gap(weak, 10) <= 1e-12
    assert kernel.survival_bound_gap(catalog.get("E_weak2"), 10) <= 1e-12


def test_power_initial_law_one_step():
    # 1 - F(0) = 1/3, G(0) = e^{-1}, e^{-S_1} = 2
    value = kernel.b_series(single, 0.0, "power", 1, z=1).value
    assert value == pytest.approx(2.0 / 3.0 * math.exp(-1.0), abs=1e-12)
    assert value == pytest.approx(0.245253, abs=1e-6)


def test_max_exact_n_respects_budget():
    n = kernel.max_exact_n(weak, budget=1000)
    kernel.kernel_exact(weak, n, budget=1000)
    with pytest.raises(BudgetExceededError):
        kernel.kernel_exact(weak, n + 1, budget=1000)
    assert kernel.max_exact_n(single, budget=10**9, limit=50) == 50
