import math
import os
import sys

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import catalog
import env as envs
import kernel
import tail
from exceptions import FitError, MissingKernelEntriesError, ParameterDomainError, UndecidedRootError
from schemas import KernelEntry, KernelSeries, SurvivalCurve, SurvivalPoint

synthetic = kernel.synthetic_geometric_kernel(0.5, 0.5, 100)
single = catalog.get("D1")


def zero_kernel(n_max: int) -> KernelSeries:
    return KernelSeries(
        H=[KernelEntry(n=n, value=0.0, method="synthetic") for n in range(n_max + 1)],
        Hstar=[KernelEntry(n=n, value=0.0, method="synthetic") for n in range(1, n_max + 1)],
        tail_const=0.0,
        tail_const_star=0.0,
        gamma=0.5,
        delta=1.0,
    )


def curve_of(values) -> SurvivalCurve:
    return SurvivalCurve(points=[SurvivalPoint(n=n, value=v, provenance="closed-form") for n, v in enumerate(values, start=1)])


def test_recurrence_on_synthetic_kernel():
    curve = tail.survival_from_kernel(synthetic, 0.5, 50)
    assert curve.points[0].value == 0.5
    for point in curve.points[1:]:
        assert point.value == pytest.approx(0.125 * 0.75 ** (point.n - 2), abs=1e-12)
        assert point.half_width == 0.0
        assert point.provenance == "recurrence"


def test_zero_kernel_survival():
    curve = tail.survival_from_kernel(zero_kernel(5), 0.3, 6)
    assert [p.value for p in curve.points] == [0.3, 0, 0, 0, 0, 0]


def test_single_state_recurrence():
    env = catalog.get("D1")
    curve = tail.survival_from_kernel(kernel.kernel_exact(env, 12), kernel.r1(env), 12)
    assert curve.points[0].value == pytest.approx(0.448440, abs=1e-6)
    assert curve.points[1].value == pytest.approx(0.278018, abs=2e-6)
    values = [p.value for p in curve.points]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_missing_entries():
    with pytest.raises(MissingKernelEntriesError):
        tail.survival_from_kernel(zero_kernel(3), 0.5, 10)


def test_r1_must_be_a_probability():
    with pytest.raises(ParameterDomainError):
        tail.survival_from_kernel(zero_kernel(3), 1.5, 3)


def test_half_widths_follow_monte_carlo_error():
    series = kernel.kernel_series_mc(catalog.get("E_weak"), 6, 2_000, seed=9)
    curve = tail.survival_from_kernel(series, 0.4, 7, R1_half_width=0.01)
    assert curve.points[0].half_width == pytest.approx(0.01)
    assert all(p.half_width > 0.0 for p in curve.points[1:])


def test_root_of_synthetic_kernel():
    cert = tail.find_root(synthetic)
    assert cert.case == "case1"
    assert cert.r == pytest.approx(4.0 / 3.0, abs=1e-9)
    assert cert.bracket[0] - 1e-15 <= 4.0 / 3.0 <= cert.bracket[1] + 1e-15
    assert cert.converged and cert.required_n is None
    assert cert.certified


def test_case1_constant_and_prediction():
    cert = tail.find_root(synthetic)
    constant = tail.case1_constant(synthetic, 0.5, cert.r)
    assert constant == pytest.approx(8.0 / 27.0, abs=1e-9)
    curve = tail.survival_from_kernel(synthetic, 0.5, 50)
    for point in curve.points[1:]:
        assert tail.case1_prediction(cert, constant, point.n) == pytest.approx(point.value, rel=1e-9)


def test_case1_constant_vanishes_without_star_terms():
    assert tail.case1_constant(synthetic, 0.0, 4.0 / 3.0) == 0.0


def test_zero_kernel_is_case2():
    cert = tail.find_root(zero_kernel(10))
    assert cert.case == "case2"
    assert cert.r is None


def test_case3_band():
    # T(1/gamma) = 1 exactly when H is concentrated at n = 0 with H_0 = gamma
    series = zero_kernel(10).model_copy(update={"H": [KernelEntry(n=0, value=0.5, method="synthetic")] + zero_kernel(10).H[1:]})
    cert = tail.find_root(series)
    assert cert.case == "case3-boundary"


def test_undecided_without_enough_terms():
    short = kernel.synthetic_geometric_kernel(0.5, 0.5, 0)
    tight = short.model_copy(update={"H": [KernelEntry(n=0, value=0.25, se=0.2, method="tilted-mc")]})
    with pytest.raises(UndecidedRootError) as info:
        tail.find_root(tight)
    assert info.value.exit_code == 2


def test_strong_environment_has_a_root():
    env = catalog.get("E_strong2")
    series = kernel.kernel_exact(env, 16)
    cert = tail.find_root(series)
    assert cert.case == "case1"
    assert 1.0 < cert.r < 1.0 / series.gamma
    lo, hi = cert.bracket
    assert lo <= cert.r <= hi
    assert tail.enclosure(series, lo)[1] < 1.0 < tail.enclosure(series, hi)[0]


def test_monte_carlo_kernel_keeps_its_bracket():
    env = catalog.get("E_strong2")
    series = kernel.kernel_series_mc(env, 20, 5_000, seed=3)
    cert = tail.find_root(series)
    assert cert.case == "case1"
    lo, hi = cert.bracket
    assert tail.enclosure(series, lo)[1] < 1.0 < tail.enclosure(series, hi)[0]


def test_short_exact_kernel_reports_the_horizon_it_needs():
    series = kernel.kernel_exact(single, 12)
    cert = tail.find_root(series)
    assert cert.case == "case1"
    assert 1.0 < cert.r < 1.0 / series.gamma
    assert not cert.converged
    assert cert.required_n > 12
    refined, final = tail.refine_root(series, lambda n: kernel.kernel_exact(single, n), 400)
    assert final.converged
    assert refined.n_max <= 400
    assert cert.bracket[0] <= final.r <= cert.bracket[1]
    assert final.bracket[1] - final.bracket[0] <= 1e-9 * final.bracket[1]


def test_case1_constant_is_stable_under_more_entries():
    series, cert = tail.refine_root(
        kernel.kernel_exact(single, 12), lambda n: kernel.kernel_exact(single, n), 400, rtol=1e-12
    )
    assert cert.converged
    longer = kernel.kernel_exact(single, series.n_max + 10)
    longer_cert = tail.find_root(longer)
    R1 = kernel.r1(single)
    assert tail.case1_constant(longer, R1, longer_cert.r) == pytest.approx(
        tail.case1_constant(series, R1, cert.r), abs=1e-9
    )


def test_weak_shape_kernel_needs_the_asymptotic_model():
    # H_n = 0.1 gamma^{n+1} (n+1)^{-3/2}: T(1/gamma) is about 0.23, but C_G > 0
    gamma = 0.5
    series = KernelSeries(
        H=[KernelEntry(n=n, value=0.1 * gamma ** (n + 1) * (n + 1) ** -1.5, method="synthetic") for n in range(41)],
        Hstar=[KernelEntry(n=n, value=0.0, method="synthetic") for n in range(1, 41)],
        tail_const=0.1,
        tail_const_star=0.0,
        gamma=gamma,
        delta=1.0,
    )
    with pytest.raises(UndecidedRootError):
        tail.find_root(series)
    cert = tail.find_root(series, tail_model="asymptotic")
    assert cert.case == "case2"
    assert not cert.certified


@pytest.mark.parametrize("name", catalog.names())
def test_survival_is_nonincreasing_on_builtin_envs(name):
    env = catalog.get(name)
    curve = tail.survival_from_kernel(kernel.kernel_exact(env, 10), kernel.r1(env), 11)
    values = [p.value for p in curve.points]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_asymptotic_model_is_uncertified():
    cert = tail.find_root(zero_kernel(10), tail_model="asymptotic")
    assert not cert.certified


def test_enclosure_contains_closed_form():
    # sum_n h gamma^{n+1} r^{n+1} = h gamma r / (1 - gamma r)
    lo, hi = tail.enclosure(kernel.synthetic_geometric_kernel(0.5, 0.5, 20), 1.5)
    exact = 0.5 * 0.75 / 0.25
    assert lo <= exact <= hi + 1e-12
    assert hi - lo < 0.01


def test_pure_exponential_fit():
    fit = tail.decay_fit(curve_of([0.5 * 0.8**n for n in range(1, 31)]), "pure-exponential", (5, 25))
    assert fit.rate == pytest.approx(0.8, abs=1e-12)
    assert fit.prefactor == pytest.approx(0.5, rel=1e-10)
    assert fit.residual_rms <= 1e-12


def test_power_fit():
    values = [2.0 * 0.9**n * n**-1.5 for n in range(1, 61)]
    fit = tail.decay_fit(curve_of(values), "exponential-times-power", (10, 60), gamma=0.9)
    assert fit.power == pytest.approx(-1.5, abs=1e-10)
    assert fit.rate == 0.9


def test_default_window():
    fit = tail.decay_fit(curve_of([0.7**n for n in range(1, 31)]))
    assert fit.window == (10, 20)


def test_fit_rejects_zero_values():
    with pytest.raises(FitError):
        tail.decay_fit(curve_of([0.5, 0.0, 0.0, 0.0]), window=(1, 4))


def test_verdict():
    weak = envs.classify(catalog.get("E_weak"))
    strong = envs.classify(catalog.get("E_strong2"))
    case2 = tail.find_root(zero_kernel(4))
    assert tail.verdict(weak, case2) == "case2"
    assert tail.verdict(strong, case2) == "inconsistent"
    assert tail.verdict(strong, tail.find_root(synthetic)) == "case1"
    assert math.isinf(case2.T1[1]) or case2.T1[1] < 1.0
