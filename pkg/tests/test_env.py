import math
import os
import sys

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import catalog
import env as envs
from exceptions import InitialLawError, NotSubcriticalError, ParameterDomainError
from schemas import EnvModel, EnvSpec, LinearFractional, Poisson, Table

weak = catalog.get("E_weak")


def test_weak_lattice_classification():
    regime = envs.classify(weak)
    assert regime.kind == "weakly"
    assert regime.beta == pytest.approx(0.5 * math.log(7.0 / 3.0), abs=1e-10)
    assert regime.gamma == pytest.approx(2.0 * math.sqrt(0.21), abs=1e-10)
    assert regime.delta == regime.beta
    assert regime.flags.lattice.status == "FLAG"
    assert regime.flags.lattice.span == pytest.approx(1.0)


def test_intermediate_classification():
    regime = envs.classify(catalog.get("E_inter"))
    assert regime.kind == "intermediate"
    assert regime.delta == 1.0
    assert regime.gamma == pytest.approx(1.0 / math.cosh(1.0), abs=1e-10)
    assert regime.flags.a3_power_moment is not None


def test_strong_classification():
    regime = envs.classify(catalog.get("E_strong2"))
    assert regime.kind == "strongly"
    assert regime.gamma == pytest.approx(0.66, abs=1e-12)
    assert regime.flags.lattice.status == "PASS"


def test_single_state():
    regime = envs.classify(catalog.get("D1"))
    assert regime.kind == "strongly"
    assert regime.gamma == pytest.approx(0.5, abs=1e-15)


def test_not_subcritical():
    critical = envs.make_env([(LinearFractional(m=1.0, b=1.0), Poisson(lam=1.0), 1.0)])
    with pytest.raises(NotSubcriticalError):
        envs.classify(critical)


def test_tilting():
    regime = envs.classify(weak)
    tilted = envs.tilt(weak, regime.delta)
    assert tilted.probabilities[0] == pytest.approx(0.5, abs=1e-12)
    assert envs.tilted_mean(weak, regime.delta) == pytest.approx(0.0, abs=1e-12)
    back = envs.tilt(tilted, -regime.delta)
    assert np.allclose(back.probabilities, weak.probabilities, atol=1e-12)


def test_tilt_rejects_infinite_exponent():
    with pytest.raises(ParameterDomainError):
        envs.tilt(weak, math.inf)


def test_lattice_span():
    assert envs.lattice_span([1.0, -1.0]) == pytest.approx(1.0)
    assert envs.lattice_span([0.5, -1.5]) == pytest.approx(0.5)
    assert envs.lattice_span([math.log(2.5), math.log(0.3)]) is None


def test_a4_fails_without_immigration():
    silent = envs.make_env(
        [
            (LinearFractional(m=0.5, b=0.5), Table(p=(1.0,)), 0.5),
            (LinearFractional(m=0.4, b=0.5), Poisson(lam=1.0), 0.5),
        ]
    )
    report = envs.hypothesis_report(silent)
    assert report.a4_status == "FAIL"
    with pytest.raises(InitialLawError):
        envs.require_initial_law(silent)


def test_tail_constants():
    plain, normalized = envs.tail_constants(catalog.get("D1"))
    assert plain == pytest.approx(1.0)
    assert normalized == pytest.approx(1.0 / (1.0 - math.exp(-1.0)))


def test_from_spec_normalizes():
    spec = EnvSpec.model_validate(
        {
            "label": "pair",
            "states": [
                {"offspring": {"type": "lf", "m": 0.5, "b": 0.5}, "immigration": {"type": "poisson", "lambda": 1.0}, "prob": 0.25},
                {"offspring": {"type": "geometric", "q": 0.2}, "immigration": {"type": "table", "p": [0.5, 0.5]}, "prob": 0.75},
            ],
        }
    )
    model = envs.from_spec(spec)
    assert model.label == "pair"
    assert model.states[1].x == pytest.approx(math.log(0.25))


def test_sample_states_frequencies():
    rng = np.random.default_rng(3)
    draws = envs.sample_states(weak, rng, 100_000)
    assert abs(np.mean(draws == 0) - 0.3) <= 4 * math.sqrt(0.21 / 100_000)
    tilted = envs.sample_states(weak, rng, 100_000, envs.classify(weak).delta)
    assert abs(np.mean(tilted == 0) - 0.5) <= 4 * math.sqrt(0.25 / 100_000)


def test_cumulant_values():
    e = math.e
    mass, slope = envs.cumulant(weak, 1.0)
    assert mass == pytest.approx(0.3 * e + 0.7 / e, abs=1e-12)
    assert slope == pytest.approx(0.3 * e - 0.7 / e, abs=1e-12)
    assert (mass, slope) == pytest.approx((1.073000, 0.557969), abs=1e-6)

    rare = envs.make_env([(s.offspring, s.immigration, p) for s, p in zip(weak.states, (0.1, 0.9))])
    assert envs.cumulant(rare, 1.0) == pytest.approx((0.602920, -0.059263), abs=1e-6)

    assert envs.cumulant(weak, 0.0) == pytest.approx((1.0, -0.4), abs=1e-15)


@pytest.mark.parametrize("name", ["E_weak", "E_weak2", "E_inter", "E_strong2"])
def test_cumulant_is_convex(name):
    env = catalog.get(name)
    grid = np.linspace(-3.0, 3.0, 61)
    mass = np.array([envs.cumulant(env, t)[0] for t in grid])
    slope = np.array([envs.cumulant(env, t)[1] for t in grid])
    assert np.all(mass[:-2] - 2.0 * mass[1:-1] + mass[2:] >= -1e-12)
    assert np.all(np.diff(slope) >= -1e-12)


def test_a4_value_on_weak_lattice():
    report = envs.hypothesis_report(weak)
    assert report.a4_status == "PASS"
    assert report.a4_value == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), abs=1e-12)
    assert report.a4_value == pytest.approx(1.581977, abs=1e-6)


@st.composite
def lf_environments(draw):
    k = draw(st.integers(2, 4))
    states = []
    for _ in range(k):
        b = draw(st.floats(0.0, 2.0))
        m = draw(st.floats(0.05, 1.0)) * (1.0 + b)
        states.append((LinearFractional(m=m, b=b), Poisson(lam=1.0)))
    weights = [draw(st.floats(0.05, 1.0)) for _ in range(k)]
    total = math.fsum(weights)
    env = envs.make_env([(f, g, w / total) for (f, g), w in zip(states, weights)])
    assume(envs.cumulant(env, 0.0)[1] < -0.05)
    assume(abs(envs.cumulant(env, 1.0)[1]) > 1e-6)
    return env


def assert_same_regime(a, b):
    assert a.kind == b.kind
    assert a.delta == pytest.approx(b.delta, rel=1e-9)
    assert a.gamma == pytest.approx(b.gamma, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(lf_environments(), st.randoms(use_true_random=False))
def test_classify_ignores_state_order(env, random):
    order = list(range(len(env.states)))
    random.shuffle(order)
    shuffled = EnvModel(
        states=tuple(env.states[i] for i in order),
        probabilities=tuple(env.probabilities[i] for i in order),
    )
    assert_same_regime(envs.classify(env), envs.classify(shuffled))


@settings(max_examples=60, deadline=None)
@given(lf_environments(), st.floats(0.1, 0.9))
def test_classify_ignores_split_states(env, share):
    p = env.probabilities[0]
    split = EnvModel(
        states=(env.states[0],) + env.states,
        probabilities=(p * share, p - p * share) + env.probabilities[1:],
    )
    assert_same_regime(envs.classify(env), envs.classify(split))
