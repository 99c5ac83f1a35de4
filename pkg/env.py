# bpire/env.py
import logging
import math
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

import laws
from exceptions import InitialLawError, NotSubcriticalError, OutOfScopeError, ParameterDomainError
from schemas import EnvModel, EnvSpec, EnvState, HypothesisReport, LatticeCheck, PgfLaw, Regime
from settings import (
    A3_EPSILON,
    INTERMEDIATE_TOL,
    LATTICE_MAX_DENOMINATOR,
    LATTICE_TOL,
    WEAK_ROOT_TOL,
)

logger = logging.getLogger(__name__)


def make_state(offspring: PgfLaw, immigration: PgfLaw) -> EnvState:
    m = laws.mean(offspring)
    if not 0.0 < m < math.inf:
        raise ParameterDomainError(f"offspring mean must lie in (0, inf), got {m}")
    if not math.isfinite(laws.mean(immigration)):
        raise ParameterDomainError("immigration mean must be finite")
    return EnvState(offspring=offspring, immigration=immigration, x=math.log(m))


def make_env(states: Sequence[Tuple[PgfLaw, PgfLaw, float]], label: str = "") -> EnvModel:
    return EnvModel(
        states=tuple(make_state(f, g) for f, g, _ in states),
        probabilities=tuple(p for _, _, p in states),
        label=label,
    )


def from_spec(spec: EnvSpec) -> EnvModel:
    return make_env([(s.offspring, s.immigration, s.prob) for s in spec.states], label=spec.label)


def log_means(env: EnvModel) -> np.ndarray:
    return np.array([state.x for state in env.states])


def probabilities(env: EnvModel) -> np.ndarray:
    return np.asarray(env.probabilities, dtype=float)


def cumulant(env: EnvModel, t: float) -> Tuple[float, float]:
    """(E[e^{tX}], E[X e^{tX}]) as exact finite sums over states."""
    x = log_means(env)
    w = probabilities(env) * np.exp(t * x)
    return math.fsum(w), math.fsum(w * x)


def tilted_probabilities(env: EnvModel, delta: float) -> np.ndarray:
    if not math.isfinite(delta):
        raise ParameterDomainError("tilting exponent must be finite")
    w = probabilities(env) * np.exp(delta * log_means(env))
    return w / math.fsum(w)


def tilt(env: EnvModel, delta: float) -> EnvModel:
    """Reweight state probabilities to p_i e^{delta x_i} / gamma."""
    return EnvModel(states=env.states, probabilities=tuple(tilted_probabilities(env, delta)), label=env.label)


def tilted_mean(env: EnvModel, delta: float) -> float:
    return math.fsum(tilted_probabilities(env, delta) * log_means(env))


def _weak_root(env: EnvModel) -> float:
    def f(t):
        return cumulant(env, t)[1]

    def fprime(t):
        x = log_means(env)
        return math.fsum(probabilities(env) * x * x * np.exp(t * x))

    try:
        beta = optimize.brentq(f, 0.0, 1.0, xtol=WEAK_ROOT_TOL, rtol=4 * np.finfo(float).eps)
        beta = optimize.newton(f, beta, fprime=fprime, tol=WEAK_ROOT_TOL, maxiter=20)
    except (ValueError, RuntimeError) as exc:
        raise OutOfScopeError(f"no root of E[X e^(tX)] = 0 in (0, 1): {exc}") from exc
    if not 0.0 < beta < 1.0:
        raise OutOfScopeError(f"weak-case root {beta} lies outside (0, 1)")
    return float(beta)


def classify(env: EnvModel) -> Regime:
    gamma_0, mean_x = cumulant(env, 0.0)
    if mean_x >= 0.0:
        raise NotSubcriticalError(f"E[X] = {mean_x:.6g} is not negative; the process is not subcritical")
    _, slope_1 = cumulant(env, 1.0)
    if slope_1 < -INTERMEDIATE_TOL:
        kind, beta, delta = "strongly", None, 1.0
    elif slope_1 <= INTERMEDIATE_TOL:
        kind, beta, delta = "intermediate", None, 1.0
    else:
        beta = _weak_root(env)
        kind, delta = "weakly", beta
    gamma, _ = cumulant(env, delta)
    logger.info("environment %r classified %s subcritical (delta=%.10g, gamma=%.10g)", env.label, kind, delta, gamma)
    return Regime(
        kind=kind,
        beta=beta,
        delta=delta,
        gamma=gamma,
        mean_x=mean_x,
        flags=_report(env, 1, kind, delta),
    )


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Hypothesis checks
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def _rationalize(ratio: float) -> Optional[Fraction]:
    frac = Fraction(ratio).limit_denominator(LATTICE_MAX_DENOMINATOR)
    if abs(ratio - float(frac)) <= LATTICE_TOL / frac.denominator**2:
        return frac
    return None


def lattice_span(xs: Sequence[float]) -> Optional[float]:
    """Largest d with every x_i an integer multiple of d, or None when none is found."""
    values = sorted({abs(x) for x in xs if abs(x) > LATTICE_TOL})
    if not values:
        return None
    candidates = set(values)
    candidates.update(abs(u - v) for u in values for v in values if abs(u - v) > LATTICE_TOL)
    base = min(candidates)
    fractions = []
    for v in values:
        frac = _rationalize(v / base)
        if frac is None:
            return None
        fractions.append(frac)
    common = reduce(math.lcm, (f.denominator for f in fractions), 1)
    numerators = [int(f * common) for f in fractions]
    span = base * reduce(math.gcd, numerators) / common
    if span <= LATTICE_TOL:
        return None
    for v in values:
        k = v / span
        if abs(k - round(k)) > LATTICE_TOL * max(1.0, abs(k)):
            return None
    return span


def immigration_mixture(env: EnvModel, u) -> Tuple[np.ndarray, np.ndarray]:
    """E_{G0}[1 - G0(u)] and E_{G0}[(1 - G0(u)) / (1 - G0(0))], G0 drawn from the untilted mixture."""
    u = np.asarray(u, dtype=float)
    plain = np.zeros_like(u)
    normalized = np.zeros_like(u)
    for p, state in zip(env.probabilities, env.states):
        miss = 1.0 - laws.evaluate(state.immigration, u)
        plain += p * miss
        g0 = laws.evaluate(state.immigration, 0.0)
        if g0 < 1.0:
            normalized += p * miss / (1.0 - g0)
    return plain, normalized


def tail_constants(env: EnvModel) -> Tuple[float, float]:
    """(E[G'(1)], E[G'(1) / (1 - G(0))]); states with G = 1 identically add nothing to the second."""
    plain = math.fsum(p * laws.mean(s.immigration) for p, s in zip(env.probabilities, env.states))
    normalized = 0.0
    for p, state in zip(env.probabilities, env.states):
        g0 = laws.evaluate(state.immigration, 0.0)
        if g0 < 1.0:
            normalized += p * laws.mean(state.immigration) / (1.0 - g0)
    return plain, normalized


def require_initial_law(env: EnvModel) -> None:
    for i, state in enumerate(env.states):
        if laws.evaluate(state.immigration, 0.0) >= 1.0:
            raise InitialLawError(f"state {i} has G(0) = 1, so the initial law N(0; s) is undefined")


def _report(env: EnvModel, a: int, kind: str, delta: float) -> HypothesisReport:
    span = lattice_span(log_means(env))
    if span is None:
        lattice = LatticeCheck(status="PASS")
    else:
        logger.warning("environment %r has lattice log-means (span %.6g)", env.label, span)
        lattice = LatticeCheck(status="FLAG", span=span)

    weights = tilted_probabilities(env, delta)
    log_plus = np.array([math.log(max(1.0, laws.theta(s.offspring, a))) for s in env.states])
    a3_log = math.fsum(weights * log_plus)
    a3_power = math.fsum(weights * log_plus ** (2.0 + A3_EPSILON)) if kind == "intermediate" else None
    a3_ok = math.isfinite(a3_log) and (a3_power is None or math.isfinite(a3_power))

    g0 = [laws.evaluate(s.immigration, 0.0) for s in env.states]
    if any(v >= 1.0 for v in g0):
        a4_value, a4_status = None, "FAIL"
    else:
        a4_value = math.fsum(
            p * laws.mean(s.immigration) / (1.0 - v) for p, s, v in zip(env.probabilities, env.states, g0)
        )
        a4_status = "PASS" if math.isfinite(a4_value) else "FAIL"

    return HypothesisReport(
        a=a,
        lattice=lattice,
        a3_log_moment=a3_log,
        a3_power_moment=a3_power,
        a3_status="PASS" if a3_ok else "FAIL",
        a4_value=a4_value,
        a4_status=a4_status,
    )


def hypothesis_report(env: EnvModel, a: int = 1) -> HypothesisReport:
    regime = classify(env)
    return _report(env, a, regime.kind, regime.delta)


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Sampling
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def sample_states(env: EnvModel, rng: np.random.Generator, size, delta: Optional[float] = None) -> np.ndarray:
    """State indices drawn under P, or under the tilted measure when delta is given."""
    p = probabilities(env) if delta is None else tilted_probabilities(env, delta)
    cumulative = np.cumsum(p)
    idx = np.searchsorted(cumulative, rng.random(size), side="right")
    return np.minimum(idx, len(p) - 1)
