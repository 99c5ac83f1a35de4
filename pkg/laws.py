# bpire/laws.py
import math
from typing import Sequence, Union

import numpy as np
from scipy import stats

from exceptions import ParameterDomainError
from schemas import Geometric, LfRep, LinearFractional, PgfLaw, Poisson, Table
from settings import INDIVIDUAL_SUM_LIMIT, THETA_RTOL

ArrayLike = Union[float, np.ndarray]


def _check_unit(s: np.ndarray) -> None:
    if np.any((s < 0.0) | (s > 1.0)) or np.any(np.isnan(s)):
        raise ParameterDomainError("pgf argument must lie in [0, 1]")


def _scalar_or_array(out: np.ndarray) -> ArrayLike:
    return float(out) if out.ndim == 0 else out


def evaluate(law: PgfLaw, s: ArrayLike) -> ArrayLike:
    """F(s) = sum_j F({j}) s^j, vectorised over s."""
    s = np.asarray(s, dtype=float)
    _check_unit(s)
    if isinstance(law, LinearFractional):
        t = 1.0 - s
        out = 1.0 - law.m * t / (1.0 + law.b * t)
    elif isinstance(law, Poisson):
        out = np.exp(law.lam * (s - 1.0))
    elif isinstance(law, Geometric):
        out = (1.0 - law.q) / (1.0 - law.q * s)
    elif isinstance(law, Table):
        out = np.polynomial.polynomial.polyval(s, np.asarray(law.p))
    else:
        raise ParameterDomainError(f"unsupported law {type(law).__name__}")
    return _scalar_or_array(np.asarray(out, dtype=float))


def mean(law: PgfLaw) -> float:
    if isinstance(law, LinearFractional):
        return law.m
    if isinstance(law, Poisson):
        return law.lam
    if isinstance(law, Geometric):
        return law.q / (1.0 - law.q)
    return math.fsum(j * p for j, p in enumerate(law.p))


def second_moment(law: PgfLaw) -> float:
    if isinstance(law, LinearFractional):
        q = law.b / (1.0 + law.b)
        return law.m * (1.0 + q) * (1.0 + law.b)
    if isinstance(law, Poisson):
        return law.lam + law.lam**2
    if isinstance(law, Geometric):
        return law.q * (1.0 + law.q) / (1.0 - law.q) ** 2
    return math.fsum(j * j * p for j, p in enumerate(law.p))


def pmf(law: PgfLaw, k_max: int) -> np.ndarray:
    """P(0..k_max)."""
    k = np.arange(k_max + 1)
    if isinstance(law, LinearFractional):
        q = law.b / (1.0 + law.b)
        out = law.m * np.power(q, np.maximum(k - 1, 0)) / (1.0 + law.b) ** 2
        out[0] = 1.0 - law.m / (1.0 + law.b)
        return out
    if isinstance(law, Poisson):
        return stats.poisson.pmf(k, law.lam)
    if isinstance(law, Geometric):
        return (1.0 - law.q) * np.power(law.q, k)
    table = np.zeros(k_max + 1)
    head = np.asarray(law.p[: k_max + 1])
    table[: head.size] = head
    return table


def _geometric_tail_square_sum(q: float, a: int) -> float:
    # sum_{i>=0} (a+i)^2 q^i
    return a * a / (1.0 - q) + 2.0 * a * q / (1.0 - q) ** 2 + q * (1.0 + q) / (1.0 - q) ** 3


def _poisson_tail_square_sum(lam: float, a: int) -> float:
    total = 0.0
    start = a
    chunk = 1024
    while True:
        j = np.arange(start, start + chunk, dtype=float)
        part = float(np.sum(j * j * stats.poisson.pmf(j, lam)))
        total += part
        start += chunk
        if start > lam and part <= THETA_RTOL * total:
            return total


def theta(law: PgfLaw, a: int) -> float:
    """Standardized truncated second moment sum_{j>=a} j^2 F({j}) / m(F)^2."""
    if a < 1:
        raise ParameterDomainError("truncation level a must be a positive integer")
    m = mean(law)
    if m <= 0.0:
        raise ParameterDomainError("theta needs an offspring law with positive mean")
    if isinstance(law, LinearFractional):
        q = law.b / (1.0 + law.b)
        tail = law.m / (1.0 + law.b) ** 2 * q ** (a - 1) * _geometric_tail_square_sum(q, a)
    elif isinstance(law, Poisson):
        tail = _poisson_tail_square_sum(law.lam, a)
    elif isinstance(law, Geometric):
        tail = (1.0 - law.q) * law.q**a * _geometric_tail_square_sum(law.q, a)
    else:
        tail = math.fsum(j * j * p for j, p in enumerate(law.p) if j >= a)
    return tail / (m * m)


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Linear-fractional composition
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def lf_identity() -> LfRep:
    return LfRep(m=1.0, b=0.0)


def as_lf_rep(law: LinearFractional) -> LfRep:
    return LfRep(m=law.m, b=law.b)


def lf_eval(rep: LfRep, s: ArrayLike) -> ArrayLike:
    s = np.asarray(s, dtype=float)
    _check_unit(s)
    t = 1.0 - s
    return _scalar_or_array(1.0 - rep.m * t / (1.0 + rep.b * t))


def lf_compose(outer: LfRep, inner: LfRep) -> LfRep:
    """Representation of outer(inner(s))."""
    return LfRep(m=outer.m * inner.m, b=inner.b + outer.b * inner.m)


def compose_chain(offspring_laws: Sequence[PgfLaw], s: ArrayLike) -> ArrayLike:
    """F_{0,n}(s) = F_1(F_2(...F_n(s)...)); the empty chain is the identity."""
    if all(isinstance(law, LinearFractional) for law in offspring_laws):
        rep = lf_identity()
        for law in offspring_laws:
            rep = lf_compose(rep, as_lf_rep(law))
        return lf_eval(rep, s)
    value = s
    for law in reversed(offspring_laws):
        value = evaluate(law, value)
    return value


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Sampling
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def sample(law: PgfLaw, rng: np.random.Generator, size=None):
    if isinstance(law, LinearFractional):
        q = law.b / (1.0 + law.b)
        nonzero = rng.random(size) < law.m / (1.0 + law.b)
        out = np.where(nonzero, rng.geometric(1.0 - q, size), 0)
    elif isinstance(law, Poisson):
        out = rng.poisson(law.lam, size)
    elif isinstance(law, Geometric):
        out = rng.geometric(1.0 - law.q, size) - 1
    else:
        out = rng.choice(len(law.p), size=size, p=np.asarray(law.p))
    if size is None:
        return int(out)
    return np.asarray(out, dtype=np.int64)


def _batch_sum(law: PgfLaw, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if isinstance(law, Poisson):
        return rng.poisson(law.lam * counts)
    if isinstance(law, Geometric):
        return rng.negative_binomial(counts, 1.0 - law.q)
    if isinstance(law, LinearFractional):
        q = law.b / (1.0 + law.b)
        nonzero = rng.binomial(counts, law.m / (1.0 + law.b))
        extra = np.zeros_like(nonzero)
        has = nonzero > 0
        if q > 0.0 and np.any(has):
            extra[has] = rng.negative_binomial(nonzero[has], 1.0 - q)
        return nonzero + extra
    remaining = counts.copy()
    mass_left = 1.0
    total = np.zeros_like(counts)
    for j, p in enumerate(law.p):
        if j == len(law.p) - 1 or mass_left <= 0.0:
            taken = remaining
        else:
            taken = rng.binomial(remaining, min(1.0, p / mass_left))
        total += j * taken
        remaining = remaining - taken
        mass_left -= p
    return total


def sample_sum(law: PgfLaw, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """For each entry, the sum of counts[i] independent draws from law."""
    counts = np.asarray(counts, dtype=np.int64)
    out = np.zeros(counts.shape, dtype=np.int64)
    small = (counts > 0) & (counts < INDIVIDUAL_SUM_LIMIT)
    if np.any(small):
        c = counts[small]
        draws = sample(law, rng, int(c.sum()))
        owner = np.repeat(np.arange(c.size), c)
        out[small] = np.bincount(owner, weights=draws, minlength=c.size).astype(np.int64)
    large = counts >= INDIVIDUAL_SUM_LIMIT
    if np.any(large):
        out[large] = _batch_sum(law, counts[large], rng)
    return out
