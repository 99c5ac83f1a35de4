# bpire/kernel.py
import logging
import math
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

import env as envs
import laws
from dependencies import TASK_KERNEL, get_streams, run_ordered, split
from exceptions import BudgetExceededError, ParameterDomainError, SampleSizeError
from schemas import EnvModel, Estimate, KernelEntry, KernelSeries, PgfLaw
from settings import KERNEL_BUDGET, MC_BATCH, MIN_MC_SAMPLES, ROOT_MAX_N

logger = logging.getLogger(__name__)

Mode = Literal["direct", "tilted"]
BSpec = Literal["G0", "G0-normalized", "power"]
SArg = Union[float, Literal["next"]]


def _apply(law_list: Sequence[PgfLaw], idx: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Evaluate law_list[idx[i]] at v[i] for every i."""
    out = np.empty_like(v)
    for k, law in enumerate(law_list):
        mask = idx == k
        if np.any(mask):
            out[mask] = laws.evaluate(law, v[mask])
    return out


def _offspring(env: EnvModel) -> List[PgfLaw]:
    return [s.offspring for s in env.states]


def _immigration(env: EnvModel) -> List[PgfLaw]:
    return [s.immigration for s in env.states]


def _entry_cost(k: int, n_max: int) -> int:
    return sum(k ** (n + 1) for n in range(n_max + 1))


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Exact enumeration
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def _expand_levels(env: EnvModel, last: int, n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Partial H_n, H*_n sums over all sequences ending in state `last`.

    Sequences grow backwards in time: prepending state k to a suffix with
    composition v multiplies the product by G_k(v) and maps v to F_k(v).
    """
    p = envs.probabilities(env)
    offspring, immigration = _offspring(env), _immigration(env)
    v = np.array([laws.evaluate(offspring[last], 0.0)])
    prod = np.ones(1)
    weight = np.array([p[last]])
    h = np.zeros(n_max + 1)
    hs = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        if n > 0:
            v_next, prod_next, weight_next = [], [], []
            for k in range(len(p)):
                prod_next.append(prod * laws.evaluate(immigration[k], v))
                v_next.append(np.asarray(laws.evaluate(offspring[k], v)))
                weight_next.append(weight * p[k])
            v = np.concatenate(v_next)
            prod = np.concatenate(prod_next)
            weight = np.concatenate(weight_next)
        plain, normalized = envs.immigration_mixture(env, v)
        h[n] = np.sum(weight * prod * plain)
        hs[n] = np.sum(weight * prod * normalized)
    return h, hs


def max_exact_n(env: EnvModel, budget: int = KERNEL_BUDGET, limit: int = ROOT_MAX_N) -> int:
    """Largest n_max <= limit that kernel_exact can enumerate within budget; -1 if none."""
    k = len(env.states)
    n, cost = -1, 0
    while n < limit and cost + k ** (n + 2) <= budget:
        cost += k ** (n + 2)
        n += 1
    return n


def kernel_exact(env: EnvModel, n_max: int, workers: int = 1, budget: int = KERNEL_BUDGET) -> KernelSeries:
    """H_0..H_{n_max} and H*_1..H*_{n_max} by summing over every environment sequence."""
    if n_max < 0:
        raise ParameterDomainError("n_max must be non-negative")
    cost = _entry_cost(len(env.states), n_max)
    if cost > budget:
        raise BudgetExceededError(
            f"exact enumeration needs {cost} sequence evaluations (budget {budget}); use kernel_mc instead"
        )
    regime = envs.classify(env)
    parts = run_ordered(_expand_levels, [(env, k, n_max) for k in range(len(env.states))], workers)
    h = np.sum(np.stack([part[0] for part in parts]), axis=0)
    hs = np.sum(np.stack([part[1] for part in parts]), axis=0)
    c_plain, c_normalized = envs.tail_constants(env)
    logger.info("exact kernel for %r up to n=%d (%d sequence evaluations)", env.label, n_max, cost)
    return KernelSeries(
        H=[KernelEntry(n=n, value=float(h[n]), method="exact") for n in range(n_max + 1)],
        Hstar=[KernelEntry(n=n, value=float(hs[n]), method="exact") for n in range(1, n_max + 1)],
        tail_const=c_plain,
        tail_const_star=c_normalized,
        gamma=regime.gamma,
        delta=regime.delta,
    )


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Monte Carlo
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def _kernel_integrand(env: EnvModel, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Integrands of H_n and H*_n for sequences idx[:, 0..n] = Q_1..Q_{n+1}."""
    offspring, immigration = _offspring(env), _immigration(env)
    length = idx.shape[1]
    v = _apply(offspring, idx[:, length - 1], np.zeros(idx.shape[0]))
    prod = np.ones(idx.shape[0])
    for col in range(length - 2, -1, -1):
        prod *= _apply(immigration, idx[:, col], v)
        v = _apply(offspring, idx[:, col], v)
    plain, normalized = envs.immigration_mixture(env, v)
    return prod * plain, prod * normalized


def _mc_stream(
    env: EnvModel, n: int, count: int, rng: np.random.Generator, tilted: bool, delta: float, gamma: float
) -> Tuple[np.ndarray, np.ndarray]:
    x = envs.log_means(env)
    plain_parts, normalized_parts = [], []
    done = 0
    while done < count:
        size = min(MC_BATCH, count - done)
        idx = envs.sample_states(env, rng, (size, n + 1), delta if tilted else None)
        plain, normalized = _kernel_integrand(env, idx)
        if tilted:
            weight = np.exp((n + 1) * math.log(gamma) - delta * x[idx].sum(axis=1))
            plain, normalized = plain * weight, normalized * weight
        plain_parts.append(plain)
        normalized_parts.append(normalized)
        done += size
    return np.concatenate(plain_parts), np.concatenate(normalized_parts)


def _summarize(values: np.ndarray) -> Estimate:
    if np.ptp(values) == 0.0:
        return Estimate(value=float(values[0]), se=0.0)
    return Estimate(value=float(values.mean()), se=float(values.std(ddof=1) / math.sqrt(values.size)))


def kernel_mc(
    env: EnvModel,
    n: int,
    samples: int,
    mode: Mode = "tilted",
    seed: int = 1,
    workers: int = 1,
) -> Tuple[Estimate, Estimate]:
    """Unbiased estimates of (H_n, H*_n); tilted mode samples under the tilted measure and reweights."""
    if samples < MIN_MC_SAMPLES:
        raise SampleSizeError(f"kernel_mc needs at least {MIN_MC_SAMPLES} samples, got {samples}")
    if n < 0:
        raise ParameterDomainError("n must be non-negative")
    regime = envs.classify(env)
    streams = get_streams(seed, workers, TASK_KERNEL, n)
    args = [
        (env, n, count, rng, mode == "tilted", regime.delta, regime.gamma)
        for count, rng in zip(split(samples, workers), streams)
    ]
    parts = run_ordered(_mc_stream, args, workers)
    plain = np.concatenate([part[0] for part in parts])
    normalized = np.concatenate([part[1] for part in parts])
    return _summarize(plain), _summarize(normalized)


def kernel_series_mc(
    env: EnvModel, n_max: int, samples: int, mode: Mode = "tilted", seed: int = 1, workers: int = 1
) -> KernelSeries:
    regime = envs.classify(env)
    method = "tilted-mc" if mode == "tilted" else "direct-mc"
    h, hs = [], []
    for n in range(n_max + 1):
        plain, normalized = kernel_mc(env, n, samples, mode, seed, workers)
        h.append(KernelEntry(n=n, value=plain.value, se=plain.se, method=method))
        if n >= 1:
            hs.append(KernelEntry(n=n, value=normalized.value, se=normalized.se, method=method))
        logger.debug("kernel n=%d: H=%.6g +- %.2g", n, plain.value, plain.se)
    c_plain, c_normalized = envs.tail_constants(env)
    return KernelSeries(
        H=h, Hstar=hs, tail_const=c_plain, tail_const_star=c_normalized, gamma=regime.gamma, delta=regime.delta
    )


def kernel_hybrid(
    env: EnvModel, n_max: int, samples: int, seed: int = 1, workers: int = 1, budget: int = KERNEL_BUDGET
) -> KernelSeries:
    """Exact entries while enumeration fits the budget, tilted Monte Carlo beyond."""
    n_exact = max_exact_n(env, budget, n_max)
    if n_exact < 0:
        return kernel_series_mc(env, n_max, samples, "tilted", seed, workers)
    series = kernel_exact(env, n_exact, workers, budget)
    if n_exact == n_max:
        return series
    logger.info("switching to tilted Monte Carlo beyond n=%d", n_exact)
    h, hs = list(series.H), list(series.Hstar)
    for n in range(n_exact + 1, n_max + 1):
        plain, normalized = kernel_mc(env, n, samples, "tilted", seed, workers)
        h.append(KernelEntry(n=n, value=plain.value, se=plain.se, method="tilted-mc"))
        hs.append(KernelEntry(n=n, value=normalized.value, se=normalized.se, method="tilted-mc"))
    return series.model_copy(update={"H": h, "Hstar": hs})


def synthetic_geometric_kernel(h: float, gamma: float, n_max: int) -> KernelSeries:
    """H_n = h gamma^{n+1}, H* = 0."""
    return KernelSeries(
        H=[KernelEntry(n=n, value=h * gamma ** (n + 1), method="synthetic") for n in range(n_max + 1)],
        Hstar=[KernelEntry(n=n, value=0.0, method="synthetic") for n in range(1, n_max + 1)],
        tail_const=h,
        tail_const_star=0.0,
        gamma=gamma,
        delta=1.0,
    )


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       R_1 and the B_n(s) functional
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def r1(env: EnvModel) -> float:
    """P(zeta > 1) = 1 - E[(G0(F_1(0)) - G0(0)) / (1 - G0(0))]."""
    envs.require_initial_law(env)
    p = envs.probabilities(env)
    f0 = np.array([laws.evaluate(s.offspring, 0.0) for s in env.states])
    stopped = 0.0
    for pa, state in zip(p, env.states):
        g0 = laws.evaluate(state.immigration, 0.0)
        stopped += pa * math.fsum(p * (laws.evaluate(state.immigration, f0) - g0) / (1.0 - g0))
    return 1.0 - stopped


def _all_sequences(k: int, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros((1, 0), dtype=np.intp)
    return np.indices((k,) * length).reshape(length, -1).T


def _b_integrand(env: EnvModel, idx: np.ndarray, s: SArg, B: BSpec, z: int) -> np.ndarray:
    offspring, immigration = _offspring(env), _immigration(env)
    rows, length = idx.shape
    if s == "next":
        v = _apply(offspring, idx[:, length - 1], np.zeros(rows))
        cols = range(length - 2, -1, -1)
    else:
        v = np.full(rows, float(s))
        cols = range(length - 1, -1, -1)
    prod = np.ones(rows)
    for col in cols:
        prod *= _apply(immigration, idx[:, col], v)
        v = _apply(offspring, idx[:, col], v)
    if B == "power":
        miss = 1.0 - v**z
    else:
        plain, normalized = envs.immigration_mixture(env, v)
        miss = plain if B == "G0" else normalized
    return miss * prod


def _b_length(s: SArg, n: int) -> int:
    if s == "next":
        return n + 1
    if not 0.0 <= float(s) <= 1.0:
        raise ParameterDomainError("s must lie in [0, 1] or be 'next'")
    return n


def _exact_terms(env: EnvModel, s: SArg, B: BSpec, n: int, z: int, budget: int):
    length = _b_length(s, n)
    k = len(env.states)
    if k**length > budget:
        raise BudgetExceededError(f"{k}^{length} sequences exceed the budget {budget}; use method='tilted-mc'")
    regime = envs.classify(env)
    idx = _all_sequences(k, length)
    p = envs.probabilities(env)
    weight = np.prod(p[idx], axis=1) * regime.gamma ** (-length)
    return idx, weight * _b_integrand(env, idx, s, B, z)


def b_series(
    env: EnvModel,
    s: SArg,
    B: BSpec,
    n: int,
    method: Literal["exact", "tilted-mc"] = "exact",
    z: int = 1,
    samples: int = 100_000,
    seed: int = 1,
    workers: int = 1,
    budget: int = KERNEL_BUDGET,
) -> Estimate:
    """B_n(s) = E_tilted[(1 - B(F_{0,n}(s))) prod_i G_i(F_{i,n}(s)) e^{-delta S_n}].

    s="next" means s = F_{n+1}(0) with that step included in the weight, so
    B="G0" gives gamma^{-n-1} H_n and B="G0-normalized" gives gamma^{-n-1} H*_n.
    """
    if n < 0:
        raise ParameterDomainError("n must be non-negative")
    if B == "power" and z < 1:
        raise ParameterDomainError("power initial law needs z >= 1")
    if method == "exact":
        _, terms = _exact_terms(env, s, B, n, z, budget)
        return Estimate(value=math.fsum(terms), se=0.0)
    if samples < MIN_MC_SAMPLES:
        raise SampleSizeError(f"b_series needs at least {MIN_MC_SAMPLES} samples, got {samples}")
    length = _b_length(s, n)
    regime = envs.classify(env)
    x = envs.log_means(env)

    def stream(count: int, rng: np.random.Generator) -> np.ndarray:
        parts = []
        done = 0
        while done < count:
            size = min(MC_BATCH, count - done)
            idx = envs.sample_states(env, rng, (size, length), regime.delta)
            parts.append(_b_integrand(env, idx, s, B, z) * np.exp(-regime.delta * x[idx].sum(axis=1)))
            done += size
        return np.concatenate(parts)

    streams = get_streams(seed, workers, TASK_KERNEL, 10**6 + n)
    values = np.concatenate(run_ordered(stream, list(zip(split(samples, workers), streams)), workers))
    return _summarize(values)


def b_series_by_argmin(env: EnvModel, s: float, B: BSpec, n: int, z: int = 1, budget: int = KERNEL_BUDGET) -> np.ndarray:
    """B_{k,n}(s) for k = 0..n, split by the first index tau(n) where S attains its minimum."""
    if s == "next":
        raise ParameterDomainError("the argmin decomposition needs a real s")
    idx, terms = _exact_terms(env, s, B, n, z, budget)
    x = envs.log_means(env)
    path = np.concatenate([np.zeros((idx.shape[0], 1)), np.cumsum(x[idx], axis=1)], axis=1)
    tau = np.argmin(path, axis=1)
    return np.bincount(tau, weights=terms, minlength=n + 1)


def survival_bound_gap(env: EnvModel, n: int, budget: int = KERNEL_BUDGET) -> float:
    """Largest excess of 1 - F_{0,n}(0) over exp(min_k S_k) across all length-n sequences."""
    k = len(env.states)
    if k**n > budget:
        raise BudgetExceededError(f"{k}^{n} sequences exceed the budget {budget}")
    idx = _all_sequences(k, n)
    offspring = _offspring(env)
    v = np.zeros(idx.shape[0])
    for col in range(n - 1, -1, -1):
        v = _apply(offspring, idx[:, col], v)
    x = envs.log_means(env)
    path = np.concatenate([np.zeros((idx.shape[0], 1)), np.cumsum(x[idx], axis=1)], axis=1)
    return float(np.max((1.0 - v) - np.exp(path.min(axis=1))))
