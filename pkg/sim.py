# bpire/sim.py
import hashlib
import logging
import math
import threading
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

import env as envs
import laws
from dependencies import TASK_LIFE, TASK_WALK, get_rng, get_streams, run_ordered, split
from exceptions import ParameterDomainError, PopulationOverflowError, SampleSizeError
from schemas import EnvModel, Estimate, LifePeriodSample, SurvivalCurve, SurvivalPoint, WalkSample, WalkStats
from settings import MC_BATCH, MIN_UNCENSORED, POPULATION_LIMIT, PROGRESS, TRAJECTORY_CAP

logger = logging.getLogger(__name__)


@dataclass
class LifePeriodBatch:
    zeta: np.ndarray
    censored: np.ndarray
    peak: np.ndarray
    cap: int
    seed: Optional[int] = None
    workers: int = 1

    def __len__(self) -> int:
        return int(self.zeta.size)

    def to_samples(self):
        return [
            LifePeriodSample(
                zeta=int(z), censored=bool(c), peak_population=int(p), environment_seed=f"{self.seed}/{self.workers}/{i}"
            )
            for i, (z, c, p) in enumerate(zip(self.zeta, self.censored, self.peak))
        ]


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Life periods of W
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def _initial_population(env: EnvModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """W_0 from N(0; s): a state Q_0, then G_{Q_0} conditioned to be positive."""
    states = envs.sample_states(env, rng, size)
    w0 = np.zeros(size, dtype=np.int64)
    pending = np.arange(size)
    while pending.size:
        for k, state in enumerate(env.states):
            members = pending[states[pending] == k]
            if members.size:
                w0[members] = laws.sample(state.immigration, rng, members.size)
        pending = pending[w0[pending] == 0]
    return w0


def simulate_life_periods(
    env: EnvModel, rng: np.random.Generator, size: int, cap: int = TRAJECTORY_CAP
) -> LifePeriodBatch:
    """Run size independent copies of W until W_n = 0 or generation cap."""
    if cap < 1:
        raise ParameterDomainError("cap must be at least 1")
    envs.require_initial_law(env)
    w = _initial_population(env, rng, size)
    peak = w.copy()
    zeta = np.full(size, cap, dtype=np.int64)
    alive = np.arange(size)
    for n in range(1, cap + 1):
        if not alive.size:
            break
        states = envs.sample_states(env, rng, alive.size)
        current = w[alive]
        nxt = np.zeros_like(current)
        for k, state in enumerate(env.states):
            group = states == k
            if not np.any(group):
                continue
            births = laws.sample_sum(state.offspring, current[group], rng)
            joined = births > 0
            if np.any(joined):
                births[joined] += laws.sample(state.immigration, rng, int(joined.sum()))
            nxt[group] = births
        if np.any(nxt < 0) or np.any(nxt > POPULATION_LIMIT):
            raise PopulationOverflowError(f"population exceeded {POPULATION_LIMIT} in generation {n}")
        w[alive] = nxt
        peak[alive] = np.maximum(peak[alive], nxt)
        died = nxt == 0
        zeta[alive[died]] = n
        alive = alive[~died]
    censored = np.zeros(size, dtype=bool)
    censored[alive] = True
    if alive.size:
        logger.warning("%d of %d trajectories censored at cap %d", alive.size, size, cap)
    return LifePeriodBatch(zeta=zeta, censored=censored, peak=peak, cap=cap)


def simulate_life_period(env: EnvModel, rng: np.random.Generator, cap: int = TRAJECTORY_CAP) -> LifePeriodSample:
    token = hashlib.sha256(repr(rng.bit_generator.state).encode()).hexdigest()[:16]
    batch = simulate_life_periods(env, rng, 1, cap)
    return LifePeriodSample(
        zeta=int(batch.zeta[0]), censored=bool(batch.censored[0]), peak_population=int(batch.peak[0]), environment_seed=token
    )


def _life_stream(env: EnvModel, count: int, rng: np.random.Generator, cap: int, bar: tqdm, lock: threading.Lock):
    parts = []
    done = 0
    while done < count:
        size = min(MC_BATCH, count - done)
        parts.append(simulate_life_periods(env, rng, size, cap))
        done += size
        with lock:
            bar.update(size)
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return LifePeriodBatch(zeta=empty, censored=empty.astype(bool), peak=empty, cap=cap)
    return LifePeriodBatch(
        zeta=np.concatenate([p.zeta for p in parts]),
        censored=np.concatenate([p.censored for p in parts]),
        peak=np.concatenate([p.peak for p in parts]),
        cap=cap,
    )


def simulate(
    env: EnvModel, samples: int, seed: int = 1, workers: int = 1, cap: int = TRAJECTORY_CAP
) -> LifePeriodBatch:
    """Parallel driver; one Philox stream per worker, results joined in stream order."""
    if samples < 1:
        raise SampleSizeError("samples must be positive")
    envs.require_initial_law(env)
    streams = get_streams(seed, workers, TASK_LIFE)
    lock = threading.Lock()
    with tqdm(total=samples, disable=not PROGRESS, desc="life periods") as bar:
        args = [(env, count, rng, cap, bar, lock) for count, rng in zip(split(samples, workers), streams)]
        parts = run_ordered(_life_stream, args, workers)
    batch = LifePeriodBatch(
        zeta=np.concatenate([p.zeta for p in parts]),
        censored=np.concatenate([p.censored for p in parts]),
        peak=np.concatenate([p.peak for p in parts]),
        cap=cap,
        seed=seed,
        workers=workers,
    )
    logger.info("simulated %d life periods (%d censored)", samples, int(batch.censored.sum()))
    return batch


def empirical_survival(samples: Union[LifePeriodBatch, Sequence[LifePeriodSample]], N: int) -> SurvivalCurve:
    if isinstance(samples, LifePeriodBatch):
        zeta, censored, cap = samples.zeta, samples.censored, samples.cap
    else:
        zeta = np.array([s.zeta for s in samples], dtype=np.int64)
        censored = np.array([s.censored for s in samples], dtype=bool)
        cap = int(zeta[censored].min()) if censored.any() else None
    if zeta.size == 0:
        raise SampleSizeError("no life-period samples")
    if N < 1:
        raise ParameterDomainError("N must be at least 1")
    if cap is not None and N >= cap:
        raise ParameterDomainError(f"N={N} is not below the trajectory cap {cap}")
    uncensored = int((~censored).sum())
    if uncensored < MIN_UNCENSORED:
        logger.warning("only %d uncensored samples; half-widths are unreliable", uncensored)
    count = zeta.size
    points = []
    for n in range(1, N + 1):
        r = float(np.count_nonzero(zeta > n)) / count
        points.append(
            SurvivalPoint(n=n, value=r, half_width=3.0 * math.sqrt(r * (1.0 - r) / count), provenance="empirical")
        )
    return SurvivalCurve(points=points)


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Associated random walk
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def sample_walk(env: EnvModel, rng: np.random.Generator, n: int, delta: Optional[float] = None) -> WalkSample:
    if n < 1:
        raise ParameterDomainError("n must be at least 1")
    steps = envs.log_means(env)[envs.sample_states(env, rng, n, delta)]
    path = np.concatenate([[0.0], np.cumsum(steps)])
    return WalkSample(path=path.tolist(), L_n=float(path.min()), M_n=float(path[1:].max()), tau_n=int(np.argmin(path)))


def _estimate(total: float, total_sq: float, count: int) -> Estimate:
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
    return Estimate(value=mean, se=math.sqrt(var / count))


def walk_stats(
    env: EnvModel,
    rng: Union[np.random.Generator, int],
    n: int,
    samples: int,
    tilted: bool = False,
    theta: float = 1.0,
) -> WalkStats:
    """Moments of (S_n, L_n, M_n, tau(n)) and the two killed exponential functionals.

    An integer rng is a seed for the walk stream family.
    """
    if n < 1:
        raise ParameterDomainError("n must be at least 1")
    if samples < 2:
        raise SampleSizeError("walk_stats needs at least two samples")
    if not isinstance(rng, np.random.Generator):
        rng = get_rng(int(rng), TASK_WALK)
    delta = envs.classify(env).delta if tilted else None
    x = envs.log_means(env)
    names = ("S", "L", "M", "tau", "max_neg", "min_nonneg", "exp_max_neg", "exp_min_nonneg")
    sums = dict.fromkeys(names, 0.0)
    squares = dict.fromkeys(names, 0.0)
    histogram = np.zeros(n + 1, dtype=np.int64)
    done = 0
    while done < samples:
        size = min(MC_BATCH, samples - done)
        path = np.zeros((size, n + 1))
        path[:, 1:] = np.cumsum(x[envs.sample_states(env, rng, (size, n), delta)], axis=1)
        s_n = path[:, -1]
        lowest = path.min(axis=1)
        highest = path[:, 1:].max(axis=1)
        tau = np.argmin(path, axis=1)
        below = highest < 0.0
        above = lowest >= 0.0
        values = {
            "S": s_n,
            "L": lowest,
            "M": highest,
            "tau": tau.astype(float),
            "max_neg": below.astype(float),
            "min_nonneg": above.astype(float),
            "exp_max_neg": np.where(below, np.exp(theta * s_n), 0.0),
            "exp_min_nonneg": np.where(above, np.exp(-theta * s_n), 0.0),
        }
        for name, v in values.items():
            sums[name] += float(v.sum())
            squares[name] += float(np.dot(v, v))
        histogram += np.bincount(tau, minlength=n + 1)
        done += size
    est = {name: _estimate(sums[name], squares[name], samples) for name in names}
    return WalkStats(
        n=n,
        samples=samples,
        tilted=tilted,
        theta=theta,
        mean_S=est["S"],
        mean_L=est["L"],
        mean_M=est["M"],
        mean_tau=est["tau"],
        p_max_negative=est["max_neg"],
        p_min_nonnegative=est["min_nonneg"],
        exp_max_negative=est["exp_max_neg"],
        exp_min_nonnegative=est["exp_min_nonneg"],
        tau_histogram=histogram.tolist(),
    )
