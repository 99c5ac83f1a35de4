# bpire/harmonic.py
import logging
import math
from typing import List, Literal, Sequence, Tuple

import numpy as np

import env as envs
from dependencies import TASK_RENEWAL, get_streams, run_ordered, split
from exceptions import NonMeanZeroError, ParameterDomainError, SampleSizeError
from schemas import EnvModel, HarmonicResidual, RenewalEstimate
from settings import HORIZON_BATCH, LADDER_CAP, MEAN_ZERO_TOL, RENEWAL_BLOCK_CELLS

logger = logging.getLogger(__name__)

Which = Literal["U", "V"]

# stream sub-keys under TASK_RENEWAL
_U, _V, _HORIZON, _CHECK_U, _CHECK_V = range(5)


def _require_mean_zero(env: EnvModel) -> None:
    mean = math.fsum(envs.probabilities(env) * envs.log_means(env))
    if abs(mean) > MEAN_ZERO_TOL:
        raise NonMeanZeroError(f"E[X] = {mean:.3g}; renewal functions need an oscillating (mean-zero) walk")


def _draw_steps(steps: np.ndarray, cumulative: np.ndarray, rng: np.random.Generator, shape) -> np.ndarray:
    idx = np.searchsorted(cumulative, rng.random(shape), side="right")
    return steps[np.minimum(idx, steps.size - 1)]


def _ladder_stream(
    steps: np.ndarray,
    p: np.ndarray,
    levels: np.ndarray,
    strict: bool,
    count: int,
    rng: np.random.Generator,
    cap: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Count descending ladder points of the walk with the given steps, per level.

    Strict ladder points (z_n < min of earlier z) are counted when z_n >= level,
    weak ones (z_n <= min) when z_n > level. A replication stops once its running
    minimum reaches the lowest level, or after cap steps.
    Returns (counts[rep, level], capped[rep], running minimum[rep], steps taken).
    """
    counts = np.zeros((count, levels.size), dtype=np.int64)
    position = np.zeros(count)
    low = np.zeros(count)
    capped = np.zeros(count, dtype=bool)
    cumulative = np.cumsum(p)
    floor = levels.min()
    active = np.flatnonzero(low > floor)
    taken = 0
    while active.size and taken < cap:
        block = int(min(max(64, RENEWAL_BLOCK_CELLS // active.size), cap - taken))
        path = position[active, None] + np.cumsum(_draw_steps(steps, cumulative, rng, (active.size, block)), axis=1)
        running = np.minimum.accumulate(path, axis=1)
        before = np.minimum(low[active, None], np.concatenate([low[active, None], running[:, :-1]], axis=1))
        if strict:
            ladder = path < before
            counted = path[:, :, None] >= levels
        else:
            ladder = path <= before
            counted = path[:, :, None] > levels
        counts[active] += np.sum(ladder[:, :, None] & counted, axis=1)
        position[active] = path[:, -1]
        low[active] = np.minimum(low[active], running[:, -1])
        taken += block
        active = active[low[active] > floor]
    capped[active] = True
    return counts, capped, low, taken


def _ladder_counts(
    env: EnvModel, levels: np.ndarray, which: Which, samples: int, cap: int, seed: int, workers: int, task: int
):
    # U reads strict descending ladder points of S, V weak ascending ones (weak descending of -S)
    sign = 1.0 if which == "U" else -1.0
    steps = sign * envs.log_means(env)
    streams = get_streams(seed, workers, TASK_RENEWAL, task)
    args = [
        (steps, envs.probabilities(env), levels, which == "U", count, rng, cap)
        for count, rng in zip(split(samples, workers), streams)
    ]
    parts = run_ordered(_ladder_stream, args, workers)
    counts = np.concatenate([part[0] for part in parts])
    capped = np.concatenate([part[1] for part in parts])
    low = np.concatenate([part[2] for part in parts])
    horizon = max(part[3] for part in parts)
    if capped.any():
        logger.warning("%d of %d ladder replications reached the %d-step cap", int(capped.sum()), samples, cap)
    return counts, capped, low, horizon


def _bias_bounds(env: EnvModel, which: Which, levels: np.ndarray, counts: np.ndarray, capped: np.ndarray, low: np.ndarray):
    """Per-level bound on the ladder points a capped replication could still have added."""
    if not capped.any():
        return np.zeros(levels.size)
    span = envs.lattice_span(envs.log_means(env))
    if which == "U" and span is not None:
        remaining = np.floor((low[capped, None] - levels) / span + 1e-9).clip(min=0.0)
        return remaining.sum(axis=0) / capped.size
    return capped.mean() * counts.mean(axis=0)


def _levels(which: Which, xs: Sequence[float]) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if which == "U":
        if np.any(xs < 0.0):
            raise ParameterDomainError("U is evaluated at x >= 0")
        return -xs
    if np.any(xs > 0.0):
        raise ParameterDomainError("V is evaluated at x <= 0")
    return xs


def _renewal_grid(
    which: Which, env: EnvModel, xs: Sequence[float], samples: int, cap: int, seed: int, workers: int
) -> List[RenewalEstimate]:
    _require_mean_zero(env)
    if samples < 2:
        raise SampleSizeError("renewal estimates need at least two replications")
    levels = _levels(which, xs)
    if np.all(levels == 0.0):
        return [RenewalEstimate(which=which, x=float(x), value=1.0, horizon=0) for x in xs]
    task = _U if which == "U" else _V
    counts, capped, low, horizon = _ladder_counts(env, levels, which, samples, cap, seed, workers, task)
    bias = _bias_bounds(env, which, levels, counts, capped, low)
    out = []
    for j, x in enumerate(xs):
        if x == 0.0:
            out.append(RenewalEstimate(which=which, x=0.0, value=1.0, horizon=horizon))
            continue
        column = counts[:, j].astype(float)
        se = 0.0 if np.ptp(column) == 0 else float(column.std(ddof=1) / math.sqrt(column.size))
        out.append(
            RenewalEstimate(
                which=which,
                x=float(x),
                value=1.0 + float(column.mean()),
                se=se,
                horizon=horizon,
                cap_hits=float(capped.mean()),
                bias_bound=float(bias[j]),
            )
        )
    return out


def renewal_U_grid(env_tilted: EnvModel, xs: Sequence[float], samples: int = 10_000, cap: int = LADDER_CAP, seed: int = 1, workers: int = 1):
    """U on a grid of x >= 0 from one set of replications, so the estimates are monotone in x."""
    return _renewal_grid("U", env_tilted, xs, samples, cap, seed, workers)


def renewal_V_grid(env_tilted: EnvModel, xs: Sequence[float], samples: int = 10_000, cap: int = LADDER_CAP, seed: int = 1, workers: int = 1):
    return _renewal_grid("V", env_tilted, xs, samples, cap, seed, workers)


def renewal_U(env_tilted: EnvModel, x: float, samples: int = 10_000, cap: int = LADDER_CAP, seed: int = 1, workers: int = 1) -> RenewalEstimate:
    """U(x) = 1 + E[number of strict descending ladder heights in [-x, 0)]."""
    return renewal_U_grid(env_tilted, [x], samples, cap, seed, workers)[0]


def renewal_V(env_tilted: EnvModel, x: float, samples: int = 10_000, cap: int = LADDER_CAP, seed: int = 1, workers: int = 1) -> RenewalEstimate:
    """V(x) = 1 + E[number of weak ascending ladder heights in [0, -x)]."""
    return renewal_V_grid(env_tilted, [x], samples, cap, seed, workers)[0]


def _horizon_stream(steps, p, x, horizon, count, rng) -> np.ndarray:
    cumulative = np.cumsum(p)
    totals = []
    done = 0
    while done < count:
        size = min(HORIZON_BATCH, count - done)
        path = np.cumsum(_draw_steps(steps, cumulative, rng, (size, horizon)), axis=1)
        below = np.maximum.accumulate(path, axis=1) < 0.0
        totals.append(np.count_nonzero(below & (path >= -x), axis=1))
        done += size
    return np.concatenate(totals) if totals else np.zeros(0, dtype=np.int64)


def renewal_U_horizon(
    env_tilted: EnvModel, x: float, horizon: int = 10_000, samples: int = 2_000, seed: int = 1, workers: int = 1
) -> RenewalEstimate:
    """1 + sum_{n <= horizon} P(S_n >= -x, M_n < 0), summed along simulated paths."""
    _require_mean_zero(env_tilted)
    if x < 0.0:
        raise ParameterDomainError("U is evaluated at x >= 0")
    if x == 0.0:
        return RenewalEstimate(which="U", x=0.0, value=1.0, horizon=horizon)
    streams = get_streams(seed, workers, TASK_RENEWAL, _HORIZON)
    args = [
        (envs.log_means(env_tilted), envs.probabilities(env_tilted), x, horizon, count, rng)
        for count, rng in zip(split(samples, workers), streams)
    ]
    column = np.concatenate(run_ordered(_horizon_stream, args, workers)).astype(float)
    se = 0.0 if np.ptp(column) == 0 else float(column.std(ddof=1) / math.sqrt(column.size))
    return RenewalEstimate(which="U", x=float(x), value=1.0 + float(column.mean()), se=se, horizon=horizon)


def harmonic_check(
    which: Which,
    env_tilted: EnvModel,
    x: float,
    samples: int = 10_000,
    cap: int = LADDER_CAP,
    seed: int = 1,
    workers: int = 1,
) -> HarmonicResidual:
    """E[U(x+X); x+X >= 0] - U(x), or E[V(x+X); x+X < 0] - V(x), per replication."""
    _require_mean_zero(env_tilted)
    if samples < 2:
        raise SampleSizeError("harmonic_check needs at least two replications")
    x_steps = envs.log_means(env_tilted)
    p = envs.probabilities(env_tilted)
    moved = x + x_steps
    keep = moved >= 0.0 if which == "U" else moved < 0.0
    args = np.concatenate([[x], moved[keep]])
    levels = _levels(which, args)
    weights = p[keep]
    task = _CHECK_U if which == "U" else _CHECK_V
    counts, capped, low, _ = _ladder_counts(env_tilted, levels, which, samples, cap, seed, workers, task)
    values = 1.0 + counts.astype(float)
    # arguments equal to 0 are exactly 1
    values[:, args == 0.0] = 1.0
    per_rep = values[:, 1:] @ weights - values[:, 0]
    se = 0.0 if np.ptp(per_rep) == 0 else float(per_rep.std(ddof=1) / math.sqrt(per_rep.size))
    bias = _bias_bounds(env_tilted, which, levels, counts, capped, low)
    residual = HarmonicResidual(
        which=which,
        x=float(x),
        residual=float(per_rep.mean()),
        se=se,
        cap_hits=float(capped.mean()),
        bias_bound=float(bias[0] + bias[1:] @ weights),
    )
    logger.info("harmonic %s(%g): residual %.3g +- %.2g", which, x, residual.residual, residual.se)
    return residual
