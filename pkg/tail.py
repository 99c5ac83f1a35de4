# bpire/tail.py
import logging
import math
from typing import Callable, Literal, Optional, Tuple

import numpy as np

from exceptions import FitError, MissingKernelEntriesError, ParameterDomainError, UndecidedRootError
from schemas import FitResult, KernelSeries, Regime, RootCertificate, SurvivalCurve, SurvivalPoint
from settings import CASE2_MARGIN, CASE3_BAND, ROOT_RTOL

logger = logging.getLogger(__name__)

TailModel = Literal["geometric", "asymptotic"]
Series = Literal["T", "H", "Hstar", "dH"]

SE_WIDTH = 3.0


def _kernel_arrays(H: KernelSeries) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """H and H* as arrays indexed by n; H*_0 is a zero placeholder."""
    h = np.array([e.value for e in H.H])
    h_se = np.array([e.se for e in H.H])
    hs = np.zeros(len(H.Hstar) + 1)
    hs_se = np.zeros(len(H.Hstar) + 1)
    hs[1:] = [e.value for e in H.Hstar]
    hs_se[1:] = [e.se for e in H.Hstar]
    return h, h_se, hs, hs_se


def survival_from_kernel(H: KernelSeries, R1: float, N: int, R1_half_width: float = 0.0) -> SurvivalCurve:
    """R_1..R_N from R_n = H*_{n-1} + sum_{m=1}^{n-1} H_{n-1-m} R_m.

    Half-widths are first-order: the Jacobian of every R_n with respect to all
    kernel entries is carried through the recurrence.
    """
    if N < 1:
        raise ParameterDomainError("N must be at least 1")
    if not 0.0 <= R1 <= 1.0:
        raise ParameterDomainError(f"R1 must lie in [0, 1], got {R1}")
    if len(H.H) < N or len(H.Hstar) < N - 1:
        raise MissingKernelEntriesError(
            f"need H_0..H_{N - 1} and H*_1..H*_{N - 1}; have {len(H.H)} H and {len(H.Hstar)} H* entries"
        )
    h, h_se, hs, hs_se = _kernel_arrays(H)
    h, h_se = h[:N], h_se[:N]
    hs, hs_se = hs[:N], hs_se[:N]
    errors = np.concatenate([h_se, hs_se, [R1_half_width / SE_WIDTH]])
    R = np.zeros(N + 1)
    J = np.zeros((N + 1, errors.size))
    R[1] = R1
    J[1, -1] = 1.0
    for n in range(2, N + 1):
        h_rev = h[n - 2 :: -1] if n >= 2 else h[:0]
        R[n] = hs[n - 1] + h_rev @ R[1:n]
        J[n] = h_rev @ J[1:n]
        J[n, N + n - 1] += 1.0
        J[n, : n - 1] += R[1:n][::-1]
    half_widths = SE_WIDTH * np.sqrt((J**2) @ (errors**2))
    return SurvivalCurve(
        points=[
            SurvivalPoint(n=n, value=float(R[n]), half_width=float(half_widths[n]), provenance="recurrence")
            for n in range(1, N + 1)
        ]
    )


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Certified series enclosures
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def _geometric_tail(const: float, gamma: float, r: float, N: int, which: Series) -> float:
    if const == 0.0:
        return 0.0
    x = gamma * r
    if x >= 1.0:
        return math.inf
    if which == "T":
        return const * x ** (N + 2) / (1.0 - x)
    if which in ("H", "Hstar"):
        return const * gamma * x ** (N + 1) / (1.0 - x)
    return const * gamma**2 * x**N * ((N + 1) - N * x) / (1.0 - x) ** 2


def _asymptotic_tail(last: float, gamma: float, r: float, N: int, which: Series) -> float:
    """Envelope from the last entry, scaled as gamma^{n+1} n^{-3/2} beyond N."""
    last_bar = max(last, 0.0) / gamma ** (N + 1)
    if last_bar == 0.0:
        return 0.0
    x = gamma * r
    if which == "dH":
        if x >= 1.0:
            return math.inf
        return gamma / r * last_bar * x ** (N + 1) * ((N + 1) - N * x) / (1.0 - x) ** 2
    tail = 2.0 * max(N, 1) * last_bar
    if x < 1.0:
        tail = min(tail, last_bar * x ** (N + 1) / (1.0 - x))
    tail *= gamma
    return r * tail if which == "T" else tail


def enclosure(H: KernelSeries, r: float, which: Series = "T", tail_model: TailModel = "geometric") -> Tuple[float, float]:
    """Lower and upper bounds of T(r) = r H(r), H(r), H*(r) or H'(r)."""
    h, h_se, hs, hs_se = _kernel_arrays(H)
    if which == "Hstar":
        coef, se, const = hs, hs_se, H.tail_const_star
    else:
        coef, se, const = h, h_se, H.tail_const
    N = coef.size - 1
    n = np.arange(coef.size, dtype=float)
    if which == "T":
        w = np.power(r, n + 1)
    elif which == "dH":
        w = n * np.power(r, np.maximum(n - 1, 0))
    else:
        w = np.power(r, n)
    lo = float(np.sum(np.maximum(coef - SE_WIDTH * se, 0.0) * w))
    hi = float(np.sum((coef + SE_WIDTH * se) * w))
    tail = _geometric_tail(const, H.gamma, r, N, which)
    if tail_model == "asymptotic":
        last = coef[-1] + SE_WIDTH * se[-1]
        tail = min(tail, _asymptotic_tail(last, H.gamma, r, N, which))
    return lo, hi + tail


def _required_n(H: KernelSeries, r: float, tol: float) -> Optional[int]:
    """Smallest N whose geometric remainder of T at r is at most tol."""
    x = H.gamma * r
    if H.tail_const == 0.0 or x >= 1.0 or tol <= 0.0:
        return None
    # C x^{N+2} / (1 - x) <= tol
    return max(H.n_max + 1, math.ceil(math.log(tol * (1.0 - x) / H.tail_const) / math.log(x)) - 2)


def _bracket_tolerance(H: KernelSeries, r: float, rtol: float, tail_model: TailModel) -> float:
    """Half the change of T across a bracket of relative width rtol at r."""
    h_lo, _ = enclosure(H, r, "H", tail_model)
    d_lo, _ = enclosure(H, r, "dH", tail_model)
    return 0.5 * rtol * r * (h_lo + r * d_lo)


def _narrow(H: KernelSeries, a: float, b: float, tail_model: TailModel, below: bool) -> float:
    """Bisect [a, b] onto the edge of the region where the T enclosure contains 1.

    below=True: a is certified below 1, b is not; returns the largest certified point found.
    below=False: b is certified above 1, a is not; returns the smallest.
    """
    while True:
        m = 0.5 * (a + b)
        if not a < m < b:
            return a if below else b
        t_lo, t_hi = enclosure(H, m, "T", tail_model)
        if below:
            a, b = (m, b) if t_hi < 1.0 else (a, m)
        else:
            a, b = (a, m) if t_lo > 1.0 else (m, b)


def find_root(H: KernelSeries, tail_model: TailModel = "geometric", rtol: float = ROOT_RTOL) -> RootCertificate:
    """Locate the root of r H(r) = 1 in (1, 1/gamma), or certify that there is none.

    A case-1 certificate keeps the narrowest bracket whose endpoints are
    certified on either side of 1; `converged` says whether it reached rtol.
    """
    g_inv = 1.0 / H.gamma
    T1 = enclosure(H, g_inv, "T", tail_model)
    certified = tail_model == "geometric"

    if T1[0] >= 1.0 - CASE3_BAND and T1[1] <= 1.0 + CASE3_BAND:
        logger.info("T(1/gamma) enclosure %s lies in the case-3 band", T1)
        return RootCertificate(case="case3-boundary", T1=T1, bound=T1[1] - T1[0], certified=certified, tail_model=tail_model)

    edge = g_inv * (1.0 - CASE2_MARGIN)
    edge_lo, edge_hi = enclosure(H, edge, "T", tail_model)
    if edge_hi < 1.0:
        logger.info("T < 1 up to 1/gamma (upper bound %.6g): no root", edge_hi)
        return RootCertificate(case="case2", T1=T1, bound=edge_hi - edge_lo, certified=certified, tail_model=tail_model)

    start_lo, start_hi = enclosure(H, 1.0, "T", tail_model)
    if start_hi >= 1.0:
        raise UndecidedRootError(
            f"T(1) enclosure ({start_lo:.6g}, {start_hi:.6g}) does not lie below 1",
            required_n=_required_n(H, 1.0, 1.0 - start_lo) if start_lo < 1.0 else None,
        )
    if edge_lo > 1.0:
        hi = edge
    elif T1[0] > 1.0:
        hi = g_inv
    else:
        hint = ""
        if tail_model == "geometric" and H.tail_const > 0.0:
            hint = "; the geometric remainder blows up near 1/gamma, tail_model=\"asymptotic\" gives an uncertified verdict"
        raise UndecidedRootError(
            f"cannot separate case 1 from case 2: T near 1/gamma encloses ({edge_lo:.6g}, {edge_hi:.6g}){hint}",
            required_n=_required_n(H, edge, 1.0 - edge_lo) if edge_lo < 1.0 else None,
        )

    # bisect while the enclosures still separate from 1, down to float resolution
    lo = 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        mid_lo, mid_hi = enclosure(H, mid, "T", tail_model)
        if mid_hi < 1.0:
            lo = mid
        elif mid_lo > 1.0:
            hi = mid
        else:
            lo = _narrow(H, lo, mid, tail_model, below=True)
            hi = _narrow(H, mid, hi, tail_model, below=False)
            break
    r = 0.5 * (lo + hi)
    r_lo, r_hi = enclosure(H, r, "T", tail_model)
    converged = hi - lo <= rtol * hi
    required_n = None
    if converged:
        logger.info("root r = %.12g in [%.12g, %.12g]", r, lo, hi)
    else:
        required_n = _required_n(H, r, _bracket_tolerance(H, r, rtol, tail_model))
        logger.warning(
            "root r = %.12g only localized to [%.12g, %.12g] with N=%d (about N=%s needed for rtol %g)",
            r, lo, hi, H.n_max, required_n, rtol,
        )
    return RootCertificate(
        case="case1",
        r=r,
        bracket=(lo, hi),
        T1=T1,
        bound=r_hi - r_lo,
        converged=converged,
        required_n=required_n,
        certified=certified,
        tail_model=tail_model,
    )


def refine_root(
    series: KernelSeries,
    build: Callable[[int], KernelSeries],
    n_limit: int,
    tail_model: TailModel = "geometric",
    rtol: float = ROOT_RTOL,
) -> Tuple[KernelSeries, RootCertificate]:
    """Rebuild the kernel with more entries until the case-1 bracket reaches rtol or n_limit is hit."""
    while True:
        cert = find_root(series, tail_model, rtol)
        if cert.case != "case1" or cert.converged or series.n_max >= n_limit:
            return series, cert
        n_next = min(n_limit, max(cert.required_n or 0, 2 * series.n_max + 1))
        logger.info("extending the kernel from N=%d to N=%d", series.n_max, n_next)
        series = build(n_next)


def case1_constant(H: KernelSeries, R1: float, r: float, tail_model: TailModel = "geometric") -> float:
    """(r H*(r) + r R1) / (H(r) + r H'(r)), the case-1 prefactor of r^{-n-1}."""
    hs_lo, hs_hi = enclosure(H, r, "Hstar", tail_model)
    h_lo, h_hi = enclosure(H, r, "H", tail_model)
    d_lo, d_hi = enclosure(H, r, "dH", tail_model)
    den_lo, den_hi = h_lo + r * d_lo, h_hi + r * d_hi
    if den_lo <= 0.0:
        raise ParameterDomainError(f"denominator enclosure ({den_lo:.6g}, {den_hi:.6g}) contains 0")
    num = r * 0.5 * (hs_lo + hs_hi) + r * R1
    return num / (0.5 * (den_lo + den_hi))


def case1_prediction(certificate: RootCertificate, constant: float, n: int) -> float:
    if certificate.case != "case1" or certificate.r is None:
        raise ParameterDomainError("the exponential prediction needs a case-1 root")
    return constant * certificate.r ** (-n - 1)


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Decay fitting
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

def default_window(curve: SurvivalCurve) -> Tuple[int, int]:
    last = curve.points[-1].n
    lo = max(1, last // 3)
    return lo, max(lo + 1, 2 * last // 3)


def decay_fit(
    curve: SurvivalCurve,
    model: Literal["pure-exponential", "exponential-times-power"] = "pure-exponential",
    window: Optional[Tuple[int, int]] = None,
    gamma: Optional[float] = None,
) -> FitResult:
    window = window or default_window(curve)
    chosen = [p for p in curve.points if window[0] <= p.n <= window[1]]
    if len(chosen) < 2:
        raise FitError(f"window {window} holds fewer than two points")
    n = np.array([p.n for p in chosen], dtype=float)
    values = np.array([p.value for p in chosen])
    if np.any(values <= 0.0):
        raise FitError(f"non-positive survival values in window {window}")
    if model == "pure-exponential":
        slope, intercept = np.polyfit(n, np.log(values), 1)
        residual = np.log(values) - (slope * n + intercept)
        rate, power = math.exp(slope), 0.0
    else:
        if gamma is None:
            raise FitError("the exponential-times-power model needs gamma")
        y = np.log(values) - n * math.log(gamma)
        slope, intercept = np.polyfit(np.log(n), y, 1)
        residual = y - (slope * np.log(n) + intercept)
        rate, power = gamma, float(slope)
    if not 0.0 < rate < 1.0:
        raise FitError(f"fitted rate {rate:.6g} is not in (0, 1)")
    return FitResult(
        model=model,
        rate=rate,
        power=power,
        prefactor=math.exp(intercept),
        window=window,
        residual_rms=float(np.sqrt(np.mean(residual**2))),
    )


def verdict(regime: Optional[Regime], certificate: RootCertificate) -> str:
    if certificate.case == "case1":
        return "case1"
    if regime is not None and regime.kind != "weakly":
        return "inconsistent"
    return "case2" if certificate.case == "case2" else "case3"
