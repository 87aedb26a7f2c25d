"""Closed-form version-age analytics.

Let node j have in-edges with independent exponential activation clocks of
rates r_1..r_m and let X_(k:m) be the k-th smallest of the per-edge first
activation times after an update.  With update interarrivals U ~ Exp(lambda_s),
the long-run average version age is

    memory scheme:      lambda_s * E[X_(k:m)]
    memoryless scheme:  lambda_s * E[min(X_(k:m), U)] / Pr(X_(k:m) <= U)

All three building blocks share one representation: the survival function
of X_(k:m) expands into a signed sum of exponentials over the subsets of
edges of size < k,

    P(X_(k:m) > t) = sum_C  w(|C|) exp(-(R - R_C) t),
    w(c) = (-1)^(k-1-c) * C(m-c-1, k-1-c),

where R is the total rate and R_C the rate of subset C.  Integrating that
termwise (optionally against exp(-lambda_s t)) gives exact rational-in-rates
answers; terms are accumulated with math.fsum, which rounds the exact sum,
so the alternating weights cost no precision.  Past `exact_threshold`
in-edges the subset count explodes and the same quantities are obtained by
adaptive quadrature of a Poisson-binomial evaluation of the survival
function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .net import Network

__all__ = [
    "EXACT_SUBSET_LIMIT",
    "InfeasibleNodeError",
    "GapNotBracketedError",
    "NonMonotoneGapError",
    "AnalyticAge",
    "CriticalRateResult",
    "GeometricSpec",
    "order_stat_mean",
    "prob_service_before_update",
    "exp_min_with_update",
    "age_memory",
    "age_memoryless",
    "shn_age_memory",
    "shn_age_memoryless",
    "asymptotic_age_memory",
    "critical_gossip_rate",
    "message_size_law",
]

# Above this many in-edges the inclusion-exclusion expansion (sum over
# subsets of size < k) is abandoned for quadrature.
EXACT_SUBSET_LIMIT = 16

_QUAD_KWARGS = dict(epsabs=1e-10, epsrel=1e-12, limit=200)


class InfeasibleNodeError(ValueError):
    """A node was asked for more gossiped keys than it has in-edges."""


class GapNotBracketedError(ValueError):
    """The scheme gap exceeds epsilon at both ends of the search bracket."""


class NonMonotoneGapError(RuntimeError):
    """The scheme gap failed to decrease in lambda_e over the evaluated points."""


def _validated_rates(rates: Sequence[float]) -> list[float]:
    out = []
    for r in rates:
        if not (isinstance(r, (int, float)) and math.isfinite(r) and r > 0):
            raise ValueError(f"rates must be finite and positive, got {r!r}")
        out.append(float(r))
    if not out:
        raise ValueError("need at least one rate")
    return out


def _check_k(k: int, m: int) -> None:
    if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= m:
        raise ValueError(f"k must be an integer in [1, {m}], got {k!r}")


def _check_lambda(value: float, name: str) -> float:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a finite positive rate, got {value!r}")
    return float(value)


def _expansion(rates: list[float], k: int) -> list[tuple[float, float]]:
    """Signed-exponential expansion of the order-statistic survival function.

    Returns (weight, rate) pairs such that
    P(X_(k:m) > t) = sum_i weight_i * exp(-rate_i * t).
    """
    m = len(rates)
    total = math.fsum(rates)
    terms: list[tuple[float, float]] = []
    for c in range(k):
        w = float((-1) ** (k - 1 - c) * math.comb(m - c - 1, k - 1 - c))
        for subset in combinations(range(m), c):
            r_c = total - math.fsum(rates[i] for i in subset)
            terms.append((w, r_c))
    return terms


def _survival_fn(rates: list[float], k: int) -> Callable[[float], float]:
    """P(X_(k:m) > t) via the Poisson-binomial count of activated edges.

    O(m*k) per evaluation and numerically benign for any m, used when the
    subset expansion would be too large.
    """
    rate_arr = np.asarray(rates, dtype=np.float64)

    def survival(t: float) -> float:
        if t <= 0.0:
            return 1.0
        p = -np.expm1(-rate_arr * t)
        dp = np.zeros(k)
        dp[0] = 1.0
        for pi in p:
            dp[1:] = dp[1:] * (1.0 - pi) + dp[:-1] * pi
            dp[0] *= 1.0 - pi
        return float(dp.sum())

    return survival


def order_stat_mean(rates: Sequence[float], k: int, *,
                    exact_threshold: int = EXACT_SUBSET_LIMIT) -> float:
    """E[X_(k:m)]: mean time until k of the m edges have activated."""
    rs = _validated_rates(rates)
    _check_k(k, len(rs))
    if len(rs) <= exact_threshold:
        return math.fsum(w / r for w, r in _expansion(rs, k))
    return integrate.quad(_survival_fn(rs, k), 0.0, np.inf, **_QUAD_KWARGS)[0]


def exp_min_with_update(rates: Sequence[float], k: int, lam_s: float, *,
                        exact_threshold: int = EXACT_SUBSET_LIMIT) -> float:
    """E[min(X_(k:m), U)] with U ~ Exp(lam_s) independent of the edges."""
    rs = _validated_rates(rates)
    _check_k(k, len(rs))
    lam_s = _check_lambda(lam_s, "lam_s")
    if len(rs) <= exact_threshold:
        return math.fsum(w / (r + lam_s) for w, r in _expansion(rs, k))
    survival = _survival_fn(rs, k)
    return integrate.quad(lambda t: survival(t) * math.exp(-lam_s * t),
                          0.0, np.inf, **_QUAD_KWARGS)[0]


def prob_service_before_update(rates: Sequence[float], k: int, lam_s: float, *,
                               exact_threshold: int = EXACT_SUBSET_LIMIT) -> float:
    """mu = Pr(X_(k:m) <= U): chance the k-th key lands before the next update."""
    rs = _validated_rates(rates)
    _check_k(k, len(rs))
    lam_s = _check_lambda(lam_s, "lam_s")
    if len(rs) <= exact_threshold:
        return math.fsum(w * r / (r + lam_s) for w, r in _expansion(rs, k))
    # mu = 1 - lam_s * E[min(X, U)] since min(X, U) is censored at U.
    return 1.0 - lam_s * exp_min_with_update(rs, k, lam_s, exact_threshold=exact_threshold)


@dataclass(frozen=True)
class AnalyticAge:
    """Exact long-run average age of one node, with its building blocks.

    value            the time-average version age
    order_stat_mean  E[X_(k:m)]
    min_with_update  E[min(X_(k:m), U)]
    service_prob     mu = Pr(X_(k:m) <= U)
    """

    scheme: str
    value: float
    order_stat_mean: float
    min_with_update: float
    service_prob: float


def _node_rates(network: Network, node: int, k: int) -> tuple[float, ...]:
    rates = network.in_rates(node)
    if k > len(rates):
        raise InfeasibleNodeError(
            f"node {node} needs {k} gossiped keys but has in-degree {len(rates)}")
    return rates


def _age_components(network: Network, node: int, k: int, lam_s: float | None,
                    exact_threshold: int) -> tuple[float, float, float, float]:
    lam = network.source_rate if lam_s is None else _check_lambda(lam_s, "lam_s")
    if not isinstance(k, int) or isinstance(k, bool) or k < 0:
        raise ValueError(f"k must be an integer >= 0, got {k!r}")
    if k == 0:
        # The node's own key suffices: it decodes at the instant of every
        # update and its age is identically zero.
        return lam, 0.0, 0.0, 1.0
    rates = _node_rates(network, node, k)
    osm = order_stat_mean(rates, k, exact_threshold=exact_threshold)
    emin = exp_min_with_update(rates, k, lam, exact_threshold=exact_threshold)
    mu = prob_service_before_update(rates, k, lam, exact_threshold=exact_threshold)
    return lam, osm, emin, mu


def age_memory(network: Network, node: int, k: int, lam_s: float | None = None, *,
               exact_threshold: int = EXACT_SUBSET_LIMIT) -> AnalyticAge:
    """Average age at `node` when gossip messages replay all missed keys.

    With per-edge memory a version stays decodable forever once enough
    neighbours have seen it, so the age renews at every update and equals
    lambda_s * E[X_(k:m)].
    """
    lam, osm, emin, mu = _age_components(network, node, k, lam_s, exact_threshold)
    return AnalyticAge("memory", lam * osm, osm, emin, mu)


def age_memoryless(network: Network, node: int, k: int, lam_s: float | None = None, *,
                   exact_threshold: int = EXACT_SUBSET_LIMIT) -> AnalyticAge:
    """Average age at `node` when each message carries only the newest key.

    Partial progress on a version is wiped by the next update, so decoding
    succeeds only in update intervals where the k-th key wins the race
    against U; the renewal-reward ratio gives
    lambda_s * E[min(X_(k:m), U)] / mu.
    """
    lam, osm, emin, mu = _age_components(network, node, k, lam_s, exact_threshold)
    value = 0.0 if k == 0 else lam * emin / mu
    return AnalyticAge("memoryless", value, osm, emin, mu)


def _check_shn_args(n: int, k: int, lam_e: float, lam_s: float) -> tuple[float, float]:
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ValueError(f"shn needs an integer n >= 2, got {n!r}")
    if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= n - 1:
        raise ValueError(f"k must be an integer in [1, n-1] = [1, {n - 1}], got {k!r}")
    return _check_lambda(lam_e, "lam_e"), _check_lambda(lam_s, "lam_s")


def shn_age_memory(n: int, k: int, lam_e: float, lam_s: float) -> float:
    """Memory-scheme age in the scalable homogeneous network, closed form.

    All n-1 in-edges share rate lam_e/(n-1), so E[X_(k:n-1)] telescopes into
    a partial harmonic sum:
    age = (n-1) * lam_s / lam_e * sum_{i=n-k}^{n-1} 1/i.
    """
    lam_e, lam_s = _check_shn_args(n, k, lam_e, lam_s)
    harmonic = math.fsum(1.0 / i for i in range(n - k, n))
    return (n - 1) * lam_s / lam_e * harmonic


def shn_age_memoryless(n: int, k: int, lam_e: float, lam_s: float) -> float:
    """Memoryless-scheme age in the scalable homogeneous network, closed form.

    The spacings of X_(k:n-1) are independent exponentials with rates
    a_i = lam_e * (n-i) / (n-1); racing each spacing against the update
    clock gives mu = prod_i a_i/(a_i+lam_s) and
    E[min(X, U)] = sum_j (1/(a_j+lam_s)) * prod_{i<j} a_i/(a_i+lam_s).
    """
    lam_e, lam_s = _check_shn_args(n, k, lam_e, lam_s)
    emin = 0.0
    prod = 1.0  # after j rounds: prod_{i<=j} a_i/(a_i+lam_s)
    for j in range(1, k + 1):
        a_j = lam_e * (n - j) / (n - 1)
        emin += prod / (a_j + lam_s)
        prod *= a_j / (a_j + lam_s)
    return lam_s * emin / prod


def asymptotic_age_memory(k: int, lam_s: float, lam_e: float) -> float:
    """Large-n limit of shn_age_memory: k * lam_s / lam_e.

    The partial harmonic sum over the top k of n-1 terms tends to k/(n-1)
    times (n-1), so the network-size dependence cancels entirely.
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    return k * _check_lambda(lam_s, "lam_s") / _check_lambda(lam_e, "lam_e")


@dataclass(frozen=True)
class CriticalRateResult:
    """Outcome of the critical gossip-rate search.

    rate is the smallest evaluated lambda_e whose scheme gap is <= epsilon
    (bisection endpoint, relative tolerance rel_tol); gap is the gap there.
    """

    rate: float
    gap: float
    evaluations: int


def critical_gossip_rate(k: int, n: int, lam_s: float, epsilon: float,
                         bracket: tuple[float, float], *,
                         rel_tol: float = 1e-6, max_iter: int = 200) -> CriticalRateResult:
    """Smallest shn gossip rate at which forgetting costs at most epsilon.

    Searches [bracket[0], bracket[1]] by bisection for the least lambda_e
    with |shn_age_memoryless - shn_age_memory| <= epsilon.  The gap is
    monotone decreasing in lambda_e; every evaluation is audited and a
    NonMonotoneGapError is raised if that ever fails.  If even the upper
    end of the bracket leaves a gap above epsilon, raises
    GapNotBracketedError.
    """
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be finite and positive, got {epsilon!r}")
    lo, hi = bracket
    lo = _check_lambda(lo, "bracket low")
    hi = _check_lambda(hi, "bracket high")
    if not lo < hi:
        raise ValueError(f"bracket must satisfy low < high, got {bracket!r}")

    evals: dict[float, float] = {}

    def gap(lam_e: float) -> float:
        g = abs(shn_age_memoryless(n, k, lam_e, lam_s) - shn_age_memory(n, k, lam_e, lam_s))
        evals[lam_e] = g
        return g

    def audit() -> None:
        xs = sorted(evals)
        for a, b in zip(xs, xs[1:]):
            if evals[b] > evals[a] * (1.0 + 1e-9) + 1e-15:
                raise NonMonotoneGapError(
                    f"gap increased from {evals[a]!r} at lambda_e={a!r} "
                    f"to {evals[b]!r} at lambda_e={b!r}")

    if gap(lo) <= epsilon:
        audit()
        return CriticalRateResult(rate=lo, gap=evals[lo], evaluations=len(evals))
    if gap(hi) > epsilon:
        audit()
        raise GapNotBracketedError(
            f"gap at bracket high {hi!r} is {evals[hi]!r} > epsilon={epsilon!r}")

    for _ in range(max_iter):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if gap(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    audit()
    return CriticalRateResult(rate=hi, gap=evals[hi], evaluations=len(evals))


@dataclass(frozen=True)
class GeometricSpec:
    """Distribution of the number of keys per gossip message (memory scheme).

    Counts updates landing between consecutive activations of one edge:
    geometric on {support_start, support_start+1, ...} with success
    probability p per trial.
    """

    p: float
    mean: float
    support_start: int = 0


def message_size_law(lam_ij: float, lam_s: float) -> GeometricSpec:
    """Key-count law for the memory scheme on an edge of rate lam_ij.

    The edge fires before the next update with probability
    p = lam_ij / (lam_ij + lam_s) independently per update, so the number
    of keys a message carries is geometric on {0, 1, ...} with mean
    lam_s / lam_ij.  As lam_s -> 0 messages are almost always empty
    (p -> 1, mean -> 0).
    """
    lam_ij = _check_lambda(lam_ij, "lam_ij")
    if not (isinstance(lam_s, (int, float)) and math.isfinite(lam_s) and lam_s >= 0):
        raise ValueError(f"lam_s must be finite and >= 0, got {lam_s!r}")
    lam_s = float(lam_s)
    return GeometricSpec(p=lam_ij / (lam_ij + lam_s), mean=lam_s / lam_ij, support_start=0)
