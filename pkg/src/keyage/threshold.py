"""Decode precision of k-out-of-n key thresholds under per-key noise.

Each of the n keys is independently corrupted with probability beta.  A
receiver that decodes from k gossiped keys (plus its own, assumed clean)
succeeds when at most k of the n keys are corrupted, so the precision is a
binomial CDF in k.  Everything is evaluated in log space: the individual
terms underflow for n in the thousands long before the CDF itself becomes
uninteresting.
"""

from __future__ import annotations

import math
from typing import Iterator

__all__ = ["precision", "required_keys"]


def _validate_n_beta(n: int, beta: float) -> None:
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not (isinstance(beta, (int, float)) and 0.0 < beta < 1.0):
        raise ValueError(f"beta must lie strictly inside (0, 1), got {beta!r}")


def _log_cdf_walk(n: int, beta: float) -> Iterator[float]:
    """Yield log D(k) for k = 0, 1, ..., n-1 where D is the Binomial(n, beta) CDF.

    Successive binomial terms are related by a rational factor, so the walk
    is O(1) per step with no factorials.  The running sum uses the
    log-add-exp identity with the larger argument factored out, which keeps
    every intermediate finite for n at least 10_000.
    """
    log_odds = math.log(beta) - math.log1p(-beta)
    log_term = n * math.log1p(-beta)
    log_cdf = log_term
    yield log_cdf
    for i in range(n - 1):
        log_term += math.log(n - i) - math.log(i + 1) + log_odds
        if log_term > log_cdf:
            log_cdf = log_term + math.log1p(math.exp(log_cdf - log_term))
        else:
            log_cdf += math.log1p(math.exp(log_term - log_cdf))
        yield log_cdf


def precision(k: int, n: int, beta: float) -> float:
    """Probability that a k-of-n decode succeeds under key-noise rate beta.

    This is the Binomial(n, beta) CDF at k: the chance that at most k keys
    are corrupted.  Monotone nondecreasing in k; k = n always returns
    exactly 1.0.
    """
    _validate_n_beta(n, beta)
    if not isinstance(k, int) or isinstance(k, bool) or not 0 <= k <= n:
        raise ValueError(f"k must be an integer in [0, {n}], got {k!r}")
    if k == n:
        return 1.0
    walk = _log_cdf_walk(n, beta)
    log_cdf = 0.0
    for _ in range(k + 1):
        log_cdf = next(walk)
    return min(1.0, math.exp(log_cdf))


def required_keys(n: int, beta: float, alpha: float) -> int | None:
    """Smallest k with precision(k, n, beta) >= alpha, or None if unreachable.

    A receiver already holds one of the n keys, so at most n-1 more can
    arrive by gossip; targets that would force k = n are reported as None
    rather than a key count that no amount of gossip can deliver.

    The scan reuses the same log-space walk as :func:`precision`, so
    required_keys(n, beta, precision(k, n, beta)) round-trips to k whenever
    the CDF is strictly increasing at k.
    """
    _validate_n_beta(n, beta)
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    for k, log_cdf in enumerate(_log_cdf_walk(n, beta)):
        if math.exp(log_cdf) >= alpha:
            return k
    return None
