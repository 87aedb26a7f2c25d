"""Estimators and Monte Carlo oracles.

batch_means turns one simulated age trajectory into a point estimate with a
Student-t confidence interval.  The mc_* oracles estimate the analytic
building blocks (order-statistic mean, censored mean, service probability)
by direct vectorized sampling that shares no code with the closed forms in
keyage.analysis, so agreement between the two is evidence, not tautology.
geometric_fit checks empirical message-size counts against the predicted
geometric law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .rng import generator

__all__ = [
    "EstimateWithCI",
    "OracleEstimate",
    "GeometricFitReport",
    "integrate_step",
    "batch_averages",
    "batch_means",
    "mc_order_stat_oracle",
    "mc_min_with_update_oracle",
    "mc_service_prob_oracle",
    "geometric_fit",
]

_MC_CHUNK = 1 << 19


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with a symmetric confidence interval.

    reliable is False when there are too few batches for the t interval to
    mean much; sparse_batches counts batches that contained no trajectory
    change points (their averages still enter the estimate, but many of
    them signal the batch width is too small for the event rate).
    """

    point: float
    half_width: float
    level: float
    method: str
    batches: int
    reliable: bool
    sparse_batches: int


def _as_step_series(times: Sequence[float], values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.ndim != 1 or t.shape != v.shape or t.size == 0:
        raise ValueError("times and values must be equal-length 1-d arrays, nonempty")
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be nondecreasing")
    return t, v


def _cum_integral_at(t: np.ndarray, v: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Integral of the right-continuous step series from t[0] to each point."""
    seg = np.concatenate(([0.0], np.cumsum(v[:-1] * np.diff(t))))
    idx = np.searchsorted(t, points, side="right") - 1
    idx = np.clip(idx, 0, t.size - 1)
    return seg[idx] + v[idx] * (points - t[idx])


def integrate_step(times: Sequence[float], values: Sequence[float],
                   t0: float, t1: float) -> float:
    """Integrate a right-continuous step function over [t0, t1].

    The series holds change points: value values[i] on [times[i], times[i+1]),
    with the last value extending to infinity.  t0 must not precede the
    first change point.
    """
    t, v = _as_step_series(times, values)
    if not t[0] <= t0 <= t1:
        raise ValueError(f"need times[0] <= t0 <= t1, got times[0]={t[0]}, t0={t0}, t1={t1}")
    lo, hi = _cum_integral_at(t, v, np.array([t0, t1], dtype=np.float64))
    return float(hi - lo)


def batch_averages(times: Sequence[float], values: Sequence[float], horizon: float,
                   batches: int, start: float = 0.0) -> np.ndarray:
    """Per-batch time averages of a step trajectory over [start, horizon].

    The window splits into `batches` equal spans; entry b is the exact time
    average of the step function over span b.
    """
    if not (isinstance(batches, int) and batches >= 2):
        raise ValueError(f"batches must be an integer >= 2, got {batches!r}")
    t, v = _as_step_series(times, values)
    if not (math.isfinite(horizon) and t[0] <= start < horizon):
        raise ValueError(
            f"need times[0] <= start < horizon, got times[0]={t[0]}, "
            f"start={start!r}, horizon={horizon!r}")
    edges = start + (horizon - start) * np.arange(batches + 1) / batches
    cum = _cum_integral_at(t, v, edges)
    width = (horizon - start) / batches
    return np.diff(cum) / width


def batch_means(times: Sequence[float], values: Sequence[float], horizon: float,
                batches: int = 30, level: float = 0.95,
                start: float = 0.0) -> EstimateWithCI:
    """Batch-means estimate of the time average of a step trajectory.

    [start, horizon] splits into `batches` equal windows; the point
    estimate is the mean of the window averages, which for equal windows
    equals the whole-window time average (batching reorders the integral,
    it never reweights it).  The half width is the Student-t interval on
    the window averages; correlation between adjacent windows biases it low
    when windows are short relative to the renewal scale, hence the
    `reliable` flag rather than any hidden correction.
    """
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    averages = batch_averages(times, values, horizon, batches, start)
    t, _ = _as_step_series(times, values)
    edges = start + (horizon - start) * np.arange(batches + 1) / batches
    interior = np.searchsorted(t, edges[1:-1], side="left")
    counts = np.diff(np.concatenate(([np.searchsorted(t, start, side="right")],
                                     interior, [t.size])))
    sparse = int(np.sum(counts == 0))

    point = float(np.mean(averages))
    sd = float(np.std(averages, ddof=1))
    tcrit = float(sps.t.ppf(0.5 * (1.0 + level), batches - 1))
    half = tcrit * sd / math.sqrt(batches)
    return EstimateWithCI(point=point, half_width=half, level=level,
                          method="batch_means", batches=batches,
                          reliable=batches >= 20, sparse_batches=sparse)


@dataclass(frozen=True)
class OracleEstimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    stderr: float
    trials: int

    def within(self, x: float, n_se: float = 4.0) -> bool:
        """Is x inside n_se standard errors of the estimate?"""
        return abs(x - self.value) <= n_se * self.stderr


def _check_trials(trials: int) -> int:
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 2:
        raise ValueError(f"trials must be an integer >= 2, got {trials!r}")
    return trials


def _mc_reduce(rates: Sequence[float], k: int, trials: int, seed: int,
               per_chunk) -> OracleEstimate:
    """Chunked sampling of the k-th order statistic, reduced by `per_chunk`.

    per_chunk(kth, rng) maps the sampled k-th activation times of one chunk
    to the quantity being averaged.
    """
    rate_arr = np.asarray(list(rates), dtype=np.float64)
    m = rate_arr.size
    if m == 0 or np.any(rate_arr <= 0):
        raise ValueError("rates must be a nonempty sequence of positive numbers")
    if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= m:
        raise ValueError(f"k must be an integer in [1, {m}], got {k!r}")
    trials = _check_trials(trials)
    rng = generator(seed, "oracle")

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        size = min(_MC_CHUNK, trials - done)
        exp = rng.standard_exponential((size, m)) / rate_arr
        kth = np.partition(exp, k - 1, axis=1)[:, k - 1]
        sample = per_chunk(kth, rng)
        total += float(np.sum(sample))
        total_sq += float(np.sum(sample * sample))
        done += size
    mean = total / trials
    var = max(0.0, (total_sq - trials * mean * mean) / (trials - 1))
    return OracleEstimate(value=mean, stderr=math.sqrt(var / trials), trials=trials)


def mc_order_stat_oracle(rates: Sequence[float], k: int, trials: int, seed: int) -> OracleEstimate:
    """Sample mean of X_(k:m) for independent exponential edge clocks."""
    return _mc_reduce(rates, k, trials, seed, lambda kth, rng: kth)


def mc_min_with_update_oracle(rates: Sequence[float], k: int, lam_s: float,
                              trials: int, seed: int) -> OracleEstimate:
    """Sample mean of min(X_(k:m), U) with U ~ Exp(lam_s)."""
    if not (isinstance(lam_s, (int, float)) and math.isfinite(lam_s) and lam_s > 0):
        raise ValueError(f"lam_s must be finite and positive, got {lam_s!r}")

    def reduce(kth: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        u = rng.standard_exponential(kth.size) / lam_s
        return np.minimum(kth, u)

    return _mc_reduce(rates, k, trials, seed, reduce)


def mc_service_prob_oracle(rates: Sequence[float], k: int, lam_s: float,
                           trials: int, seed: int) -> OracleEstimate:
    """Sample estimate of Pr(X_(k:m) <= U) with U ~ Exp(lam_s)."""
    if not (isinstance(lam_s, (int, float)) and math.isfinite(lam_s) and lam_s > 0):
        raise ValueError(f"lam_s must be finite and positive, got {lam_s!r}")

    def reduce(kth: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        u = rng.standard_exponential(kth.size) / lam_s
        return (kth <= u).astype(np.float64)

    return _mc_reduce(rates, k, trials, seed, reduce)


@dataclass(frozen=True)
class GeometricFitReport:
    """Agreement of integer samples with a geometric law.

    z is the standardized gap between the sample mean and the theoretical
    mean; chi2/dof/p_value come from a goodness-of-fit test on the count
    histogram with tail bins pooled so every expected count is >= 5.
    """

    n: int
    p: float
    support_start: int
    sample_mean: float
    theoretical_mean: float
    z: float
    chi2: float
    dof: int
    p_value: float


def geometric_fit(samples: Sequence[int], p: float, support_start: int = 0) -> GeometricFitReport:
    """Test integer samples against Geometric(p) on {support_start, ...}.

    The geometric law here counts failures before the first success when
    support_start is 0 (mean (1-p)/p) and trials to the first success when
    it is 1 (mean 1/p).
    """
    if support_start not in (0, 1):
        raise ValueError(f"support_start must be 0 or 1, got {support_start!r}")
    if not (isinstance(p, (int, float)) and 0.0 < p < 1.0):
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    x = np.asarray(samples, dtype=np.int64)
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    if x.min() < support_start:
        raise ValueError(f"sample {x.min()} below the support start {support_start}")

    shifted = x - support_start
    n = int(x.size)
    q = 1.0 - p
    theo_mean = q / p + support_start
    theo_var = q / (p * p)
    sample_mean = float(x.mean())
    z = (sample_mean - theo_mean) / math.sqrt(theo_var / n)

    # Histogram with geometric tail pooling: keep exact bins while both the
    # bin and the remaining tail have expected count >= 5, then pool the
    # rest into one tail bin.
    cut = 0
    while n * p * q ** cut >= 5.0 and n * q ** (cut + 1) >= 5.0:
        cut += 1
    cut = max(cut, 1)
    counts = np.bincount(shifted, minlength=cut + 1)
    observed = np.concatenate((counts[:cut], [counts[cut:].sum()]))
    expected = np.concatenate((n * p * q ** np.arange(cut), [n * q ** cut]))
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    dof = observed.size - 1
    p_value = float(sps.chi2.sf(chi2, dof)) if dof > 0 else 1.0

    return GeometricFitReport(n=n, p=float(p), support_start=support_start,
                              sample_mean=sample_mean, theoretical_mean=theo_mean,
                              z=float(z), chi2=chi2, dof=dof, p_value=p_value)
