"""Public simulator entry point: validation, backend dispatch, result wrapping."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..net import Network, check_feasibility
from ..rng import GENERATOR_ID, ExpStream, generator
from ..stats import integrate_step
from . import engine

try:
    from . import _kernel
except ImportError:  # pragma: no cover - exercised only without the extension
    _kernel = None

__all__ = [
    "SCHEMES",
    "InfeasibleNetworkError",
    "SchemeError",
    "SimResult",
    "available_backends",
    "default_backend",
    "run",
    "extract_cycles",
]

SCHEMES = ("memory", "memoryless")


class InfeasibleNetworkError(ValueError):
    """Some node demands more gossiped keys than it has in-edges."""


class SchemeError(ValueError):
    """Operation applied to a run of the wrong scheme."""


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _kernel is not None else ("python",)


def default_backend() -> str:
    """Compiled kernel when present; KEYAGE_BACKEND overrides."""
    env = os.environ.get("KEYAGE_BACKEND")
    if env:
        if env not in ("cython", "python"):
            raise ValueError(f"KEYAGE_BACKEND must be 'cython' or 'python', got {env!r}")
        if env == "cython" and _kernel is None:
            raise RuntimeError("KEYAGE_BACKEND=cython but the compiled kernel is not importable")
        return env
    return "cython" if _kernel is not None else "python"


def _choose_hist_cap(lam_s: float, edge_rates: Sequence[float]) -> int:
    """Histogram length covering the geometric key-count law to ~1e-9 tail mass."""
    if not edge_rates:
        return 2
    r_min = min(edge_rates)
    q = lam_s / (r_min + lam_s)  # P(another update lands before the edge fires)
    tail = int(math.ceil(math.log(1e-9) / math.log(q))) + 1
    return max(18, min(4096, tail))


@dataclass
class SimResult:
    """Outputs of one simulated run.

    Age trajectories are integer step functions; `age_integral` is their
    exact integral over [0, horizon] accumulated event by event.  The
    change-point series (when recorded) and the per-update age matrix use
    1-based node ids in the accessors, matching Network.
    """

    network: Network
    k: tuple[int, ...]
    scheme: str
    horizon: float
    seed: int
    warmup: float
    backend: str
    rng_id: str
    n_events: int
    n_updates: int
    final_version: int
    age_integral: np.ndarray
    ages_at_update: np.ndarray
    msg_count: np.ndarray
    key_sum: np.ndarray
    key_hist: np.ndarray
    hist_truncated: np.ndarray
    series_recorded: bool
    _ser_node: np.ndarray = field(repr=False)
    _ser_t: np.ndarray = field(repr=False)
    _ser_age: np.ndarray = field(repr=False)
    event_times: np.ndarray | None = field(default=None, repr=False)
    event_streams: np.ndarray | None = field(default=None, repr=False)
    event_ages: np.ndarray | None = field(default=None, repr=False)

    def age_series(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        """Change points (times, ages) of one node's age step function."""
        if not self.series_recorded:
            raise ValueError("run() was called with record_series=False")
        if not 1 <= node <= self.network.n:
            raise ValueError(f"node must be in 1..{self.network.n}, got {node}")
        mask = self._ser_node == node - 1
        return self._ser_t[mask], self._ser_age[mask].astype(np.float64)

    def time_average(self, node: int | None = None, warmup: float | None = None):
        """Empirical time-average age over [warmup*horizon, horizon].

        With the default zero warmup this is age_integral/horizon, exact.
        A positive warmup fraction needs the recorded series.  node=None
        returns the per-node vector.
        """
        frac = self.warmup if warmup is None else warmup
        if not 0.0 <= frac < 1.0:
            raise ValueError(f"warmup fraction must be in [0, 1), got {frac!r}")
        if frac == 0.0:
            vals = self.age_integral / self.horizon
        else:
            t0 = frac * self.horizon
            out = np.empty(self.network.n)
            for j in range(1, self.network.n + 1):
                t, a = self.age_series(j)
                out[j - 1] = integrate_step(t, a, t0, self.horizon) / (self.horizon - t0)
            vals = out
        if node is None:
            return vals
        if not 1 <= node <= self.network.n:
            raise ValueError(f"node must be in 1..{self.network.n}, got {node}")
        return float(vals[node - 1])

    def mean_message_keys(self, edge_index: int) -> float:
        """Average keys per message on one edge (exact counters, not the histogram)."""
        if not 0 <= edge_index < self.network.n_edges:
            raise ValueError(f"edge_index must be in 0..{self.network.n_edges - 1}")
        m = int(self.msg_count[edge_index])
        return float(self.key_sum[edge_index]) / m if m else math.nan


def run(network: Network, k: int | Sequence[int], scheme: str, horizon: float,
        seed: int, *, warmup: float = 0.0, backend: str | None = None,
        record_series: bool = True, record_event_log: bool = False,
        hist_cap: int | None = None) -> SimResult:
    """Simulate the gossip protocol on [0, horizon] and return exact age integrals.

    `k` is the per-node gossip-key requirement (an int broadcasts to all
    receivers).  The network must be feasible in the per-node sense: every
    receiver needs in-degree >= k_j.  Identical arguments give bit-identical
    results on every backend.
    """
    if scheme not in SCHEMES:
        raise SchemeError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if not (isinstance(horizon, (int, float)) and math.isfinite(horizon) and horizon > 0):
        raise ValueError(f"horizon must be a positive finite time, got {horizon!r}")
    if not 0.0 <= warmup < 1.0:
        raise ValueError(f"warmup fraction must be in [0, 1), got {warmup!r}")
    kvec = tuple(int(k) for _ in range(network.n)) if isinstance(k, int) else tuple(int(x) for x in k)
    report = check_feasibility(network, kvec, mode="per_node_strict")
    if not report.feasible:
        bad = [(nf.node, nf.in_degree, nf.required) for nf in report.per_node if not nf.satisfied]
        raise InfeasibleNetworkError(
            f"nodes with in-degree < required keys (node, in_degree, k): {bad}")
    backend = default_backend() if backend is None else backend
    if backend not in available_backends():
        raise ValueError(f"backend {backend!r} not available (have {available_backends()})")
    impl = _kernel if backend == "cython" else engine

    cap = _choose_hist_cap(network.source_rate, network.edge_rate) if hist_cap is None else int(hist_cap)
    cap = max(cap, 2)
    stream = ExpStream(generator(seed, "sim"))
    raw = impl.simulate(
        network.source_rate, network.n,
        np.asarray(network.edge_src, dtype=np.int64) - 1,
        np.asarray(network.edge_dst, dtype=np.int64) - 1,
        np.asarray(network.edge_rate, dtype=np.float64),
        np.asarray(kvec, dtype=np.int64),
        scheme == "memoryless", float(horizon), stream, cap,
        record_series, record_event_log,
    )
    return SimResult(
        network=network, k=kvec, scheme=scheme, horizon=float(horizon),
        seed=seed, warmup=warmup, backend=backend, rng_id=GENERATOR_ID,
        n_events=raw["n_events"], n_updates=raw["n_updates"],
        final_version=raw["version"], age_integral=raw["integral"],
        ages_at_update=raw["ages_at_update"], msg_count=raw["msg_count"],
        key_sum=raw["key_sum"], key_hist=raw["hist"],
        hist_truncated=raw["hist_truncated"], series_recorded=record_series,
        _ser_node=raw["ser_node"], _ser_t=raw["ser_t"], _ser_age=raw["ser_age"],
        event_times=raw["ev_t"] if record_event_log else None,
        event_streams=raw["ev_stream"] if record_event_log else None,
        event_ages=raw["ev_ages"] if record_event_log else None,
    )


def extract_cycles(result: SimResult, node: int) -> np.ndarray:
    """Per-cycle missed-update counts M_a of one memoryless node.

    The age sampled just after each update forms a success-run chain that
    resets to 1 whenever the previous version was decoded in time; M_a is
    the number of updates between consecutive resets, geometric on
    {1, 2, ...} with success probability mu.
    """
    if result.scheme != "memoryless":
        raise SchemeError("cycle extraction is defined for memoryless runs only")
    if not 1 <= node <= result.network.n:
        raise ValueError(f"node must be in 1..{result.network.n}, got {node}")
    ages = result.ages_at_update[:, node - 1]
    marks = np.flatnonzero(ages == 1)
    return np.diff(marks)
