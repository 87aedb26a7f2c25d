"""Pure-Python reference event loop for the gossip simulator.

This module is the semantic authority: the compiled kernel in
keyage.sim._kernel mirrors it event for event, consuming the same
exponential stream in the same order, breaking time ties by the same
sequence numbers, and accumulating the age integrals in the same
floating-point order, so the two backends produce bit-identical results.

The two implementations deliberately keep different decode bookkeeping.
This one tracks literal provider sets per pending version (who has sent me
a key of version v), while the kernel maintains the sorted last-sent
versions of each node's in-edges and reads the k-th largest.  Their
agreement on every output array is itself a tested invariant of the
decode rule.

Events and state transitions:

 * source update at t: the global version N0 increments; every node's age
   rises by one except nodes with requirement 0, which decode instantly.
   Under the memoryless scheme all partial progress on the previous
   version is discarded.
 * edge activation (i -> j) at t: i sends keys.  Memory scheme: one key
   per version the source produced since this edge last fired; j records i
   as a provider of each and decodes the newest version with enough
   providers.  Memoryless scheme: the single newest key; j decodes when
   k distinct in-edges have delivered the current version.

Ages are integer step functions integrated exactly between change points.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..rng import ExpStream

__all__ = ["GossipState", "simulate"]


class GossipState:
    """Mutable simulation state with stepwise event handlers.

    Node and edge indices here are 0-based (the public runner translates
    from 1-based receiver ids).  Handlers must be called with nondecreasing
    times; the driver loop guarantees that, and stepwise tests should too.
    """

    def __init__(self, n_nodes, edge_src, edge_dst, edge_rate, kreq, memoryless,
                 hist_cap, record_series=True, record_event_log=False):
        self.n = int(n_nodes)
        self.edge_src = [int(x) for x in edge_src]
        self.edge_dst = [int(x) for x in edge_dst]
        self.n_edges = len(self.edge_dst)
        self.kreq = [int(x) for x in kreq]
        self.memoryless = bool(memoryless)
        self.hist_cap = int(hist_cap)
        self.record_series = bool(record_series)
        self.record_event_log = bool(record_event_log)

        self.version = 0
        self.n_events = 0
        self.n_updates = 0
        self.decoded = [0] * self.n
        self.last_sent = [0] * self.n_edges
        if self.memoryless:
            # in-edges that delivered a key of the current version
            self.current_providers = [set() for _ in range(self.n)]
        else:
            # per pending version: in-edges that have conveyed it
            self.providers = [dict() for _ in range(self.n)]

        self.integral = [0.0] * self.n
        self.last_t = [0.0] * self.n

        self.ser_node: list[int] = []
        self.ser_t: list[float] = []
        self.ser_age: list[int] = []
        if self.record_series:
            for j in range(self.n):
                self.ser_node.append(j)
                self.ser_t.append(0.0)
                self.ser_age.append(0)
        self.update_ages: list[list[int]] = []

        self.msg_count = [0] * self.n_edges
        self.key_sum = [0] * self.n_edges
        self.hist = np.zeros((self.n_edges, self.hist_cap), dtype=np.int64)
        self.hist_truncated = [False] * self.n_edges

        self.ev_t: list[float] = []
        self.ev_stream: list[int] = []
        self.ev_ages: list[list[int]] = []

    def _bump_age(self, j: int, t: float, age_old: int) -> None:
        self.integral[j] += age_old * (t - self.last_t[j])
        self.last_t[j] = t

    def _append_series(self, j: int, t: float, age: int) -> None:
        if self.record_series:
            self.ser_node.append(j)
            self.ser_t.append(t)
            self.ser_age.append(age)

    def handle_source_update(self, t: float) -> None:
        """The source produces the next version and broadcasts its keys."""
        self.version += 1
        v = self.version
        row = [0] * self.n
        for j in range(self.n):
            if self.kreq[j] == 0:
                # own key suffices: decoded the instant the update lands
                self.decoded[j] = v
            else:
                self._bump_age(j, t, v - 1 - self.decoded[j])
                if self.memoryless:
                    self.current_providers[j].clear()
                age_new = v - self.decoded[j]
                self._append_series(j, t, age_new)
                row[j] = age_new
        self.update_ages.append(row)
        self.n_updates += 1

    def handle_edge_activation(self, e: int, t: float) -> None:
        """Edge e fires: its source node sends keys to its destination."""
        j = self.edge_dst[e]
        self.msg_count[e] += 1
        if self.memoryless:
            self.key_sum[e] += 1
            self.hist[e, min(1, self.hist_cap - 1)] += 1
            if self.kreq[j] >= 1 and self.decoded[j] < self.version:
                got = self.current_providers[j]
                if e not in got:
                    got.add(e)
                    if len(got) >= self.kreq[j]:
                        self._bump_age(j, t, self.version - self.decoded[j])
                        self.decoded[j] = self.version
                        self._append_series(j, t, 0)
            return

        cnt = self.version - self.last_sent[e]
        self.key_sum[e] += cnt
        if cnt >= self.hist_cap:
            self.hist[e, self.hist_cap - 1] += 1
            self.hist_truncated[e] = True
        else:
            self.hist[e, cnt] += 1
        if cnt == 0:
            return
        lo = self.last_sent[e]
        self.last_sent[e] = self.version
        if self.kreq[j] == 0:
            return
        prov = self.providers[j]
        dec = self.decoded[j]
        for v in range(max(lo, dec) + 1, self.version + 1):
            prov.setdefault(v, set()).add(e)
        best = dec
        for v in range(self.version, dec, -1):
            s = prov.get(v)
            if s is not None and len(s) >= self.kreq[j]:
                best = v
                break
        if best > dec:
            self._bump_age(j, t, self.version - dec)
            self.decoded[j] = best
            for v in [v for v in prov if v <= best]:
                del prov[v]
            self._append_series(j, t, self.version - best)

    def log_event(self, t: float, stream: int) -> None:
        if self.record_event_log:
            self.ev_t.append(t)
            self.ev_stream.append(stream)
            self.ev_ages.append([self.version - d for d in self.decoded])

    def finalize(self, horizon: float) -> None:
        """Extend every node's last age segment to the horizon."""
        for j in range(self.n):
            self.integral[j] += (self.version - self.decoded[j]) * (horizon - self.last_t[j])

    def result_dict(self) -> dict:
        n = self.n
        return {
            "n_events": self.n_events,
            "n_updates": self.n_updates,
            "version": self.version,
            "integral": np.asarray(self.integral, dtype=np.float64),
            "ser_node": np.asarray(self.ser_node, dtype=np.int32),
            "ser_t": np.asarray(self.ser_t, dtype=np.float64),
            "ser_age": np.asarray(self.ser_age, dtype=np.int64),
            "ages_at_update": (np.asarray(self.update_ages, dtype=np.int64)
                               if self.update_ages else np.zeros((0, n), dtype=np.int64)),
            "msg_count": np.asarray(self.msg_count, dtype=np.int64),
            "key_sum": np.asarray(self.key_sum, dtype=np.int64),
            "hist": self.hist,
            "hist_truncated": np.asarray(self.hist_truncated, dtype=np.bool_),
            "ev_t": np.asarray(self.ev_t, dtype=np.float64),
            "ev_stream": np.asarray(self.ev_stream, dtype=np.int32),
            "ev_ages": (np.asarray(self.ev_ages, dtype=np.int64)
                        if self.ev_ages else np.zeros((0, n), dtype=np.int64)),
        }


def simulate(lam_s, n_nodes, edge_src, edge_dst, edge_rate, kreq, memoryless,
             horizon, stream: ExpStream, hist_cap,
             record_series=True, record_event_log=False) -> dict:
    """Drive GossipState over [0, horizon] with lazy Poisson scheduling.

    Each stream (stream 0 is the source, stream e+1 is edge e) keeps
    exactly one pending event in the heap; on firing it draws its next
    interarrival.  Ties in time break by insertion sequence, which makes
    the event order a deterministic function of the drawn stream alone.
    """
    state = GossipState(n_nodes, edge_src, edge_dst, edge_rate, kreq, memoryless,
                        hist_cap, record_series, record_event_log)
    rates = [float(lam_s)] + [float(r) for r in edge_rate]
    heap: list[tuple[float, int, int]] = []
    seq = 0
    for s, r in enumerate(rates):
        heapq.heappush(heap, (stream.draw() / r, seq, s))
        seq += 1
    while heap:
        te, _, s = heapq.heappop(heap)
        if te > horizon:
            break
        state.n_events += 1
        if s == 0:
            state.handle_source_update(te)
        else:
            state.handle_edge_activation(s - 1, te)
        state.log_event(te, s)
        heapq.heappush(heap, (te + stream.draw() / rates[s], seq, s))
        seq += 1
    state.finalize(horizon)
    return state.result_dict()
