"""Gossip network topology.

Node 0 is the source; receivers are numbered 1..n.  The source's broadcast
links (rate lambda_s, one per receiver) are implicit and never appear in
the edge list.  Edges listed here are the receiver-to-receiver gossip
links, each an independent Poisson activation clock.

Two topology kinds are supported: an explicit digraph given edge by edge,
and the scalable homogeneous network ("shn") where every receiver gossips
to every other at rate lambda_e / (n-1), so each node's total out-rate is
lambda_e regardless of n.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from math import isfinite
from typing import Iterable, Sequence

__all__ = [
    "SOURCE_ID",
    "NetworkError",
    "NetworkSpec",
    "Network",
    "NodeFeasibility",
    "FeasibilityReport",
    "build_network",
    "shn",
    "check_feasibility",
    "FEASIBILITY_MODES",
]

SOURCE_ID = 0

FEASIBILITY_MODES = ("per_node_strict", "paper_literal")


class NetworkError(ValueError):
    """Malformed network description: bad ids, rates, or duplicate edges."""


@dataclass(frozen=True)
class NetworkSpec:
    """Declarative description of a gossip network prior to validation.

    For topology_kind "explicit", `edges` lists (src, dst, rate) triples
    with src, dst in 1..n.  For "shn", `edges` must be empty and
    `gossip_rate` gives the per-node total out-rate lambda_e.
    """

    n: int
    source_rate: float
    topology_kind: str = "explicit"
    edges: tuple[tuple[int, int, float], ...] = ()
    gossip_rate: float | None = None


@dataclass(frozen=True)
class Network:
    """Validated topology with parallel per-edge arrays and in-adjacency.

    Immutable after construction; all methods are read-only, so instances
    are safe to share across worker processes and threads.  Edge arrays are
    index-aligned: edge e runs edge_src[e] -> edge_dst[e] at edge_rate[e].
    """

    n: int
    source_rate: float
    kind: str
    gossip_rate: float | None
    edge_src: tuple[int, ...]
    edge_dst: tuple[int, ...]
    edge_rate: tuple[float, ...]
    in_edges: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    def _check_node(self, node: int) -> None:
        if not 1 <= node <= self.n:
            raise NetworkError(f"receiver id must be in 1..{self.n}, got {node}")

    def in_edge_ids(self, node: int) -> tuple[int, ...]:
        """Indices into the edge arrays of all edges terminating at `node`."""
        self._check_node(node)
        return self.in_edges[node - 1]

    def in_degree(self, node: int) -> int:
        return len(self.in_edge_ids(node))

    def in_neighbors(self, node: int) -> tuple[int, ...]:
        return tuple(self.edge_src[e] for e in self.in_edge_ids(node))

    def in_rates(self, node: int) -> tuple[float, ...]:
        return tuple(self.edge_rate[e] for e in self.in_edge_ids(node))

    def out_rate(self, node: int) -> float:
        """Total gossip rate out of `node` (sum over its outgoing edges)."""
        self._check_node(node)
        return sum(self.edge_rate[e] for e in range(self.n_edges) if self.edge_src[e] == node)

    @property
    def profile_id(self) -> str:
        """Short stable digest of the edge set, used to tag CSV rows."""
        h = hashlib.sha256()
        h.update(f"n={self.n};kind={self.kind}".encode())
        for s, d, r in zip(self.edge_src, self.edge_dst, self.edge_rate):
            h.update(f";{s}>{d}@{r!r}".encode())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class NodeFeasibility:
    node: int
    in_degree: int
    required: int
    satisfied: bool


@dataclass(frozen=True)
class FeasibilityReport:
    """Verdict of check_feasibility, carrying both interpretations.

    `feasible` follows the requested mode.  per_node_strict demands
    in_degree(j) >= k_j at every receiver; paper_literal only compares the
    minimum in-degree against the minimum requirement, which can pass
    networks where some high-k node can never decode.
    """

    feasible: bool
    mode: str
    per_node: tuple[NodeFeasibility, ...]
    feasible_per_node_strict: bool
    feasible_paper_literal: bool


def _check_rate(value: float, name: str) -> float:
    if not (isinstance(value, (int, float)) and isfinite(value) and value > 0):
        raise NetworkError(f"{name} must be a finite positive rate, got {value!r}")
    return float(value)


def build_network(spec: NetworkSpec) -> Network:
    """Validate a NetworkSpec and index it into an immutable Network.

    Raises NetworkError for non-positive or non-finite rates, node ids
    outside 1..n (the source's links are implicit, so id 0 is rejected),
    self-loops, duplicate directed edges, and shn specs that also carry an
    explicit edge list.
    """
    if not isinstance(spec.n, int) or isinstance(spec.n, bool) or spec.n < 1:
        raise NetworkError(f"n must be a positive integer, got {spec.n!r}")
    source_rate = _check_rate(spec.source_rate, "source_rate")

    if spec.topology_kind == "shn":
        if spec.edges:
            raise NetworkError("shn topology is fully determined by (n, gossip_rate); "
                               "explicit edges are not allowed")
        if spec.n < 2:
            raise NetworkError("shn topology needs at least 2 receivers")
        if spec.gossip_rate is None:
            raise NetworkError("shn topology requires gossip_rate")
        lam_e = _check_rate(spec.gossip_rate, "gossip_rate")
        per_edge = lam_e / (spec.n - 1)
        triples = [(i, j, per_edge)
                   for i in range(1, spec.n + 1)
                   for j in range(1, spec.n + 1) if j != i]
        gossip_rate: float | None = lam_e
    elif spec.topology_kind == "explicit":
        if spec.gossip_rate is not None:
            raise NetworkError("gossip_rate only applies to shn topologies")
        triples = []
        for entry in spec.edges:
            try:
                src, dst, rate = entry
            except (TypeError, ValueError):
                raise NetworkError(f"edge entries must be (src, dst, rate) triples, got {entry!r}") from None
            for node, role in ((src, "src"), (dst, "dst")):
                if not isinstance(node, int) or isinstance(node, bool):
                    raise NetworkError(f"edge {role} must be an integer node id, got {node!r}")
                if node == SOURCE_ID:
                    raise NetworkError("source links are implicit; node 0 cannot appear in edges")
                if not 1 <= node <= spec.n:
                    raise NetworkError(f"edge {role} {node} outside receiver range 1..{spec.n}")
            if src == dst:
                raise NetworkError(f"self-loop on node {src} is not allowed")
            triples.append((src, dst, _check_rate(rate, f"rate of edge {src}->{dst}")))
        gossip_rate = None
    else:
        raise NetworkError(f"unknown topology_kind {spec.topology_kind!r}")

    seen: set[tuple[int, int]] = set()
    for src, dst, _ in triples:
        if (src, dst) in seen:
            raise NetworkError(f"duplicate edge {src}->{dst}")
        seen.add((src, dst))

    in_lists: list[list[int]] = [[] for _ in range(spec.n)]
    for e, (_, dst, _) in enumerate(triples):
        in_lists[dst - 1].append(e)

    return Network(
        n=spec.n,
        source_rate=source_rate,
        kind=spec.topology_kind,
        gossip_rate=gossip_rate,
        edge_src=tuple(t[0] for t in triples),
        edge_dst=tuple(t[1] for t in triples),
        edge_rate=tuple(t[2] for t in triples),
        in_edges=tuple(tuple(lst) for lst in in_lists),
    )


def shn(n: int, gossip_rate: float, source_rate: float) -> Network:
    """Scalable homogeneous network: complete digraph, per-edge rate lambda_e/(n-1)."""
    return build_network(NetworkSpec(n=n, source_rate=source_rate,
                                     topology_kind="shn", gossip_rate=gossip_rate))


def check_feasibility(network: Network, k: int | Sequence[int],
                      mode: str = "per_node_strict") -> FeasibilityReport:
    """Can every receiver ever decode? Compare in-degrees against key requirements.

    `k` is the per-receiver requirement vector (k_j gossiped keys needed by
    node j, entry 0 meaning the node decodes from its own key alone); an int
    broadcasts to all nodes.  Both mode verdicts are always computed and
    reported; `mode` only selects which one the headline `feasible` field
    follows.
    """
    if mode not in FEASIBILITY_MODES:
        raise NetworkError(f"mode must be one of {FEASIBILITY_MODES}, got {mode!r}")
    if isinstance(k, int) and not isinstance(k, bool):
        k = (k,) * network.n
    k = tuple(k)
    if len(k) != network.n:
        raise NetworkError(f"k vector has length {len(k)}, expected n={network.n}")
    for kj in k:
        if not isinstance(kj, int) or isinstance(kj, bool) or kj < 0:
            raise NetworkError(f"key requirements must be integers >= 0, got {kj!r}")

    per_node = tuple(
        NodeFeasibility(node=j, in_degree=network.in_degree(j), required=k[j - 1],
                        satisfied=network.in_degree(j) >= k[j - 1])
        for j in range(1, network.n + 1)
    )
    strict = all(nf.satisfied for nf in per_node)
    literal = min(nf.in_degree for nf in per_node) >= min(k)
    return FeasibilityReport(
        feasible=strict if mode == "per_node_strict" else literal,
        mode=mode,
        per_node=per_node,
        feasible_per_node_strict=strict,
        feasible_paper_literal=literal,
    )
