"""Feasibility predicates over static configurations and their histories.

A configuration is *separable* when some connected set of free nodes, once
removed, leaves the occupied nodes in two or more components.  Testing whole
free components is enough: any connected free cut-set lies inside one free
component, and removing more free nodes from the graph can only split the
occupied nodes further, never reconnect them.

A history is *separating* when its last configuration is separable through a
cut-set the malicious agent could have reached, moving through nodes that
were free at the time it crossed them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from rva.errors import OracleTooLarge, UnsupportedOperation
from rva.topology import Topology, reachable


@dataclass(frozen=True)
class StaticConfig:
    topology: Topology
    occupied: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "occupied", frozenset(self.occupied))
        if not self.occupied:
            raise ValueError("a configuration needs at least one occupied node")

    @property
    def free(self) -> frozenset[int]:
        return frozenset(self.topology.nodes()) - self.occupied


@dataclass
class CutCertificate:
    cut_set: list[int]
    components: list[list[int]]
    # (time step, nodes walked at that step) segments, for separating histories
    temporal_path: list[tuple[int, list[int]]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "cut_set": self.cut_set,
            "components": self.components,
            "temporal_path": [{"t": t, "nodes": nodes} for t, nodes in self.temporal_path],
        }


def components(t: Topology, nodes: Iterable[int]) -> list[set[int]]:
    """Connected components of the subgraph induced by ``nodes``."""
    left = set(nodes)
    out = []
    while left:
        v = min(left)
        comp = reachable(t, v, left)
        out.append(comp)
        left -= comp
    return out


def _split(t: Topology, removed: set[int] | frozenset[int], occupied: frozenset[int]) -> list[list[int]]:
    """Occupied nodes grouped by component of the graph without ``removed``."""
    rest = set(t.nodes()) - set(removed)
    groups = []
    seen: set[int] = set()
    for v in sorted(occupied):
        if v in seen:
            continue
        comp = reachable(t, v, rest)
        seen |= comp
        groups.append(sorted(comp & occupied))
    return groups


def is_separable(c: StaticConfig) -> CutCertificate | None:
    certs = _separators(c)
    return certs[0] if certs else None


def _separators(c: StaticConfig) -> list[CutCertificate]:
    out = []
    for comp in components(c.topology, c.free):
        groups = _split(c.topology, comp, c.occupied)
        if len(groups) >= 2:
            out.append(CutCertificate(sorted(comp), groups))
    return out


def brute_force_separable(c: StaticConfig, guard: int = 20) -> bool:
    """Definition-level check: try every connected subset of free nodes."""
    free = sorted(c.free)
    if len(free) > guard:
        raise OracleTooLarge(f"{len(free)} free nodes exceed the guard of {guard}")
    if len(c.occupied) < 2:
        return False
    t = c.topology
    for size in range(1, len(free) + 1):
        for subset in combinations(free, size):
            chosen = set(subset)
            if len(reachable(t, subset[0], chosen)) != size:
                continue
            if len(_split(t, chosen, c.occupied)) >= 2:
                return True
    return False


def check_certificate(c: StaticConfig, cert: CutCertificate) -> bool:
    """Re-verify a certificate by a direct disconnection test."""
    cut = set(cert.cut_set)
    if not cut or cut & c.occupied or not cut <= set(c.topology.nodes()):
        return False
    if len(reachable(c.topology, min(cut), cut)) != len(cut):
        return False
    return len(_split(c.topology, cut, c.occupied)) >= 2


def malicious_reach_step(prev_reach: Iterable[int], next_free: Iterable[int], topology: Topology) -> set[int]:
    """Where the malicious agent can be after one more step.

    It must survive the step (its node stays free) and then may run anywhere
    through currently free nodes.
    """
    nf = set(next_free)
    out: set[int] = set()
    for v in set(prev_reach) & nf:
        if v not in out:
            out |= reachable(topology, v, nf)
    return out


def _reach_with_parents(prev: dict[int, int | None], free: set[int], t: Topology) -> dict[int, int | None]:
    """BFS version of malicious_reach_step that records how each node was entered."""
    parent: dict[int, int | None] = {}
    todo = deque()
    for v in sorted(set(prev) & free):
        parent[v] = None
        todo.append(v)
    while todo:
        v = todo.popleft()
        for u in t.neighbors(v):
            if u in free and u not in parent:
                parent[u] = v
                todo.append(u)
    return parent


def is_separating(history: Sequence[StaticConfig]) -> CutCertificate | None:
    """Separating-history test with a temporal path witness for the malicious agent."""
    if not history:
        raise ValueError("empty history")
    t = history[0].topology
    last = history[-1]
    certs = _separators(last)
    if not certs:
        return None
    if len(history) == 1:
        cert = certs[0]
        cert.temporal_path = [(0, [cert.cut_set[0]])]
        return cert

    for branch in components(t, history[0].free):
        layers = [{v: None for v in branch}]
        for conf in history[1:]:
            layers.append(_reach_with_parents(layers[-1], set(conf.free), t))
            if not layers[-1]:
                break
        reach = set(layers[-1]) if len(layers) == len(history) else set()
        for cert in certs:
            hit = sorted(reach & set(cert.cut_set))
            if hit:
                cert.temporal_path = _walk_back(layers, hit[0])
                return cert
    return None


def _walk_back(layers: list[dict[int, int | None]], target: int) -> list[tuple[int, list[int]]]:
    segments = []
    v = target
    for step in range(len(layers) - 1, -1, -1):
        seg = [v]
        parent = layers[step]
        while parent[v] is not None:
            v = parent[v]
            seg.append(v)
        segments.append((step, seg[::-1]))
    return segments[::-1]


def occupied_connected(c: StaticConfig) -> bool:
    return len(components(c.topology, c.occupied)) == 1


def has_holes(c: StaticConfig) -> bool:
    t = c.topology
    if not t.is_mesh:
        raise UnsupportedOperation("holes are only defined on meshes")
    return any(not any(t.on_border(v) for v in comp) for comp in components(t, c.free))


def history_from_occupied(t: Topology, steps: Iterable[Iterable[int]]) -> list[StaticConfig]:
    return [StaticConfig(t, frozenset(occ)) for occ in steps]


def connected_hole_free_sets(t: Topology, min_size: int = 1, max_size: int | None = None) -> list[frozenset[int]]:
    """Every connected, hole-free occupied set of a mesh, by plain enumeration."""
    if not t.is_mesh:
        raise UnsupportedOperation("hole-freeness is only defined on meshes")
    n = t.node_count
    max_size = n if max_size is None else max_size
    out = []
    for mask in range(1, 1 << n):
        size = bin(mask).count("1")
        if not min_size <= size <= max_size:
            continue
        occ = frozenset(v for v in range(n) if mask >> v & 1)
        c = StaticConfig(t, occ)
        if occupied_connected(c) and not has_holes(c):
            out.append(occ)
    return out
