"""Network topologies: anonymous rings with a special node, oriented meshes,
and arbitrary undirected graphs.

Nodes are integers ``0..n-1``.  Mesh node ``(row, col)`` has id
``row * cols + col``; row 0 is the North border and column 0 the West border.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

from rva.errors import InvalidTopology, UnsupportedOperation


class Kind(str, Enum):
    ORIENTED_RING = "oriented-ring"
    UNORIENTED_RING = "unoriented-ring"
    ORIENTED_MESH = "oriented-mesh"
    GENERAL = "general"


# Ring port labels.  On an oriented ring they mean clockwise/counter-clockwise
# for everyone; on an unoriented ring they are just two distinct local names.
CW, CCW = "cw", "ccw"
PORT_A, PORT_B = "a", "b"

# Mesh directions and their (drow, dcol) offsets.
N, S, E, W = "N", "S", "E", "W"
OFFSETS = {N: (-1, 0), S: (1, 0), E: (0, 1), W: (0, -1)}
OPPOSITE = {N: S, S: N, E: W, W: E}

# Canonical order of the twelve cells within two hops of a mesh node.
TWO_HOP_ORDER = ("N", "S", "E", "W", "NE", "NW", "SE", "SW", "NN", "SS", "EE", "WW")
TWO_HOP_OFFSETS = {
    "N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1),
    "NE": (-1, 1), "NW": (-1, -1), "SE": (1, 1), "SW": (1, -1),
    "NN": (-2, 0), "SS": (2, 0), "EE": (0, 2), "WW": (0, -2),
}


class Cell(NamedTuple):
    """One slot of a two-hop view.  ``node`` is None when the cell is off-grid."""

    name: str
    node: int | None

    @property
    def exists(self) -> bool:
        return self.node is not None


@dataclass(frozen=True)
class Topology:
    kind: Kind
    adjacency: tuple[tuple[tuple[str, int], ...], ...]
    special_node: int | None = None
    mesh_dims: tuple[int, int] | None = None

    @property
    def node_count(self) -> int:
        return len(self.adjacency)

    @property
    def is_ring(self) -> bool:
        return self.kind in (Kind.ORIENTED_RING, Kind.UNORIENTED_RING)

    @property
    def is_mesh(self) -> bool:
        return self.kind is Kind.ORIENTED_MESH

    def nodes(self) -> range:
        return range(len(self.adjacency))

    def neighbors(self, v: int) -> list[int]:
        return [u for _, u in self.adjacency[v]]

    def port(self, v: int, label: str) -> int:
        """Neighbor of ``v`` through the port named ``label``."""
        for name, u in self.adjacency[v]:
            if name == label:
                return u
        raise KeyError(f"node {v} has no port {label!r}")

    def ports(self, v: int) -> tuple[str, ...]:
        return tuple(name for name, _ in self.adjacency[v])

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edges(self) -> list[tuple[int, int]]:
        return sorted({(min(u, v), max(u, v)) for u in self.nodes() for v in self.neighbors(u)})

    # mesh helpers

    def coords(self, v: int) -> tuple[int, int]:
        if self.mesh_dims is None:
            raise UnsupportedOperation("coordinates are only defined on meshes")
        return divmod(v, self.mesh_dims[1])

    def node_at(self, row: int, col: int) -> int | None:
        if self.mesh_dims is None:
            raise UnsupportedOperation("coordinates are only defined on meshes")
        rows, cols = self.mesh_dims
        if 0 <= row < rows and 0 <= col < cols:
            return row * cols + col
        return None

    def on_border(self, v: int) -> bool:
        rows, cols = self.mesh_dims
        r, c = self.coords(v)
        return r == 0 or c == 0 or r == rows - 1 or c == cols - 1

    def to_json(self) -> dict:
        if self.kind is Kind.ORIENTED_MESH:
            rows, cols = self.mesh_dims
            return {"kind": self.kind.value, "dims": [rows, cols]}
        if self.is_ring:
            return {"kind": self.kind.value, "n": self.node_count, "special_index": self.special_node}
        return {
            "kind": self.kind.value,
            "adjacency": [[u for _, u in ports] for ports in self.adjacency],
            "special_index": self.special_node,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Topology":
        try:
            kind = Kind(data["kind"])
        except (KeyError, ValueError) as exc:
            raise InvalidTopology(f"unknown topology kind in {data!r}") from exc
        try:
            if kind is Kind.ORIENTED_RING:
                return build_oriented_ring(data["n"], data.get("special_index", 0))
            if kind is Kind.UNORIENTED_RING:
                return build_unoriented_ring(data["n"], data.get("special_index", 0))
            if kind is Kind.ORIENTED_MESH:
                rows, cols = data["dims"]
                return build_oriented_mesh(rows, cols)
            return build_general(data["adjacency"], data.get("special_index"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidTopology(f"malformed {kind.value} topology: {exc}") from exc


def build_oriented_ring(n: int, special_index: int = 0) -> Topology:
    _check_ring(n, special_index)
    adjacency = tuple(((CW, (v + 1) % n), (CCW, (v - 1) % n)) for v in range(n))
    return Topology(Kind.ORIENTED_RING, adjacency, special_node=special_index)


def build_unoriented_ring(n: int, special_index: int = 0) -> Topology:
    # Port "a" happens to lead to v+1, but nothing outside this module relies
    # on that: agents resolve directions through their own Chirality.
    _check_ring(n, special_index)
    adjacency = tuple(((PORT_A, (v + 1) % n), (PORT_B, (v - 1) % n)) for v in range(n))
    return Topology(Kind.UNORIENTED_RING, adjacency, special_node=special_index)


def _check_ring(n: int, special_index: int) -> None:
    if not isinstance(n, int) or n < 3:
        raise InvalidTopology(f"a ring needs at least 3 nodes, got n={n!r}")
    if not 0 <= special_index < n:
        raise InvalidTopology(f"special node {special_index} outside ring of size {n}")


def build_oriented_mesh(rows: int, cols: int) -> Topology:
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InvalidTopology(f"mesh {rows}x{cols} is too small")
    adjacency = []
    for r in range(rows):
        for c in range(cols):
            ports = []
            for d in (N, S, E, W):
                dr, dc = OFFSETS[d]
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    ports.append((d, rr * cols + cc))
            adjacency.append(tuple(ports))
    return Topology(Kind.ORIENTED_MESH, tuple(adjacency), mesh_dims=(rows, cols))


def build_general(adjacency: Iterable[Iterable[int]], special_index: int | None = None) -> Topology:
    """Undirected graph from neighbor lists; ports are labelled ``p0, p1, ...``."""
    lists = [list(nbrs) for nbrs in adjacency]
    n = len(lists)
    if n == 0:
        raise InvalidTopology("empty graph")
    for v, nbrs in enumerate(lists):
        if len(set(nbrs)) != len(nbrs):
            raise InvalidTopology(f"node {v} lists a neighbor twice")
        for u in nbrs:
            if not 0 <= u < n or u == v:
                raise InvalidTopology(f"bad neighbor {u} of node {v}")
            if v not in lists[u]:
                raise InvalidTopology(f"edge {v}-{u} is not symmetric")
    if special_index is not None and not 0 <= special_index < n:
        raise InvalidTopology(f"special node {special_index} outside graph")
    built = tuple(tuple((f"p{i}", u) for i, u in enumerate(nbrs)) for nbrs in lists)
    return Topology(Kind.GENERAL, built, special_node=special_index)


def two_hop_cells(t: Topology, v: int) -> tuple[Cell, ...]:
    """The twelve cells at Manhattan distance 1 or 2 from ``v``, in canonical order."""
    if not t.is_mesh:
        raise UnsupportedOperation("two_hop_cells needs an oriented mesh")
    r, c = t.coords(v)
    return tuple(
        Cell(name, t.node_at(r + TWO_HOP_OFFSETS[name][0], c + TWO_HOP_OFFSETS[name][1]))
        for name in TWO_HOP_ORDER
    )


class Chirality(NamedTuple):
    """An agent's private sense of direction on a ring.

    ``sign`` is +1 when the agent's clockwise follows the topology's first
    port and -1 otherwise.
    """

    sign: int

    def port(self, t: Topology, clockwise: bool) -> str:
        first, second = t.ports(0)
        forward = clockwise == (self.sign > 0)
        return first if forward else second

    def step(self, t: Topology, v: int, clockwise: bool = True) -> int:
        return t.port(v, self.port(t, clockwise))

    def order(self, t: Topology, start: int) -> list[int]:
        """Nodes visited following my-clockwise from ``start``, ``start`` included."""
        out = [start]
        v = self.step(t, start)
        while v != start:
            out.append(v)
            v = self.step(t, v)
        return out


def is_connected(t: Topology) -> bool:
    return len(reachable(t, 0)) == t.node_count


def reachable(t: Topology, source: int, allowed: set[int] | frozenset[int] | None = None) -> set[int]:
    """Nodes reachable from ``source`` using only ``allowed`` nodes (all if None)."""
    if allowed is not None and source not in allowed:
        return set()
    seen = {source}
    todo = deque([source])
    while todo:
        v = todo.popleft()
        for _, u in t.adjacency[v]:
            if u not in seen and (allowed is None or u in allowed):
                seen.add(u)
                todo.append(u)
    return seen
