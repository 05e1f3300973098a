"""Canned impossibility scenarios for ``rva demo``.

The mesh demos script one or two moves from a static configuration and ask
the analysis whether the resulting history is separating; the ring demo
runs the mirror-image scheduler until the execution repeats.
"""

from __future__ import annotations

from dataclasses import dataclass

from rva import analysis
from rva.adversary import SymmetricRing, replay, run
from rva.engine import World, make_state
from rva.errors import UnsupportedOperation
from rva.topology import Topology, build_oriented_mesh, build_unoriented_ring
from rva.verdicts import verdict_to_json


@dataclass(frozen=True)
class MeshDemo:
    name: str
    dims: tuple[int, int]
    occupied: tuple[tuple[int, int], ...]
    malicious: tuple[int, int]
    # scripted moves: (from cell, to cell)
    moves: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    caption: str

    def topology(self) -> Topology:
        return build_oriented_mesh(*self.dims)

    def history(self) -> list[analysis.StaticConfig]:
        t = self.topology()
        occ = {t.node_at(*c) for c in self.occupied}
        out = [analysis.StaticConfig(t, frozenset(occ))]
        for src, dst in self.moves:
            occ = (occ - {t.node_at(*src)}) | {t.node_at(*dst)}
            out.append(analysis.StaticConfig(t, frozenset(occ)))
        return out


MESH_DEMOS = {
    "gamma": MeshDemo(
        "gamma", (5, 5), ((2, 2), (2, 3), (3, 2)), (0, 0), (((2, 2), (2, 3)),),
        "three agents in an L; with one-hop sight the corner agent must move, "
        "and moving leaves the other two diagonal to each other",
    ),
    "hole": MeshDemo(
        "hole", (5, 5),
        ((1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)), (0, 0),
        (((1, 2), (1, 1)), ((3, 2), (3, 3))),
        "eight agents around a hole; the two symmetric middle agents of the top "
        "and bottom rows see the same view and both step aside",
    ),
    "disconnected": MeshDemo(
        "disconnected", (3, 3), ((0, 0), (0, 2), (1, 1), (2, 0), (2, 2)), (0, 1),
        (((1, 1), (1, 0)),),
        "five isolated agents on a checkerboard; no connected free set separates "
        "them until the centre agent moves",
    ),
}


def mesh_demo(name: str) -> dict:
    demo = MESH_DEMOS[name]
    hist = demo.history()
    cert = analysis.is_separating(hist)
    report = {
        "demo": name,
        "caption": demo.caption,
        "dims": list(demo.dims),
        "malicious": list(demo.malicious),
        "history": [sorted(demo.topology().coords(v) for v in c.occupied) for c in hist],
        "initially_separable": analysis.is_separable(hist[0]) is not None,
        "separating": cert is not None,
    }
    if cert is not None:
        report["certificate"] = cert.to_json()
        report["certificate_valid"] = analysis.check_certificate(hist[-1], cert)
    return report


def even_ring_demo(n: int = 8, k: int = 2) -> dict:
    w = World(build_unoriented_ring(n, 0), "rv-ur")
    first = n // 2 - k // 2
    placements = [first + j for j in range(k)]
    chirality = [1] * (k // 2) + [-1] * (k // 2)
    s = make_state(w, placements, 0, chirality)
    policy = SymmetricRing()
    verdict, trace = run(s, policy)
    states = replay(w, verdict.start, verdict.events) if verdict.kind == "livelock" else []
    symmetric = all(policy.is_symmetric(states[i]) for i in policy.round_starts if i < len(states))
    return {
        "demo": "even-ring",
        "n": n,
        "placements": placements,
        "chirality": chirality,
        "malicious": 0,
        "verdict": verdict_to_json(verdict),
        "events": len(trace),
        "symmetric_at_round_starts": symmetric,
    }


DEMOS = ("gamma", "hole", "disconnected", "even-ring")


def demo(name: str) -> dict:
    if name == "even-ring":
        return even_ring_demo()
    if name in MESH_DEMOS:
        return mesh_demo(name)
    raise UnsupportedOperation(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
