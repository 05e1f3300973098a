"""Parameter sweeps for ``rva check``: every start of a family of scenarios.

A sweep document names a protocol, the ring sizes ``n`` or mesh ``dims``,
the agent counts ``k`` and what is expected (``solvable`` or
``unsolvable``).  Each (size, k) pair is one cell, model-checked as a single
exploration from all of its initial states.
"""

from __future__ import annotations

import itertools
import time
from typing import Iterator

from rva import analysis
from rva import modelcheck as mc
from rva.engine import SimState, World, make_state
from rva.errors import InvalidScenario
from rva.topology import build_oriented_mesh, build_oriented_ring, build_unoriented_ring
from rva.verdicts import AllSchedulesRendezvous, CounterexampleTrace, LivelockCertificate, verdict_to_json

EXPECTATIONS = ("solvable", "unsolvable")


def ring_starts(world: World, k: int) -> Iterator[SimState]:
    """All distinct placements x all M starts (x all chirality vectors if unoriented)."""
    n = world.topology.node_count
    unoriented = world.protocol == "rv-ur"
    for placements in itertools.combinations(range(n), k):
        chiralities = itertools.product((1, -1), repeat=k) if unoriented else [None]
        for chir in chiralities:
            for m in range(n):
                if m not in placements:
                    yield make_state(world, placements, m, chir)


def mesh_starts(world: World, k: int) -> Iterator[SimState]:
    """One agent on each node of every connected hole-free set of size k, all M starts."""
    t = world.topology
    for occ in analysis.connected_hole_free_sets(t, k, k):
        for m in sorted(set(t.nodes()) - occ):
            yield make_state(world, sorted(occ), m)


def cell_world(protocol: str, size, special_index: int = 0, mesh_rules: str = "exclusive") -> World:
    if protocol == "rv-or":
        return World(build_oriented_ring(size, special_index), protocol)
    if protocol == "rv-ur":
        return World(build_unoriented_ring(size, special_index), protocol)
    if protocol == "rv-mesh":
        rows, cols = size
        return World(build_oriented_mesh(rows, cols), protocol, mesh_rules)
    raise InvalidScenario(f"unknown protocol {protocol!r}")


def cell_starts(world: World, k: int) -> list[SimState]:
    return list(mesh_starts(world, k) if world.topology.is_mesh else ring_starts(world, k))


def parse(doc: dict) -> list[dict]:
    """Validate a sweep document and expand it into cell parameter dicts."""
    protocol = doc.get("protocol")
    if protocol not in ("rv-or", "rv-ur", "rv-mesh"):
        raise InvalidScenario(f"sweep needs a protocol among rv-or, rv-ur, rv-mesh, got {protocol!r}")
    expect = doc.get("expect", "solvable")
    if expect not in EXPECTATIONS:
        raise InvalidScenario(f"expect must be one of {EXPECTATIONS}")
    fairness = doc.get("fairness", mc.FAIR)
    if fairness not in (mc.FAIR, mc.ADVERSARY):
        raise InvalidScenario(f"unknown fairness {fairness!r}")
    base = {"protocol": protocol, "expect": expect, "fairness": fairness,
            "special_index": doc.get("special_index", 0), "mesh_rules": doc.get("mesh_rules", "exclusive")}
    cells = []
    if protocol == "rv-mesh":
        dims = doc.get("dims")
        if not dims or not all(isinstance(d, list) and len(d) == 2 for d in dims):
            raise InvalidScenario("a mesh sweep needs dims: [[rows, cols], ...]")
        for rows, cols in dims:
            ks = doc.get("k") or range(2, rows * cols)
            cells += [{**base, "dims": [rows, cols], "k": k} for k in ks]
    else:
        ns, ks = doc.get("n"), doc.get("k")
        if not ns or not ks:
            raise InvalidScenario("a ring sweep needs non-empty n and k lists")
        cells += [{**base, "n": n, "k": k} for n in ns for k in ks if k < n]
    return cells


def check_cell(cell: dict, max_states: int, order_seed: int | None = None) -> dict:
    size = tuple(cell["dims"]) if "dims" in cell else cell["n"]
    world = cell_world(cell["protocol"], size, cell["special_index"], cell["mesh_rules"])
    starts = cell_starts(world, cell["k"])
    began = time.perf_counter()
    verdict = mc.model_check(starts, max_states, fairness=cell["fairness"], order_seed=order_seed)
    if cell["expect"] == "solvable":
        ok = isinstance(verdict, AllSchedulesRendezvous)
    else:
        ok = isinstance(verdict, (LivelockCertificate, CounterexampleTrace))
    out = {"params": cell, "initial_states": len(starts), "verdict": verdict_to_json(verdict),
           "ok": ok, "seconds": round(time.perf_counter() - began, 3)}
    if isinstance(verdict, AllSchedulesRendezvous):
        k = cell["k"]
        nodes = world.topology.node_count
        out["per_agent_over_n"] = verdict.max_agent_traversals / nodes
        out["total_over_kn"] = verdict.max_total_traversals / (k * nodes)
        out["total_over_k2"] = verdict.max_total_traversals / (k * k)
    return out


def run_sweep(doc: dict, max_states: int) -> dict:
    cells = [check_cell(c, max_states) for c in parse(doc)]
    return {"sweep": doc, "cells": cells, "ok": all(c["ok"] for c in cells)}
