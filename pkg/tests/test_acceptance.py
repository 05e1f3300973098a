"""The nine acceptance criteria, at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary by
conftest.py.  Criteria the implementation cannot meet are marked
``xfail(strict=True)``: they still run in full, and the marker turns into an
error the day they start passing.
"""

from __future__ import annotations

import json
import random
from itertools import combinations

import pytest

from conftest import ACCEPTANCE
from rva import analysis, cli, demos, engine, modelcheck as mc, sweep
from rva.adversary import FairRandom, replay, run
from rva.engine import make_state
from rva.protocols.ring import rvor_bumps_at_least_two
from rva.topology import build_general, build_oriented_mesh, build_oriented_ring
from rva.verdicts import AllSchedulesRendezvous, CounterexampleTrace, LivelockCertificate

pytestmark = pytest.mark.slow

RVOR_CELLS = [(n, k) for n in range(3, 9) for k in (2, 3, 4) if k < n]
RVUR_CELLS = [(n, k) for k in (3, 5) for n in range(4, 9) if k < n]
MESH_DIMS = [(r, c) for r in range(2, 5) for c in range(2, 5)]


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[num] = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"


# -- 1 and 2: RV-OR, one exploration per cell serves both ---------------------------


class LegFourProbe:
    """Edge check that counts leg-4 bumps made before every other agent
    bumped twice, without stopping the exploration."""

    def __init__(self):
        self.violations = 0
        self.example: str | None = None

    def __call__(self, src, ev, dst, eff):
        if not eff.get("bump"):
            return None
        a = eff["agent"]
        if src.agents[a].pstate.i != 3:
            return None
        behind = [b for b, r in enumerate(src.agents) if b != a and not rvor_bumps_at_least_two(r.pstate)]
        if behind:
            self.violations += 1
            self.example = self.example or f"agent {a} bumps in leg 4 while {behind} bumped fewer than twice"
        return None


@pytest.fixture(scope="module")
def rvor_sweep():
    out = []
    for n, k in RVOR_CELLS:
        w = sweep.cell_world("rv-or", n)
        probe = LegFourProbe()
        v = mc.model_check(sweep.cell_starts(w, k), edge_check=probe)
        out.append((n, k, v, probe))
    return out


@pytest.mark.xfail(strict=True, reason="RV-OR deadlocks: M can make an agent spend all four legs on bumps in place")
def test_1_rvor_universal_correctness(rvor_sweep):
    good = [(n, k, v) for n, k, v, _ in rvor_sweep if isinstance(v, AllSchedulesRendezvous)]
    within = all(v.max_agent_traversals <= 8 * n for n, _, v in good)
    bad = [(n, k, v) for n, k, v, _ in rvor_sweep if not isinstance(v, AllSchedulesRendezvous)]
    detail = f"{len(good)}/{len(rvor_sweep)} cells all-schedules-rendezvous"
    if bad:
        n, k, v = bad[0]
        detail += f"; first failure n={n} k={k}: {v.kind} from {v.start}"
    record(1, not bad and within, detail)
    assert not bad and within


@pytest.mark.xfail(strict=True, reason="leg-4 bumps happen while other agents have bumped fewer than twice")
def test_2_rvor_lemma3_trace_property(rvor_sweep):
    total = sum(p.violations for *_, p in rvor_sweep)
    example = next((f"n={n} k={k}: {p.example}" for n, k, _, p in rvor_sweep if p.example), "")
    record(2, total == 0, f"{total} violations over {len(rvor_sweep)} cells" + (f"; e.g. {example}" if example else ""))
    assert total == 0


# -- 3: RV-UR odd k ------------------------------------------------------------------


@pytest.mark.xfail(strict=True, reason="RV-UR has fair non-gathering cycles already on n=4, k=3")
def test_3_rvur_odd_k_correctness_and_bound():
    results = []
    for n, k in sorted(RVUR_CELLS):
        v = mc.model_check(sweep.cell_starts(sweep.cell_world("rv-ur", n), k))
        results.append((n, k, v))
        if not isinstance(v, AllSchedulesRendezvous):
            break  # the criterion is universal; later cells cannot rescue it
    bad = [(n, k, v) for n, k, v in results if not isinstance(v, AllSchedulesRendezvous)]
    fit = [v.max_total_traversals / (k * n) for n, k, v in results if n == 4 and not bad]
    c = max(fit) if fit else None
    within = c is not None and all(v.max_total_traversals <= c * k * n for n, k, v in results)
    if bad:
        n, k, v = bad[0]
        detail = f"n={n} k={k}: {v.kind} ({v.reason}) from {v.start}; c not fitted"
    else:
        detail = f"{len(results)} cells all-schedules-rendezvous, c={c:.3f}"
    ok = not bad and within and len(results) == len(RVUR_CELLS)
    record(3, ok, detail)
    assert ok


# -- 4: even k ---------------------------------------------------------------------


def test_4_even_k_impossibility():
    lines, ok = [], True
    for n in (6, 8):
        for k in (2, 4):
            rep = demos.even_ring_demo(n, k)
            v = rep["verdict"]
            cert_ok = v["kind"] == "livelock" and rep["symmetric_at_round_starts"]
            w = sweep.cell_world("rv-ur", n)
            s = make_state(w, rep["placements"], rep["malicious"], rep["chirality"])
            exhaustive = mc.model_check([s], fairness=mc.ADVERSARY)
            found = isinstance(exhaustive, (LivelockCertificate, CounterexampleTrace))
            ok &= cert_ok and found
            lines.append(f"n={n},k={k}:{'ok' if cert_ok and found else 'no'}")
    record(4, ok, "symmetric livelock and exhaustive non-gathering run: " + " ".join(lines))
    assert ok


# -- 5: mesh ------------------------------------------------------------------------


def _mesh_invariant(src, ev, dst, eff):
    c = analysis.StaticConfig(dst.world.topology, frozenset(r.node for r in dst.agents))
    if not analysis.occupied_connected(c):
        return "occupied set became disconnected"
    if analysis.has_holes(c):
        return "occupied set acquired a hole"
    return None


def test_5_mesh_correctness():
    cells, failures, worst = 0, [], 0.0
    for rows, cols in MESH_DIMS:
        w = sweep.cell_world("rv-mesh", (rows, cols))
        for k in range(2, rows * cols):
            v = mc.model_check(sweep.cell_starts(w, k), edge_check=_mesh_invariant)
            cells += 1
            if isinstance(v, AllSchedulesRendezvous):
                worst = max(worst, v.max_total_traversals / (k * k))
            else:
                failures.append(f"{rows}x{cols} k={k}: {v.kind}")
    ok = not failures
    record(5, ok, f"{cells - len(failures)}/{cells} cells all-schedules-rendezvous, c'={worst:.3f}"
           + (f"; {failures[0]}" if failures else ""))
    assert ok


# -- 6: two-node merge ----------------------------------------------------------------


def test_6_two_node_merge_bound():
    w = sweep.cell_world("rv-mesh", (3, 3))
    t = w.topology
    worst, ok = [], True
    for k in range(2, 7):
        starts = [
            make_state(w, [u] * a + [v] * (k - a), m)
            for u in t.nodes() for v in t.neighbors(u) if u < v
            for a in range(1, k)
            for m in t.nodes() if m not in (u, v)
        ]
        verdict = mc.model_check(starts)
        done = isinstance(verdict, AllSchedulesRendezvous)
        ok &= done and verdict.max_total_traversals <= k + 1
        worst.append(f"k={k}:{verdict.max_total_traversals if done else verdict.kind}")
    record(6, ok, "max total traversals (bound k+1) " + " ".join(worst))
    assert ok


# -- 7: analysis oracle ----------------------------------------------------------------


def _random_graph(rng: random.Random, n: int):
    adj = [set() for _ in range(n)]
    for v in range(1, n):
        u = rng.randrange(v)
        adj[u].add(v)
        adj[v].add(u)
    for _ in range(rng.randint(0, n)):
        u, v = rng.sample(range(n), 2)
        adj[u].add(v)
        adj[v].add(u)
    return build_general([sorted(a) for a in adj])


def _oracle_configs():
    rng = random.Random(7)
    for _ in range(500):
        t = _random_graph(rng, rng.randint(2, 8))
        occ = frozenset(v for v in t.nodes() if rng.random() < 0.5) or frozenset({0})
        yield "random", analysis.StaticConfig(t, occ)
    for n in range(3, 9):
        t = build_oriented_ring(n, 0)
        for k in range(2, n):
            for occ in combinations(range(n), k):
                yield "ring", analysis.StaticConfig(t, frozenset(occ))
    for dims in MESH_DIMS:
        t = build_oriented_mesh(*dims)
        for occ in analysis.connected_hole_free_sets(t, 2, t.node_count - 1):
            yield "mesh", analysis.StaticConfig(t, occ)
    # the 5x5 demos have too many free cells for the brute force
    for c in demos.MESH_DEMOS["disconnected"].history():
        yield "demo", c


def test_7_oracle_equivalence():
    counts: dict[str, list[int]] = {}
    for family, c in _oracle_configs():
        fast = analysis.is_separable(c)
        agree = (fast is not None) == analysis.brute_force_separable(c)
        if fast is not None:
            agree &= analysis.check_certificate(c, fast)
        tally = counts.setdefault(family, [0, 0])
        tally[0] += agree
        tally[1] += 1
    ok = all(a == b for a, b in counts.values())
    record(7, ok, "agreement " + " ".join(f"{f}={a}/{b}" for f, (a, b) in counts.items()))
    assert ok


# -- 8: demos ---------------------------------------------------------------------------


def test_8_impossibility_demos(capsys):
    lines, ok = [], True
    for name in ("gamma", "hole", "disconnected"):
        assert cli.main(["demo", name]) == 0
        rep = json.loads(capsys.readouterr().out)
        hist = demos.MESH_DEMOS[name].history()
        cert = analysis.CutCertificate(rep["certificate"]["cut_set"], rep["certificate"]["components"]) \
            if rep["separating"] else None
        good = cert is not None and rep["certificate_valid"] and analysis.check_certificate(hist[-1], cert)
        ok &= good
        lines.append(f"{name}:{'certificate ok' if good else 'no certificate'}")
    record(8, ok, " ".join(lines))
    assert ok


# -- 9: determinism ---------------------------------------------------------------------


def _sample_scenarios(rng: random.Random, count: int):
    out = []
    while len(out) < count:
        kind = rng.choice(["rv-or", "rv-ur", "rv-mesh"])
        if kind == "rv-mesh":
            w = sweep.cell_world(kind, (3, 3))
            occ = rng.choice(analysis.connected_hole_free_sets(w.topology, 2, 5))
            m = rng.choice(sorted(set(w.topology.nodes()) - occ))
            out.append(make_state(w, sorted(occ), m))
        else:
            n = rng.randint(4, 5)
            k = rng.choice([2, 3]) if kind == "rv-ur" else rng.randint(2, 3)
            w = sweep.cell_world(kind, n)
            nodes = rng.sample(range(n), k + 1)
            chir = [rng.choice((1, -1)) for _ in range(k)] if kind == "rv-ur" else None
            out.append(make_state(w, nodes[:k], nodes[k], chir))
    return out


def test_9_determinism(tmp_path):
    rng = random.Random(2024)
    scenarios = _sample_scenarios(rng, 20)
    replay_ok = order_ok = 0
    for i, s in enumerate(scenarios):
        _, trace = run(s, FairRandom(i), max_events=3000)
        lines = [json.loads(json.dumps(r.to_json())) for r in trace]
        states = replay(s.world, mc.start_of(s), lines)
        replay_ok += [engine.snapshot_hash(x) for x in states[1:]] == [d["hash"] for d in lines]
        kinds = {mc.model_check([s], order_seed=seed).kind for seed in (None, 1, 2)}
        order_ok += len(kinds) == 1
    ok = replay_ok == order_ok == len(scenarios)
    record(9, ok, f"trace replay {replay_ok}/{len(scenarios)}, verdict order-invariant {order_ok}/{len(scenarios)}")
    assert ok
