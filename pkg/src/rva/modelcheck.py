"""Exhaustive exploration of every adversary choice from a set of start states.

States are stored up to a renaming of identical agents (same node, protocol
state and chirality).  Fairness is weak fairness over *event classes*:
"activate an agent with this profile" and "deliver on this link".  A
strongly connected set of non-gathered states is a livelock when every
class enabled in all of its states is also taken inside it; such a set
contains a fair cycle, and a set failing the test contains none.

Coarser classes than individual agents make the fairness assumption weaker,
so a positive verdict here also holds for agent-level fairness.
"""

from __future__ import annotations

import hashlib
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from rva import engine
from rva.engine import (
    IN_TRANSIT,
    Activate,
    Deliver,
    RelocateMalicious,
    SimState,
    SwapPair,
)
from rva.errors import ProtocolFault, UndefinedProtocolInput
from rva.verdicts import (
    AllSchedulesRendezvous,
    BoundExhausted,
    CounterexampleTrace,
    LivelockCertificate,
    Verdict,
)

log = logging.getLogger(__name__)

FAIR = "fair"
ADVERSARY = "adversary"

# (source state, event, successor state, effects) -> violation message or None
EdgeCheck = Callable[[SimState, object, SimState, dict], "str | None"]


def canonical(s: SimState) -> tuple[SimState, tuple[int, ...]]:
    """Rename agents into a canonical order; returns the state and old->new map."""
    agents = s.agents
    pos = {}
    for edge, q in s.queues:
        for i, j in enumerate(q):
            pos[j] = (edge, i)

    def sort_key(j):
        r = agents[j]
        if r.node != IN_TRANSIT:
            return (0, r.node, r.pstate, r.chirality)
        return (1, pos[j])

    order = sorted(range(len(agents)), key=sort_key)
    perm = [0] * len(agents)
    for new, old in enumerate(order):
        perm[old] = new
    new_agents = tuple(agents[j] for j in order)
    new_queues = tuple((e, tuple(perm[j] for j in q)) for e, q in s.queues)
    zeros = (0,) * len(agents)
    # M's position is irrelevant on meshes (see _successors), so it is dropped
    m = -1 if s.world.mode == engine.INSTANTANEOUS else s.malicious
    return SimState(s.world, new_agents, m, new_queues, zeros), tuple(perm)


def config_hash(key: tuple) -> str:
    return hashlib.blake2b(repr(key).encode(), digest_size=8).hexdigest()


def canonical_hash(s: SimState) -> str:
    return config_hash(canonical(s)[0].key())


@dataclass
class _Edge:
    dst: int
    classes: tuple
    perm: tuple[int, ...]
    moved: tuple[int, ...]
    event: object


@dataclass
class Exploration:
    """The explored transition system, kept for post-analysis and tests."""

    states: list[SimState] = field(default_factory=list)
    index: dict = field(default_factory=dict)
    edges: list[list[_Edge]] = field(default_factory=list)
    enabled: list[frozenset] = field(default_factory=list)
    gathered: list[bool] = field(default_factory=list)
    parent: list = field(default_factory=list)
    depth: list[int] = field(default_factory=list)
    roots: list[tuple[SimState, int]] = field(default_factory=list)
    # states [0, expanded) have all their successors recorded
    expanded: int = 0


def _profile(rec) -> tuple:
    return ("A", rec.node, rec.pstate, rec.chirality)


def _successors(s: SimState):
    """(event, successor or None, effects, event classes taken) for every choice at ``s``.

    A protocol that has no answer for what it observes yields ``None`` and
    the error text in the effects.
    """
    w = s.world
    out = []

    def attempt(ev, fn, classes):
        try:
            ns, eff = fn()
        except (ProtocolFault, UndefinedProtocolInput) as err:
            ns, eff = None, {"error": f"{type(err).__name__}: {err}"}
        out.append((ev, ns, eff, classes))

    prev = None
    for a, rec in enumerate(s.agents):
        # identical agents sort next to each other and give the same successor
        if rec != prev and w.activatable(rec):
            attempt(Activate(a), lambda a=a: engine._activate(s, a), (_profile(rec),))
        prev = rec
    for e, _ in s.queues:
        attempt(Deliver(e), lambda e=e: engine._deliver(s, e), (("D", e),))
    if w.mode == engine.INSTANTANEOUS:
        for sp in engine.swap_pairs(s):
            classes = tuple(_profile(s.agents[a]) for a in sp.left + sp.right)
            attempt(sp, lambda sp=sp: engine._swap(s, sp), classes)
        # on a mesh agents only step onto occupied nodes: M never bumps anyone,
        # so where it stands cannot change what the honest agents do
        return out
    for u in engine.malicious_hops(s):
        ev = RelocateMalicious((s.malicious, u))
        out.append((ev, *engine.apply(s, ev), ()))
    return out


def _enabled_classes(s: SimState) -> frozenset:
    w = s.world
    cls = {("A", r.node, r.pstate, r.chirality) for r in s.agents if w.activatable(r)}
    cls.update(("D", e) for e, _ in s.queues)
    return frozenset(cls)


def explore(
    initials: Iterable[SimState],
    max_states: int = 2_000_000,
    max_depth: int | None = None,
    edge_check: EdgeCheck | None = None,
    order_seed: int | None = None,
):
    """Breadth-first exploration.  Returns (Exploration, problem) where problem
    is None, ("bound", msg) or ("violation", state index, event, msg)."""
    ex = Exploration()
    rng = random.Random(order_seed) if order_seed is not None else None
    todo = deque()

    def add(cs: SimState, parent, depth) -> int:
        idx = len(ex.states)
        ex.index[cs.key()] = idx
        ex.states.append(cs)
        ex.edges.append([])
        ex.enabled.append(_enabled_classes(cs))
        ex.gathered.append(cs.gathered())
        ex.parent.append(parent)
        ex.depth.append(depth)
        todo.append(idx)
        return idx

    initials = list(initials)
    if rng:
        rng.shuffle(initials)
    for raw in initials:
        cs, _ = canonical(raw)
        idx = ex.index.get(cs.key())
        if idx is None:
            idx = add(cs, None, 0)
        ex.roots.append((raw, idx))

    while todo:
        i = todo.popleft()
        s = ex.states[i]
        if ex.gathered[i]:
            continue
        if not ex.enabled[i]:
            return ex, ("deadlock", i)
        if max_depth is not None and ex.depth[i] >= max_depth:
            ex.expanded = i
            return ex, ("bound", f"depth bound {max_depth} reached")
        succ = _successors(s)
        if rng:
            rng.shuffle(succ)
        for ev, ns, eff, classes in succ:
            if ns is None:
                return ex, ("violation", i, ev, eff["error"])
            if edge_check is not None:
                msg = edge_check(s, ev, ns, eff)
                if msg:
                    return ex, ("violation", i, ev, msg)
            moved = tuple(j for j, c in enumerate(ns.traversals) if c)
            cs, perm = canonical(ns)
            key = cs.key()
            j = ex.index.get(key)
            if j is None:
                if len(ex.states) >= max_states:
                    ex.expanded = i
                    return ex, ("bound", f"state bound {max_states} reached")
                j = add(cs, (i, ev), ex.depth[i] + 1)
            ex.edges[i].append(_Edge(j, classes, perm, moved, ev))
    ex.expanded = len(ex.states)
    return ex, None


def _tarjan(ex: Exploration, n: int | None = None) -> list[list[int]]:
    """Strongly connected components of states [0, n), sinks first."""
    n = len(ex.states) if n is None else n
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            edges = ex.edges[v]
            if pos < len(edges):
                work[-1] = (v, pos + 1)
                w = edges[pos].dst
                if w >= n:
                    continue
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    out.append(comp)
    return out


def _bad_component(ex: Exploration, comps, fairness: str):
    for comp in comps:
        members = set(comp)
        if any(ex.gathered[v] for v in comp):
            continue
        internal = [(v, e) for v in comp for e in ex.edges[v] if e.dst in members]
        if not internal:
            continue
        if fairness == ADVERSARY:
            return comp, internal
        taken = set()
        for _, e in internal:
            taken.update(e.classes)
        always = frozenset.intersection(*(ex.enabled[v] for v in comp))
        if always <= taken:
            return comp, internal
    return None


def _path_to(ex: Exploration, idx: int) -> list[tuple[int, object]]:
    """(state, event leading out of it) pairs from a root to ``idx``."""
    out = []
    while ex.parent[idx] is not None:
        p, ev = ex.parent[idx]
        out.append((p, ev))
        idx = p
    return out[::-1], idx


def _bfs_within(ex: Exploration, members: set[int], src: int, goal: Callable[[int, _Edge | None], bool]):
    """Shortest edge list inside ``members`` from src to a state/edge satisfying goal."""
    prev = {src: None}
    todo = deque([src])
    while todo:
        v = todo.popleft()
        for e in ex.edges[v]:
            if e.dst not in members:
                continue
            if goal(v, e):
                path = [(v, e)]
                while prev[v] is not None:
                    pv, pe = prev[v]
                    path.append((pv, pe))
                    v = pv
                return path[::-1]
            if e.dst not in prev:
                prev[e.dst] = (v, e)
                todo.append(e.dst)
    return None


def _fair_cycle(ex: Exploration, comp: list[int], internal) -> list[tuple[int, _Edge]]:
    """A closed walk in ``comp`` taking every class taken in it and passing a
    state that disables each class that is never taken."""
    members = set(comp)
    start = min(comp, key=lambda v: (ex.depth[v], v))
    taken = {}
    for v, e in internal:
        for c in e.classes:
            taken.setdefault(c, (v, e))
    anywhere = frozenset().union(*(ex.enabled[v] for v in comp))
    goals: list[Callable] = []
    for c in taken:
        goals.append(lambda v, e, c=c: c in e.classes)
    for c in anywhere - set(taken):
        goals.append(lambda v, e, c=c: c not in ex.enabled[e.dst])
    # a goal can be unreachable only in components kept under adversary
    # fairness; the walk then stays unfair and the certificate says so
    goals.append(lambda v, e: True)
    walk: list[tuple[int, _Edge]] = []
    cur = start
    for g in goals:
        if walk and any(g(v, e) for v, e in walk):
            continue
        seg = _bfs_within(ex, members, cur, g)
        if seg is None:
            continue
        walk += seg
        cur = seg[-1][1].dst
    back = _bfs_within(ex, members, cur, lambda v, e: e.dst == start)
    if cur != start or not walk:
        walk += back
    return walk


def _translate(ev, inv: list[int]):
    if isinstance(ev, Activate):
        return Activate(inv[ev.agent])
    if isinstance(ev, SwapPair):
        return SwapPair(tuple(inv[a] for a in ev.left), tuple(inv[a] for a in ev.right), ev.edge)
    return ev


def start_of(s: SimState) -> dict:
    """Placement summary of an initial state, enough to rebuild it."""
    out = {"placements": [r.node for r in s.agents], "malicious": s.malicious}
    if s.world.topology.kind.value == "unoriented-ring":
        out["chirality"] = [r.chirality for r in s.agents]
    return out


def _root_state(ex: Exploration, root: int) -> SimState:
    return next(r for r, i in ex.roots if i == root)


def _raw_events(ex: Exploration, root: int, steps: list[tuple[int, object]]) -> list[dict]:
    """Re-express canonical events as events on the uncanonicalized root state."""
    raw = _root_state(ex, root)
    perm = canonical(raw)[1]
    out = []
    for _, ev in steps:
        inv = [0] * len(perm)
        for old, new in enumerate(perm):
            inv[new] = old
        rev = _translate(ev, inv)
        out.append(engine.event_to_json(rev))
        try:
            raw, _ = engine.apply(raw, rev)
        except (ProtocolFault, UndefinedProtocolInput):
            break  # the failing event of a counterexample ends the trace
        perm = canonical(raw)[1]
    return out


def model_check(
    initials: Iterable[SimState],
    max_states: int = 2_000_000,
    max_depth: int | None = None,
    fairness: str = FAIR,
    edge_check: EdgeCheck | None = None,
    order_seed: int | None = None,
) -> Verdict:
    initials = list(initials)
    ex, problem = explore(initials, max_states, max_depth, edge_check, order_seed)
    return analyse(ex, problem, fairness)


def analyse(ex: Exploration, problem, fairness: str = FAIR) -> Verdict:
    n = len(ex.states)
    if problem and problem[0] == "violation":
        _, i, ev, msg = problem
        steps, root = _path_to(ex, i)
        steps.append((i, ev))
        events = _raw_events(ex, root, steps)
        hashes = [config_hash(ex.states[s].key()) for s, _ in steps]
        return CounterexampleTrace(events, hashes, f"invariant violated: {msg}",
                                   start_of(_root_state(ex, root)))
    if problem and problem[0] == "deadlock":
        i = problem[1]
        steps, root = _path_to(ex, i)
        hashes = [config_hash(ex.states[s].key()) for s, _ in steps] + [config_hash(ex.states[i].key())]
        return CounterexampleTrace(_raw_events(ex, root, steps), hashes,
                                   "no honest agent can act and the agents are not gathered",
                                   start_of(_root_state(ex, root)))

    # On a bound, cycles among fully expanded states are still genuine.
    comps = _tarjan(ex, ex.expanded)
    bad = _bad_component(ex, comps, fairness)
    if bad is None and problem:
        return BoundExhausted(n, problem[1])
    if bad is not None:
        comp, internal = bad
        walk = _fair_cycle(ex, comp, internal)
        entry = walk[0][0]
        steps, root = _path_to(ex, entry)
        events = _raw_events(ex, root, steps + [(v, e.event) for v, e in walk])
        prefix = [config_hash(ex.states[s].key()) for s, _ in steps]
        cycle = [config_hash(ex.states[v].key()) for v, _ in walk]
        taken = set()
        for _, e in walk:
            taken.update(e.classes)
        along = frozenset.intersection(*(ex.enabled[v] for v, _ in walk))
        return LivelockCertificate(prefix, cycle, events, fair=along <= taken,
                                   reason="non-gathering cycle" + (" (fair)" if along <= taken else " (adversary-scheduled)"),
                                   start=start_of(_root_state(ex, root)))

    total, agent = _longest(ex, comps)
    return AllSchedulesRendezvous(total, agent, n, len(ex.roots))


def _longest(ex: Exploration, comps: list[list[int]]) -> tuple[float, float]:
    """Max total and max single-agent traversals over all explored paths."""
    n = len(ex.states)
    tot: list[float | None] = [None] * n
    vec: list[list[float] | None] = [None] * n
    for _, r in ex.roots:
        k = len(ex.states[r].agents)
        tot[r] = 0
        vec[r] = [0] * k
    unbounded = False
    for comp in reversed(comps):  # topological order
        members = set(comp)
        changed = True
        while changed:
            changed = False
            for v in comp:
                if vec[v] is None:
                    continue
                for e in ex.edges[v]:
                    if e.dst not in members:
                        continue
                    if e.moved:
                        unbounded = True
                    changed |= _push(tot, vec, v, e, 0)
        for v in comp:
            if vec[v] is None:
                continue
            for e in ex.edges[v]:
                if e.dst not in members:
                    _push(tot, vec, v, e, len(e.moved))
    if unbounded:
        return float("inf"), float("inf")
    best_tot = max((t for t in tot if t is not None), default=0)
    best_agent = max((max(x) for x in vec if x), default=0)
    return best_tot, best_agent


def _push(tot, vec, v, e: _Edge, weight: int) -> bool:
    src = vec[v]
    cand = [0] * len(src)
    for j, val in enumerate(src):
        cand[e.perm[j]] = val + (1 if weight and j in e.moved else 0)
    d = e.dst
    changed = False
    if vec[d] is None:
        vec[d] = cand
        tot[d] = tot[v] + weight
        return True
    cur = vec[d]
    for j, val in enumerate(cand):
        if val > cur[j]:
            cur[j] = val
            changed = True
    if tot[v] + weight > tot[d]:
        tot[d] = tot[v] + weight
        changed = True
    return changed
