"""Scheduler policies, the run loop that drives them, and model checking of scenarios.

A policy picks the next event among the enabled ones.  Deterministic
policies also expose a checkpoint token; when the run loop sees the same
(state, token) pair twice the execution is periodic and it reports the
lasso as a livelock.
"""

from __future__ import annotations

import random
from collections import deque
from typing import Hashable, Iterable, Protocol

from rva import engine
from rva import modelcheck as mc
from rva.engine import (
    IN_TRANSIT,
    Activate,
    Deliver,
    Event,
    RelocateMalicious,
    SimState,
    TraceRecord,
    World,
    event_key,
    event_to_json,
    make_state,
)
from rva.errors import InapplicablePolicy
from rva.scenario import Scenario
from rva.topology import Kind
from rva.verdicts import BoundExhausted, CounterexampleTrace, LivelockCertificate, Rendezvous, Verdict


class SchedulerPolicy(Protocol):
    name: str

    def bind(self, s: SimState) -> None: ...

    def choose(self, s: SimState, events: list[Event]) -> Event: ...

    def checkpoint(self) -> Hashable | None: ...


def _honest(e: Event) -> bool:
    return not isinstance(e, RelocateMalicious)


# -- fair random ------------------------------------------------------------------


class FairRandom:
    """Uniform over honest events, with an occasional relocation of M.

    Every enabled event has positive probability at every step, so with
    probability one no continuously enabled event is starved.
    """

    name = "fair-random"

    def __init__(self, seed: int = 0, relocate_p: float = 0.2):
        self.seed = seed
        self.relocate_p = relocate_p
        self.rng = random.Random(seed)

    def bind(self, s: SimState) -> None:
        self.rng = random.Random(self.seed)

    def choose(self, s: SimState, events: list[Event]) -> Event:
        honest = [e for e in events if _honest(e)]
        moves = [e for e in events if not _honest(e)]
        if moves and (not honest or self.rng.random() < self.relocate_p):
            return self.rng.choice(moves)
        return self.rng.choice(honest)

    def checkpoint(self) -> None:
        return None


# -- greedy blocker ----------------------------------------------------------------


def _distances(t) -> list[list[int]]:
    n = t.node_count
    out = []
    for src in range(n):
        d = [-1] * n
        d[src] = 0
        todo = deque([src])
        while todo:
            v = todo.popleft()
            for u in t.neighbors(v):
                if d[u] < 0:
                    d[u] = d[v] + 1
                    todo.append(u)
        out.append(d)
    return out


def _intended_targets(s: SimState) -> dict[int, list[int]]:
    """Ring only: node each activatable agent would try to enter next."""
    w = s.world
    occ = s.occupants()
    out: dict[int, list[int]] = {}
    for a, rec in enumerate(s.agents):
        if not w.activatable(rec):
            continue
        _, act = w.transition(rec.pstate, engine.observe(s, a, occ))
        if act.kind == "move":
            out.setdefault(w.ring_target(rec.node, rec.chirality, act.direction), []).append(a)
    return out


def _positions(s: SimState) -> list[int]:
    heads = {j: e[1] for e, q in s.queues for j in q}
    return [heads[j] if rec.node == IN_TRANSIT else rec.node for j, rec in enumerate(s.agents)]


def _spread(s: SimState, dist) -> int:
    pos = _positions(s)
    return sum(dist[x][y] for i, x in enumerate(pos) for y in pos[i + 1:])


def _cut_pairs(s: SimState, u: int, dist) -> int:
    """Pairs of occupied nodes all of whose shortest connections run through ``u``."""
    t = s.world.topology
    occ = sorted(s.occupied())
    count = 0
    for i, x in enumerate(occ):
        for y in occ[i + 1:]:
            if dist[x][u] + dist[u][y] != dist[x][y]:
                continue
            # is there an equally short route avoiding u?
            frontier, seen, d = {x}, {x, u}, 0
            while frontier and y not in frontier and d < dist[x][y]:
                nxt = set()
                for v in frontier:
                    nxt.update(w for w in t.neighbors(v) if w not in seen)
                seen |= nxt
                frontier, d = nxt, d + 1
            count += y not in frontier
    return count


def greedy_blocker_choose(s: SimState, candidates: Iterable[Event]) -> Event:
    """One greedy step of a malicious agent that knows every honest transition.

    M goes where it blocks the most imminent moves (then where it cuts the
    most shortest connections between occupied nodes).  Otherwise the honest
    event that keeps the agents furthest apart is scheduled.  Ties go to the
    smallest event encoding.
    """
    cands = sorted(candidates, key=event_key)
    if not cands:
        raise ValueError("no candidate events")
    dist = _distances(s.world.topology)
    relocs = [e for e in cands if isinstance(e, RelocateMalicious)]
    if relocs and s.world.mode == engine.ASYNC_LINKS:
        wanted = _intended_targets(s)

        def score(u):
            return (len(wanted.get(u, ())), _cut_pairs(s, u, dist))

        best = max(relocs, key=lambda e: score(e.path[-1]))
        if score(best.path[-1]) > score(s.malicious):
            return best
    honest = [e for e in cands if _honest(e)]
    if not honest:
        return cands[0]
    return max(honest, key=lambda e: (_spread(engine.apply(s, e)[0], dist), [-x for x in _flat(event_key(e))]))


def _flat(key) -> list:
    out = []
    for x in key:
        out.extend(_flat(x) if isinstance(x, tuple) else [x])
    return out


class GreedyBlocker:
    """Greedy adversary with an ageing rule that keeps it fair.

    An honest event left enabled for ``patience`` consecutive honest steps is
    scheduled next (M may still reposition first to block it).
    """

    name = "greedy-blocker"

    def __init__(self, patience: int | None = None):
        self.patience = patience
        self.ages: dict[Event, int] = {}

    def bind(self, s: SimState) -> None:
        self.ages = {}
        if self.patience is None:
            self.patience = 2 * len(s.agents) + 2

    def choose(self, s: SimState, events: list[Event]) -> Event:
        honest = [e for e in events if _honest(e)]
        overdue = [e for e in honest if self.ages.get(e, 0) >= self.patience]
        if overdue:
            forced = min(overdue, key=lambda e: (-self.ages[e], event_key(e)))
            ev = greedy_blocker_choose(s, [forced] + [e for e in events if not _honest(e)])
        else:
            ev = greedy_blocker_choose(s, events)
        if _honest(ev):
            self.ages = {e: self.ages.get(e, 0) + 1 for e in honest if e != ev}
        return ev

    def checkpoint(self) -> Hashable:
        return tuple(sorted((event_key(e), a) for e, a in self.ages.items()))


# -- symmetric ring ----------------------------------------------------------------


class SymmetricRing:
    """Mirror-image scheduling on an unoriented ring.

    The agents start on a chain of consecutive nodes; the two halves of the
    chain have opposite chirality.  The mirror map fixes the chain and swaps
    its ends, so it sends every agent to its counterpart.  Each round
    activates every agent together with its counterpart, moving M between
    the two free nodes flanking the chain so that both bump or neither does,
    then drains the links in mirrored pairs.  Counterparts see identical
    inputs, so the configuration is symmetric at every round boundary and no
    two counterparts ever share a node.
    """

    name = "symmetric-ring"

    def __init__(self):
        self.plan: deque[Event] = deque()
        self.round_starts: list[int] = []
        self._steps = 0

    def bind(self, s: SimState) -> None:
        t = s.world.topology
        if t.kind is not Kind.UNORIENTED_RING:
            raise InapplicablePolicy("the symmetric schedule needs an unoriented ring")
        k, n = len(s.agents), t.node_count
        if k % 2:
            raise InapplicablePolicy(f"the symmetric schedule needs an even number of agents, got {k}")
        if s.queues or any(r.pstate != s.world.initial_pstate for r in s.agents):
            raise InapplicablePolicy("the symmetric schedule starts from an initial configuration")
        nodes = {r.node: a for a, r in enumerate(s.agents)}
        start = next((v for v in nodes if all((v + j) % n in nodes for j in range(k))), None)
        if start is None:
            raise InapplicablePolicy("the agents do not occupy consecutive nodes")
        chain = [(start + j) % n for j in range(k)]
        if t.special_node in chain:
            raise InapplicablePolicy("the special node must lie outside the chain")
        left = [nodes[v] for v in chain[: k // 2]]
        right = [nodes[v] for v in reversed(chain[k // 2:])]
        c = s.agents[left[0]].chirality
        if any(s.agents[a].chirality != c for a in left) or any(s.agents[b].chirality != -c for b in right):
            raise InapplicablePolicy("the two halves of the chain need opposite chirality")
        self.n = n
        self.axis = 2 * start + k - 1
        self.chain = frozenset(chain)
        self.pairs = list(zip(left, right))
        self.mirror = {a: b for a, b in self.pairs} | {b: a for a, b in self.pairs}
        self.plan.clear()
        self.round_starts = []
        self._steps = 0

    def rho(self, v: int) -> int:
        return (self.axis - v) % self.n

    def checkpoint(self) -> Hashable | None:
        return "round" if not self.plan else None

    def choose(self, s: SimState, events: list[Event]) -> Event:
        if not self.plan:
            self.round_starts.append(self._steps)
            self.plan.extend(self._round(s))
        self._steps += 1
        return self.plan.popleft()

    def is_symmetric(self, s: SimState) -> bool:
        for a, rec in enumerate(s.agents):
            other = s.agents[self.mirror[a]]
            if rec.pstate != other.pstate or rec.chirality != -other.chirality:
                return False
            if rec.node != IN_TRANSIT and other.node != self.rho(rec.node):
                return False
        for (u, v), q in s.queues:
            if s.queue((self.rho(u), self.rho(v))) != tuple(self.mirror[a] for a in q):
                return False
        return True

    def _relocate(self, x: SimState, target: int) -> RelocateMalicious:
        # M stays in the free arc, where no agent ever goes
        t = x.world.topology
        arc = set(t.nodes()) - self.chain
        paths = {x.malicious: (x.malicious,)}
        todo = deque([x.malicious])
        while todo:
            v = todo.popleft()
            for u in t.neighbors(v):
                if u in arc and u not in paths:
                    paths[u] = paths[v] + (u,)
                    todo.append(u)
        ev = RelocateMalicious(paths[target])
        if not engine.is_enabled(x, ev):
            raise InapplicablePolicy(f"M cannot reach node {target} to keep the blockade symmetric")
        return ev

    def _round(self, s: SimState) -> list[Event]:
        x = s
        plan: list[Event] = []

        def do(ev):
            nonlocal x
            plan.append(ev)
            x, _ = engine.apply(x, ev)

        for a, b in self.pairs:
            if not x.world.activatable(x.agents[a]):
                continue
            for agent in (a, b):
                target = _intended_targets(x)
                hit = next((v for v, who in target.items() if agent in who), None)
                if hit is not None and hit not in self.chain and x.malicious != hit:
                    do(self._relocate(x, hit))
                do(Activate(agent))
        while x.queues:
            done = set()
            for (u, v), _ in x.queues:
                if (u, v) in done:
                    continue
                mirrored = (self.rho(u), self.rho(v))
                done |= {(u, v), mirrored}
                do(Deliver((u, v)))
                do(Deliver(mirrored))
        if not self.is_symmetric(x):
            raise InapplicablePolicy("the protocol broke the mirror symmetry")
        if not plan:
            # nothing honest left to schedule; M just waits at its node
            plan.append(_idle(x))
        return plan


def _idle(s: SimState) -> Event:
    hops = engine.malicious_hops(s)
    if not hops:
        raise InapplicablePolicy("no event is enabled")
    return RelocateMalicious((s.malicious, hops[0]))


POLICIES = {"fair-random": FairRandom, "greedy-blocker": GreedyBlocker, "symmetric-ring": SymmetricRing}


def policy_for(name: str, seed: int = 0) -> SchedulerPolicy:
    if name == "fair-random":
        return FairRandom(seed)
    try:
        return POLICIES[name]()
    except KeyError:
        raise InapplicablePolicy(f"unknown policy {name!r}") from None


# -- run loop ---------------------------------------------------------------------


def run(
    s: SimState,
    policy: SchedulerPolicy,
    max_events: int = 100_000,
    max_traversals: int | None = None,
) -> tuple[Verdict, list[TraceRecord]]:
    if max_events < 1 or (max_traversals is not None and max_traversals < 1):
        raise ValueError("limits must be positive")
    policy.bind(s)
    start = mc.start_of(s)
    trace: list[TraceRecord] = []
    states = [s]
    seen: dict[tuple, int] = {}
    while True:
        if s.gathered():
            node = s.agents[0].node
            return Rendezvous(node, list(s.traversals), s.total_traversals()), trace
        events = engine.enabled_events(s)
        if not any(_honest(e) for e in events):
            hashes = [mc.config_hash(x.key()) for x in states]
            return CounterexampleTrace([event_to_json(r.event) for r in trace], hashes,
                                       "no honest agent can act and the agents are not gathered", start), trace
        token = policy.checkpoint()
        if token is not None:
            key = (s.key(), token)
            if key in seen:
                return _lasso(states, trace, seen[key], start), trace
            seen[key] = len(trace)
        if len(trace) >= max_events:
            return BoundExhausted(len(trace), f"stopped after {max_events} events"), trace
        if max_traversals is not None and s.total_traversals() >= max_traversals:
            return BoundExhausted(len(trace), f"stopped after {max_traversals} traversals"), trace
        ev = policy.choose(s, events)
        s, rec = engine.step(s, ev, len(trace))
        trace.append(rec)
        states.append(s)


def _lasso(states: list[SimState], trace: list[TraceRecord], at: int, start: dict) -> LivelockCertificate:
    hashes = [mc.config_hash(x.key()) for x in states]
    cycle_events = [r.event for r in trace[at:]]
    enabled = [
        {e for e in engine.enabled_events(x) if _honest(e)}
        for x in states[at:-1]
    ]
    along = set.intersection(*enabled) if enabled else set()
    fair = along <= set(cycle_events)
    return LivelockCertificate(
        prefix=hashes[:at],
        cycle=hashes[at:-1],
        events=[event_to_json(r.event) for r in trace],
        fair=fair,
        reason="periodic schedule without rendezvous" + (" (fair)" if fair else " (adversary-scheduled)"),
        start=start,
    )


def replay(world: World, start: dict, events: Iterable[dict]) -> list[SimState]:
    """States visited by replaying JSON events from a ``start`` summary."""
    s = make_state(world, start["placements"], start["malicious"], start.get("chirality"))
    out = [s]
    for d in events:
        s, _ = engine.step(s, engine.event_from_json(d))
        out.append(s)
    return out


def model_check(
    scenario: Scenario,
    max_states: int = 2_000_000,
    max_depth: int | None = None,
    order_seed: int | None = None,
) -> Verdict:
    """Every adversary behaviour from the scenario's initial state."""
    return mc.model_check([scenario.initial_state()], max_states, max_depth,
                          fairness=scenario.fairness, order_seed=order_seed)


def run_scenario(scenario: Scenario, seed: int | None = None, max_events: int | None = None):
    policy = policy_for(scenario.policy, scenario.seed if seed is None else seed)
    return run(scenario.initial_state(), policy,
               max_events or scenario.max_events, scenario.max_traversals)
