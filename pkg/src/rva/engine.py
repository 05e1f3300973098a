"""Event-step execution of the asynchronous model.

The adversary's choices are explicit events; :func:`step` applies one of
them to an immutable :class:`SimState`.  Rings run with FIFO links
(an agent that leaves a node sits in the link queue until a ``Deliver``);
meshes run with instantaneous moves.
"""

from __future__ import annotations

import functools
import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from rva.errors import IllegalEvent, InvalidScenario, ProtocolFault
from rva.protocols import MeshObs, RingObs
from rva.protocols import mesh as mesh_proto
from rva.protocols import ring as ring_proto
from rva.topology import OFFSETS, Kind, Topology, two_hop_cells

ASYNC_LINKS = "async-links"
INSTANTANEOUS = "instantaneous"

PROTOCOL_KINDS = {"rv-or": Kind.ORIENTED_RING, "rv-ur": Kind.UNORIENTED_RING, "rv-mesh": Kind.ORIENTED_MESH}

IN_TRANSIT = -1


class AgentRec(NamedTuple):
    node: int  # IN_TRANSIT while in a link queue
    pstate: tuple
    chirality: int  # +1/-1 on rings, 0 on meshes


# -- events -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Activate:
    agent: int


@dataclass(frozen=True, slots=True)
class Deliver:
    edge: tuple[int, int]


@dataclass(frozen=True, slots=True)
class RelocateMalicious:
    path: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class SwapPair:
    left: tuple[int, ...]
    right: tuple[int, ...]
    edge: tuple[int, int]


Event = Activate | Deliver | RelocateMalicious | SwapPair

_EVENT_ORDER = {Activate: 0, Deliver: 1, SwapPair: 2, RelocateMalicious: 3}


def event_key(e: Event) -> tuple:
    """Total order on events, used for deterministic tie-breaks."""
    if isinstance(e, Activate):
        return (0, e.agent)
    if isinstance(e, Deliver):
        return (1, e.edge)
    if isinstance(e, SwapPair):
        return (2, e.edge, e.left, e.right)
    return (3, len(e.path), e.path)


def event_to_json(e: Event) -> dict:
    if isinstance(e, Activate):
        return {"kind": "activate", "agent": e.agent}
    if isinstance(e, Deliver):
        return {"kind": "deliver", "edge": list(e.edge)}
    if isinstance(e, RelocateMalicious):
        return {"kind": "relocate", "path": list(e.path)}
    return {"kind": "swap", "left": list(e.left), "right": list(e.right), "edge": list(e.edge)}


def event_from_json(d: dict) -> Event:
    kind = d["kind"]
    if kind == "activate":
        return Activate(d["agent"])
    if kind == "deliver":
        return Deliver(tuple(d["edge"]))
    if kind == "relocate":
        return RelocateMalicious(tuple(d["path"]))
    if kind == "swap":
        return SwapPair(tuple(d["left"]), tuple(d["right"]), tuple(d["edge"]))
    raise ValueError(f"unknown event kind {kind!r}")


# -- world and state ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class World:
    """Everything about a run that never changes: topology and protocol."""

    topology: Topology
    protocol: str
    mesh_rules: str = "exclusive"
    mode: str = field(init=False)
    transition: Callable = field(init=False, repr=False)
    initial_pstate: tuple = field(init=False, repr=False)
    done: Callable = field(init=False, repr=False)

    def __post_init__(self):
        want = PROTOCOL_KINDS.get(self.protocol)
        if want is None:
            raise InvalidScenario(f"unknown protocol {self.protocol!r}")
        if self.topology.kind is not want:
            raise InvalidScenario(f"{self.protocol} runs on {want.value}, not {self.topology.kind.value}")
        setf = object.__setattr__
        if self.protocol == "rv-or":
            setf(self, "transition", ring_proto.rvor_transition)
            setf(self, "initial_pstate", ring_proto.RvOrState())
            setf(self, "done", ring_proto.rvor_done)
        elif self.protocol == "rv-ur":
            setf(self, "transition", ring_proto.rvur_transition)
            setf(self, "initial_pstate", ring_proto.RvUrState())
            setf(self, "done", ring_proto.rvur_done)
        else:
            rules = self.mesh_rules

            def trans(s, o):
                return mesh_proto.rvmesh_transition(s, o, rules)

            setf(self, "transition", trans)
            setf(self, "initial_pstate", mesh_proto.RvMeshState())
            setf(self, "done", lambda s: True)
        # transitions are pure and their inputs few, so memoizing is safe
        setf(self, "transition", functools.lru_cache(maxsize=None)(self.transition))
        setf(self, "mode", INSTANTANEOUS if self.topology.is_mesh else ASYNC_LINKS)
        if self.topology.is_mesh:
            # off-grid cells become -1, which is never an occupied node
            cells = tuple(tuple(-1 if c.node is None else c.node for c in two_hop_cells(self.topology, v))
                          for v in self.topology.nodes())
            setf(self, "_cells", cells)
        else:
            n = self.topology.node_count
            # next node in "my clockwise" for chirality +1 / -1
            setf(self, "_ring_next", {1: tuple(self.topology.port(v, self.topology.ports(0)[0]) for v in range(n)),
                                      -1: tuple(self.topology.port(v, self.topology.ports(0)[1]) for v in range(n))})

    def ring_target(self, v: int, chirality: int, direction: str) -> int:
        sign = chirality if direction == ring_proto.CW else -chirality
        return self._ring_next[sign][v]

    def mesh_target(self, v: int, direction: str) -> int | None:
        r, c = self.topology.coords(v)
        dr, dc = OFFSETS[direction]
        return self.topology.node_at(r + dr, c + dc)

    def activatable(self, rec: AgentRec) -> bool:
        if rec.node == IN_TRANSIT:
            return False
        p = rec.pstate
        if self.protocol == "rv-or":
            return not p.stopped
        if self.protocol == "rv-ur":
            return not p.exited
        return True


@dataclass(frozen=True, eq=False)
class SimState:
    world: World
    agents: tuple[AgentRec, ...]
    malicious: int
    # nonempty link queues only, sorted by directed edge; front of queue first
    queues: tuple[tuple[tuple[int, int], tuple[int, ...]], ...] = ()
    traversals: tuple[int, ...] = ()

    def key(self) -> tuple:
        return (self.agents, self.malicious, self.queues)

    def __eq__(self, other):
        return isinstance(other, SimState) and self.key() == other.key() and self.traversals == other.traversals

    def __hash__(self):
        return hash((self.key(), self.traversals))

    @property
    def mode(self) -> str:
        return self.world.mode

    def queue(self, edge: tuple[int, int]) -> tuple[int, ...]:
        for e, q in self.queues:
            if e == edge:
                return q
        return ()

    def occupants(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i, rec in enumerate(self.agents):
            if rec.node != IN_TRANSIT:
                out.setdefault(rec.node, []).append(i)
        return out

    def occupied(self) -> frozenset[int]:
        return frozenset(rec.node for rec in self.agents if rec.node != IN_TRANSIT)

    def gathered(self) -> bool:
        """All honest agents at one node with their protocols finished."""
        nodes = {rec.node for rec in self.agents}
        if len(nodes) != 1 or IN_TRANSIT in nodes:
            return False
        return all(self.world.done(rec.pstate) for rec in self.agents)

    def total_traversals(self) -> int:
        return sum(self.traversals)

    def snapshot_hash(self) -> str:
        return snapshot_hash(self)


def snapshot_hash(s: SimState) -> str:
    blob = repr((s.key(), s.traversals)).encode()
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def make_state(world: World, placements, malicious: int, chirality=None) -> SimState:
    """Initial state; validates the placement rules of the model."""
    t = world.topology
    placements = list(placements)
    if not placements:
        raise InvalidScenario("no honest agents")
    for v in placements + [malicious]:
        if not (isinstance(v, int) and 0 <= v < t.node_count):
            raise InvalidScenario(f"node {v!r} is not in the topology")
    if not world.topology.is_mesh and len(set(placements)) != len(placements):
        raise InvalidScenario("two agents start on the same node")
    if malicious in placements:
        raise InvalidScenario("the malicious agent starts on an occupied node")
    if world.topology.is_mesh:
        chir = [0] * len(placements)
    elif world.topology.kind is Kind.ORIENTED_RING:
        chir = [1] * len(placements)
    else:
        chir = list(chirality) if chirality is not None else [1] * len(placements)
        if len(chir) != len(placements) or any(c not in (1, -1) for c in chir):
            raise InvalidScenario("chirality needs one +1/-1 entry per agent")
    agents = tuple(AgentRec(v, world.initial_pstate, c) for v, c in zip(placements, chir))
    return SimState(world, agents, malicious, (), (0,) * len(agents))


# -- observations ---------------------------------------------------------


def observe(s: SimState, a: int, occ: dict[int, list[int]] | None = None):
    rec = s.agents[a]
    if rec.node == IN_TRANSIT:
        raise IllegalEvent(f"agent {a} is in transit and cannot observe")
    occ = s.occupants() if occ is None else occ
    others = tuple(sorted(s.agents[j].pstate for j in occ.get(rec.node, ()) if j != a))
    w = s.world
    if w.topology.is_mesh:
        flags = tuple(c in occ for c in w._cells[rec.node])
        return MeshObs(flags, others)
    t = w.topology
    return RingObs(rec.node == t.special_node, others, False, t.degree(rec.node), t.ports(rec.node))


# -- malicious agent ------------------------------------------------------------


def malicious_allowed(s: SimState) -> tuple[set[int], set[frozenset]]:
    """Nodes M may enter and edges it may not cross."""
    t = s.world.topology
    blocked = {rec.node for rec in s.agents if rec.node != IN_TRANSIT}
    closed = set()
    for (u, v), q in s.queues:
        blocked.add(v)
        closed.add(frozenset((u, v)))
    allowed = set(t.nodes()) - blocked
    return allowed, closed


def malicious_paths(s: SimState) -> dict[int, tuple[int, ...]]:
    """Shortest legal path from M to every node it can currently reach."""
    t = s.world.topology
    allowed, closed = malicious_allowed(s)
    start = s.malicious
    paths = {start: (start,)}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for u in t.neighbors(v):
            if u in allowed and u not in paths and frozenset((u, v)) not in closed:
                paths[u] = paths[v] + (u,)
                todo.append(u)
    return paths


def malicious_hops(s: SimState) -> list[int]:
    """Neighbors M can step to right now."""
    t = s.world.topology
    allowed, closed = malicious_allowed(s)
    m = s.malicious
    return [u for u in t.neighbors(m) if u in allowed and frozenset((u, m)) not in closed]


# -- enabled events --------------------------------------------------------------


def enabled_events(s: SimState) -> list[Event]:
    out: list[Event] = [Activate(i) for i, rec in enumerate(s.agents) if s.world.activatable(rec)]
    out.extend(Deliver(e) for e, _ in s.queues)
    if s.world.mode == INSTANTANEOUS:
        out.extend(swap_pairs(s))
    out.extend(RelocateMalicious(p) for v, p in sorted(malicious_paths(s).items()) if v != s.malicious)
    return out


def _command(s: SimState, a: int, occ) -> str | None:
    _, act = s.world.transition(s.agents[a].pstate, observe(s, a, occ))
    return act.direction if act.kind == "move" else None


def swap_pairs(s: SimState) -> list[SwapPair]:
    w = s.world
    occ = s.occupants()
    commands = {}
    for v, members in occ.items():
        seen = {}
        for a in members:
            p = s.agents[a].pstate
            if p not in seen:
                seen[p] = _command(s, a, occ)
            d = seen[p]
            if d is not None:
                commands.setdefault((v, w.mesh_target(v, d)), []).append(a)
    out = []
    for (u, v), left in sorted(commands.items()):
        if u < v and (v, u) in commands:
            out.append(SwapPair(tuple(left), tuple(commands[(v, u)]), (u, v)))
    return out


# -- step -----------------------------------------------------------------------


class TraceRecord(NamedTuple):
    clock: int
    event: Event
    effects: dict
    hash: str

    def to_json(self) -> dict:
        return {"clock": self.clock, **event_to_json(self.event), **self.effects, "hash": self.hash}


def _replace(s: SimState, **kw) -> SimState:
    return SimState(
        s.world,
        kw.get("agents", s.agents),
        kw.get("malicious", s.malicious),
        kw.get("queues", s.queues),
        kw.get("traversals", s.traversals),
    )


def _set_queue(queues, edge, q):
    d = dict(queues)
    if q:
        d[edge] = tuple(q)
    else:
        d.pop(edge, None)
    return tuple(sorted(d.items()))


def apply(s: SimState, e: Event) -> tuple[SimState, dict]:
    """Apply an event without checking it is enabled; returns (state, effects)."""
    if isinstance(e, Activate):
        return _activate(s, e.agent)
    if isinstance(e, Deliver):
        return _deliver(s, e.edge)
    if isinstance(e, RelocateMalicious):
        return _replace(s, malicious=e.path[-1]), {"from": e.path[0], "to": e.path[-1]}
    return _swap(s, e)


def _activate(s: SimState, a: int) -> tuple[SimState, dict]:
    w = s.world
    rec = s.agents[a]
    occ = s.occupants()
    obs = observe(s, a, occ)
    new_p, act = w.transition(rec.pstate, obs)
    effects = {"agent": a, "from": rec.node, "to": rec.node, "bump": False,
               "before": _label(rec.pstate), "after": None}
    agents = list(s.agents)
    trav = s.traversals
    queues = s.queues

    if act.kind == "move":
        if w.mode == INSTANTANEOUS:
            target = w.mesh_target(rec.node, act.direction)
            if target is None or target not in occ:
                raise ProtocolFault(f"agent {a} moves {act.direction} into a free or missing cell")
            agents[a] = AgentRec(target, new_p, rec.chirality)
            trav = trav[:a] + (trav[a] + 1,) + trav[a + 1:]
            effects["to"] = target
        else:
            target = w.ring_target(rec.node, rec.chirality, act.direction)
            if target == s.malicious:
                new_p, act = w.transition(rec.pstate, obs._replace(bumped=True))
                if act.kind == "move":
                    raise ProtocolFault("a bumped agent asked to move again in the same activation")
                effects["bump"] = True
                agents[a] = AgentRec(rec.node, new_p, rec.chirality)
            else:
                edge = (rec.node, target)
                group = [a]
                if w.protocol == "rv-ur" and new_p.phase == ring_proto.COLLECTOR:
                    group += [j for j in occ[rec.node] if s.agents[j].pstate.phase == ring_proto.FOLLOWING]
                for j in group:
                    agents[j] = AgentRec(IN_TRANSIT, new_p if j == a else s.agents[j].pstate, s.agents[j].chirality)
                queues = _set_queue(queues, edge, s.queue(edge) + tuple(group))
                effects["to"] = target
                if len(group) > 1:
                    effects["group"] = group
    else:
        agents[a] = AgentRec(rec.node, new_p, rec.chirality)
    effects["after"] = _label(new_p)
    return _replace(s, agents=tuple(agents), queues=queues, traversals=trav), effects


def _deliver(s: SimState, edge: tuple[int, int]) -> tuple[SimState, dict]:
    q = s.queue(edge)
    if not q:
        raise IllegalEvent(f"queue {edge} is empty")
    batch = [q[0]]
    if s.world.protocol == "rv-ur" and s.agents[q[0]].pstate.phase == ring_proto.COLLECTOR:
        for j in q[1:]:
            if s.agents[j].pstate.phase != ring_proto.FOLLOWING:
                break
            batch.append(j)
    agents = list(s.agents)
    trav = list(s.traversals)
    for j in batch:
        agents[j] = agents[j]._replace(node=edge[1])
        trav[j] += 1
    new = _replace(s, agents=tuple(agents), queues=_set_queue(s.queues, edge, q[len(batch):]),
                   traversals=tuple(trav))
    return new, {"agents": batch, "from": edge[0], "to": edge[1]}


def _swap(s: SimState, e: SwapPair) -> tuple[SimState, dict]:
    w = s.world
    u, v = e.edge
    occ = s.occupants()
    agents = list(s.agents)
    trav = list(s.traversals)
    for group, src, dst in ((e.left, u, v), (e.right, v, u)):
        for a in group:
            rec = s.agents[a]
            _, act = w.transition(rec.pstate, observe(s, a, occ))
            if act.kind != "move" or w.mesh_target(src, act.direction) != dst:
                raise IllegalEvent(f"agent {a} does not want to cross {e.edge}")
            agents[a] = AgentRec(dst, mesh_proto.RvMeshState(act.direction), rec.chirality)
            trav[a] += 1
    new = _replace(s, agents=tuple(agents), traversals=tuple(trav))
    return new, {"left": list(e.left), "right": list(e.right)}


def _label(p) -> str:
    return p.label() if hasattr(p, "label") else repr(p)


def is_enabled(s: SimState, e: Event) -> bool:
    if isinstance(e, Activate):
        return 0 <= e.agent < len(s.agents) and s.world.activatable(s.agents[e.agent])
    if isinstance(e, Deliver):
        return bool(s.queue(e.edge))
    if isinstance(e, RelocateMalicious):
        return _legal_path(s, e.path)
    if s.world.mode != INSTANTANEOUS:
        return False
    return e in swap_pairs(s)


def _legal_path(s: SimState, path: tuple[int, ...]) -> bool:
    if len(path) < 2 or path[0] != s.malicious:
        return False
    t = s.world.topology
    allowed, closed = malicious_allowed(s)
    for x, y in zip(path, path[1:]):
        if y not in t.neighbors(x) or y not in allowed or frozenset((x, y)) in closed:
            return False
    return True


def step(s: SimState, e: Event, clock: int = 0) -> tuple[SimState, TraceRecord]:
    if not is_enabled(s, e):
        raise IllegalEvent(f"{e} is not enabled")
    new, effects = apply(s, e)
    return new, TraceRecord(clock, e, effects, snapshot_hash(new))
