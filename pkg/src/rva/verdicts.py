"""Outcomes of single runs and of exhaustive checks, with their JSON form."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass
class Rendezvous:
    node: int
    per_agent_traversals: list[int]
    total_traversals: int
    kind: str = field(default="rendezvous", init=False)


@dataclass
class LivelockCertificate:
    """A reachable cycle of states with no rendezvous on it.

    ``prefix`` and ``cycle`` are snapshot hashes; ``events`` replays the
    prefix followed by one turn of the cycle.  ``fair`` records whether every
    honest event class enabled all along the cycle is taken inside it.
    """

    prefix: list[str]
    cycle: list[str]
    events: list[dict] = field(default_factory=list)
    fair: bool = True
    reason: str = "livelock"
    start: dict = field(default_factory=dict)
    kind: str = field(default="livelock", init=False)


@dataclass
class CounterexampleTrace:
    events: list[dict]
    hashes: list[str]
    reason: str
    start: dict = field(default_factory=dict)
    kind: str = field(default="counterexample", init=False)


@dataclass
class AllSchedulesRendezvous:
    max_total_traversals: float
    max_agent_traversals: float
    states_explored: int
    initial_states: int = 0
    kind: str = field(default="all-schedules-rendezvous", init=False)


@dataclass
class BoundExhausted:
    states_explored: int
    reason: str = ""
    kind: str = field(default="bound-exhausted", init=False)


Verdict = Rendezvous | LivelockCertificate | CounterexampleTrace | AllSchedulesRendezvous | BoundExhausted

_KINDS = {
    "rendezvous": Rendezvous,
    "livelock": LivelockCertificate,
    "counterexample": CounterexampleTrace,
    "all-schedules-rendezvous": AllSchedulesRendezvous,
    "bound-exhausted": BoundExhausted,
}


def verdict_to_json(v: Verdict) -> dict:
    d = asdict(v)
    for k, x in d.items():
        if x == float("inf"):
            d[k] = "unbounded"
    return d


def verdict_from_json(d: dict) -> Verdict:
    d = dict(d)
    cls = _KINDS[d.pop("kind")]
    for k, x in d.items():
        if x == "unbounded":
            d[k] = float("inf")
    return cls(**d)
