"""Transition functions of the two ring protocols.

Both are pure: ``(state, observation) -> (state', action)``.  An observation
with ``bumped=True`` is the engine re-invoking the function on the *same*
state after the move it asked for hit the malicious agent.
"""

from __future__ import annotations

from typing import NamedTuple

from rva.errors import EngineFault, ProtocolFault
from rva.protocols import EXIT, STAY, Action, RingObs, move

CW, CCW = "cw", "ccw"


def _flip(d: str) -> str:
    return CCW if d == CW else CW


# --------------------------------------------------------------------------
# RV-OR (oriented rings)


class RvOrState(NamedTuple):
    i: int = 0
    dir: str = CW
    stopped: bool = False
    # False right after a leg ended: the node the agent is standing on was
    # already "met" and must not end the next leg as well.
    armed: bool = True

    def label(self) -> str:
        if self.stopped:
            return f"rvor:i={self.i},stopped"
        return f"rvor:i={self.i},dir={self.dir}"


def rvor_transition(s: RvOrState, o: RingObs) -> tuple[RvOrState, Action]:
    if s.stopped:
        raise ProtocolFault("a stopped RV-OR agent was activated")
    if o.bumped and o.at_special and s.armed:
        # an armed arrival at o* ends the leg before any move is attempted
        raise EngineFault("bump reported on an unprocessed arrival at the special node")

    if any(isinstance(x, RvOrState) and x.stopped for x in o.colocated):
        return _end_leg(s, "stopped-agent"), STAY
    if o.bumped:
        return _end_leg(s, "bump"), STAY
    if s.armed and o.at_special:
        return _end_leg(s, "special"), STAY
    return s._replace(armed=True), move(s.dir)


def _end_leg(s: RvOrState, reason: str) -> RvOrState:
    i = s.i + 1
    out = s._replace(i=i, armed=False)
    if reason == "stopped-agent" or i >= 4:
        return out._replace(stopped=True)
    if i <= 2 and reason == "special":
        return out._replace(stopped=True)
    return out._replace(dir=_flip(s.dir))


def rvor_done(s: RvOrState) -> bool:
    return s.stopped


def rvor_bumps_at_least_two(s: RvOrState) -> bool:
    """Whether the agent has bumped into M at least twice so far.

    Legs 1 and 2 can only end in a reversal through a bump; any other ending
    stops the agent.  So the count is a function of (i, stopped).
    """
    return s.i >= 3 or (s.i == 2 and not s.stopped)


# --------------------------------------------------------------------------
# RV-UR (unoriented rings, odd number of agents)

INITIAL = "initial"
TRANSFORMER_1 = "transformer-1"
SEARCHER = "searcher"
STOPPER = "stopper"
COLLECTOR = "collector"
FINAL = "final"
TRANSFORMER_2 = "transformer-2"
TERMINATOR = "terminator"
FOLLOWING = "following"

PHASES = (INITIAL, TRANSFORMER_1, SEARCHER, STOPPER, COLLECTOR, FINAL, TRANSFORMER_2, TERMINATOR, FOLLOWING)


class RvUrState(NamedTuple):
    phase: str = INITIAL
    visits: int = 0  # unoccupied visits to o* while initial
    swept: bool = False  # collector has left the node where it was created
    exited: bool = False

    def label(self) -> str:
        if self.phase == INITIAL:
            return f"rvur:initial,visits={self.visits}"
        if self.phase == TERMINATOR and self.exited:
            return "rvur:terminator,exited"
        return f"rvur:{self.phase}"


def rvur_transition(s: RvUrState, o: RingObs) -> tuple[RvUrState, Action]:
    p = s.phase
    others = [x.phase for x in o.colocated]

    if p == INITIAL:
        return _initial(s, o, others)
    if p == TRANSFORMER_1:
        if all(x == FINAL for x in others):
            return _search(s._replace(phase=SEARCHER), o, others)
        return s, STAY
    if p == SEARCHER:
        return _search(s, o, others)
    if p == STOPPER:
        if TRANSFORMER_1 in others or TRANSFORMER_2 in others:
            return s._replace(phase=FINAL), STAY
        if COLLECTOR in others:
            return s._replace(phase=FOLLOWING), STAY
        if TERMINATOR in others:
            return s._replace(phase=TERMINATOR), STAY
        return s, STAY
    if p == FOLLOWING:
        if TERMINATOR in others:
            return s._replace(phase=TERMINATOR), STAY
        return s, STAY
    if p == COLLECTOR:
        return _collect(s, o, others)
    if p == FINAL:
        # only a collector still gathering its own group recruits finals; one
        # that is already sweeping has reached the end of its walk
        if any(x.phase == COLLECTOR and not x.swept for x in o.colocated):
            return s._replace(phase=STOPPER), STAY
        if TERMINATOR in others:
            return s._replace(phase=TERMINATOR), STAY
        return s, STAY
    if p == TRANSFORMER_2:
        if all(x == FINAL for x in others):
            return s._replace(phase=FINAL), STAY
        return s, STAY
    if p == TERMINATOR:
        if s.exited:
            raise ProtocolFault("an exited agent was activated")
        if all(x == TERMINATOR for x in others):
            return s._replace(exited=True), EXIT
        return s, STAY
    raise ProtocolFault(f"unknown RV-UR phase {p!r}")


def _initial(s: RvUrState, o: RingObs, others: list[str]) -> tuple[RvUrState, Action]:
    # Every activation of an initial agent follows an arrival (or is the very
    # first one), because the phase either ends or the agent moves on.
    if o.at_special:
        # an occupied o* neither counts as a visit nor as a meeting
        if not others:
            visits = s.visits + 1
            if visits >= 3:
                return s._replace(phase=STOPPER, visits=visits), STAY
            s = s._replace(visits=visits)
    elif others:
        if others == [STOPPER]:
            return s._replace(phase=TRANSFORMER_1), STAY
        if all(x == FINAL for x in others):
            return s._replace(phase=STOPPER), STAY
        if STOPPER in others and FINAL in others:
            return s._replace(phase=TRANSFORMER_2), STAY
        # any other company does not trigger anything: keep walking
    if o.bumped:
        if others:
            # not an exit condition of the walk: try again on the next activation
            return s, STAY
        return s._replace(phase=STOPPER), STAY
    return s, move(CW)


def _search(s: RvUrState, o: RingObs, others: list[str]) -> tuple[RvUrState, Action]:
    if not o.bumped:
        return s, move(CCW)
    if others and all(x == FINAL for x in others):
        return s._replace(phase=STOPPER), STAY
    return s._replace(phase=COLLECTOR), STAY


def _collect(s: RvUrState, o: RingObs, others: list[str]) -> tuple[RvUrState, Action]:
    if s.swept:
        if FINAL in others:
            return s._replace(phase=TERMINATOR), STAY
        if STOPPER in others:
            return s, STAY
    elif STOPPER in others or FINAL in others:
        # wait until everyone here has joined as a follower
        return s, STAY
    if o.bumped:
        return s, STAY
    return s._replace(swept=True), move(CW)


def rvur_done(s: RvUrState) -> bool:
    return s.phase == TERMINATOR
