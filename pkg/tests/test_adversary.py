import collections

import pytest
from hypothesis import given, settings, strategies as st

from rva import engine
from rva.adversary import (
    FairRandom,
    GreedyBlocker,
    SymmetricRing,
    greedy_blocker_choose,
    model_check,
    replay,
    run,
)
from rva.engine import Activate, RelocateMalicious, World, enabled_events, make_state
from rva.errors import InapplicablePolicy
from rva.protocols.ring import CCW, RvOrState
from rva.scenario import Scenario
from rva.topology import build_oriented_mesh, build_oriented_ring, build_unoriented_ring
from rva.verdicts import BoundExhausted, CounterexampleTrace, LivelockCertificate, Rendezvous


def oriented(n):
    return World(build_oriented_ring(n, 0), "rv-or")


def unoriented(n):
    return World(build_unoriented_ring(n, 0), "rv-ur")


def test_fair_random_gives_every_event_a_chance():
    s = make_state(oriented(6), [1, 3], 5)
    s, _ = engine.step(s, Activate(0))
    events = enabled_events(s)
    pol = FairRandom(3)
    pol.bind(s)
    counts = collections.Counter(pol.choose(s, events) for _ in range(3000))
    assert set(counts) == set(events)


def test_fair_random_is_reproducible():
    s = make_state(oriented(8), [1, 4, 6], 0)
    a, ta = run(s, FairRandom(11))
    b, tb = run(s, FairRandom(11))
    assert a == b and [r.hash for r in ta] == [r.hash for r in tb]


@pytest.mark.parametrize("seed", range(5))
def test_fair_random_run_gathers_on_small_oriented_ring(seed):
    v, trace = run(make_state(oriented(5), [1, 3], 0), FairRandom(seed))
    assert isinstance(v, Rendezvous)
    assert v.total_traversals == sum(v.per_agent_traversals)


def test_run_stops_at_the_event_limit():
    v, trace = run(make_state(oriented(8), [1, 4, 6], 0), FairRandom(0), max_events=3)
    assert isinstance(v, BoundExhausted) and len(trace) == 3


def test_run_reports_a_stuck_configuration():
    w = oriented(5)
    s = make_state(w, [1, 3], 0)
    stuck = engine._replace(s, agents=tuple(r._replace(pstate=RvOrState(1, CCW, True)) for r in s.agents))
    v, trace = run(stuck, FairRandom(0))
    assert isinstance(v, CounterexampleTrace) and trace == []


def test_run_needs_positive_limits():
    with pytest.raises(ValueError):
        run(make_state(oriented(5), [1], 0), FairRandom(0), max_events=0)


def test_symmetric_schedule_on_the_even_ring():
    w = unoriented(8)
    s = make_state(w, [3, 4], 0, [1, -1])
    pol = SymmetricRing()
    v, trace = run(s, pol)
    assert isinstance(v, LivelockCertificate)
    states = replay(w, v.start, v.events)
    assert all(pol.is_symmetric(states[i]) for i in pol.round_starts)
    assert not any(x.gathered() for x in states)


@pytest.mark.parametrize("n, placements, chirality", [
    (9, [3, 4, 5], [1, -1, 1]),  # odd k
    (8, [3, 4], [1, 1]),  # equal chirality
    (8, [2, 4], [1, -1]),  # not a chain
    (8, [7, 0], [1, -1]),  # o* inside the chain
])
def test_symmetric_schedule_preconditions(n, placements, chirality):
    m = next(v for v in range(n) if v not in placements)
    s = make_state(unoriented(n), placements, m, chirality)
    with pytest.raises(InapplicablePolicy):
        run(s, SymmetricRing())


def test_symmetric_schedule_needs_an_unoriented_ring():
    with pytest.raises(InapplicablePolicy):
        run(make_state(oriented(8), [3, 4], 0), SymmetricRing())


def test_greedy_keeps_m_in_front_of_an_approaching_agent():
    w = oriented(8)
    s = make_state(w, [2, 6], 7)
    assert not isinstance(greedy_blocker_choose(s, enabled_events(s)), RelocateMalicious)


def test_greedy_moves_m_onto_an_intended_target():
    w = oriented(8)
    s = make_state(w, [2, 6], 4)
    ev = greedy_blocker_choose(s, enabled_events(s))
    assert isinstance(ev, RelocateMalicious) and ev.path[-1] in (3, 7)


def test_greedy_tie_break_when_gathered_agents_wait():
    w = oriented(5)
    s = make_state(w, [1, 2], 0)
    stopped = RvOrState(1, CCW, True)
    s = engine._replace(s, agents=tuple(r._replace(node=2, pstate=stopped) for r in s.agents))
    events = enabled_events(s)
    assert greedy_blocker_choose(s, events) == min(events, key=engine.event_key)


@settings(max_examples=40)
@given(st.integers(4, 8), st.randoms(use_true_random=False), st.data())
def test_greedy_only_proposes_enabled_events(n, rng, data):
    k = data.draw(st.integers(1, n - 2))
    nodes = rng.sample(range(n), k + 1)
    s = make_state(oriented(n), nodes[:k], nodes[k])
    for _ in range(40):
        events = enabled_events(s)
        if not events:
            break
        ev = greedy_blocker_choose(s, events)
        assert ev in events
        s, _ = engine.step(s, rng.choice(events))


def test_greedy_on_a_mesh_never_relocates_onto_agents():
    w = World(build_oriented_mesh(3, 3), "rv-mesh")
    s = make_state(w, [0, 1, 4], 8)
    ev = greedy_blocker_choose(s, enabled_events(s))
    assert not isinstance(ev, RelocateMalicious) or ev.path[-1] not in s.occupied()


def test_greedy_run_terminates_with_a_verdict():
    v, _ = run(make_state(oriented(6), [1, 3, 4], 0), GreedyBlocker())
    assert v.kind in ("rendezvous", "livelock", "counterexample")


def test_model_check_of_a_scenario():
    sc = Scenario(build_oriented_mesh(2, 3), "rv-mesh", (0, 1, 4), 5)
    assert model_check(sc).kind == "all-schedules-rendezvous"
