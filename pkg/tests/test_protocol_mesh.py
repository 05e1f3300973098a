import pytest
from hypothesis import given, strategies as st

from rva import analysis
from rva.engine import AgentRec, SimState, World, observe
from rva.errors import ProtocolFault
from rva.protocols import STAY, MeshObs, move
from rva.protocols.mesh import MeshView, RvMeshState, classify_view, rule_table_json, rvmesh_transition
from rva.topology import build_oriented_mesh


@pytest.mark.parametrize("occupied, want", [
    (("E",), "E"),
    (("E", "S"), None),
    (("E", "S", "SE"), "E"),
    (("S",), "S"),
    (("W",), None),
    (("W", "WW"), "W"),
    (("W", "NW"), "W"),
    (("W", "SW"), "W"),
    (("N",), None),
    (("N", "NN"), "N"),
    (("N", "NE"), "N"),
    (("N", "S", "E", "W"), None),
    (("W", "S", "SW", "WW"), "W"),
])
def test_classify_examples(occupied, want):
    assert classify_view(MeshView.of(*occupied)) == want


def test_literal_table_lets_upper_right_corner_move_west():
    v = MeshView.of("W", "S")
    assert classify_view(v, "literal") == "W"
    assert classify_view(v) is None


@pytest.mark.parametrize("table", ["exclusive", "literal"])
def test_every_move_targets_an_occupied_cell(table):
    for bits in range(1 << 12):
        v = MeshView.from_bits(bits)
        d = classify_view(v, table)
        assert d is None or v[d]


def test_rule_table_json_covers_every_view():
    doc = rule_table_json()
    assert len(doc["actions"]) == 4096
    assert doc["actions"]["001" + "0" * 9] == "E"  # only E set


def obs(*occupied):
    return MeshObs(MeshView.of(*occupied).flags)


def test_latch_empty_moves():
    assert rvmesh_transition(RvMeshState(), obs("E", "S", "SE")) == (RvMeshState(), move("E"))


def test_latch_suppresses_the_reverse_swap():
    assert rvmesh_transition(RvMeshState("E"), obs("W", "WW"), "literal") == (RvMeshState(), STAY)


def test_latch_allows_same_direction():
    assert rvmesh_transition(RvMeshState("E"), obs("E")) == (RvMeshState(), move("E"))


@given(st.integers(0, (1 << 12) - 1), st.sampled_from(["", "N", "S", "E", "W"]))
def test_transition_is_pure(bits, latch):
    o = MeshObs(MeshView.from_bits(bits).flags)
    assert rvmesh_transition(RvMeshState(latch), o) == rvmesh_transition(RvMeshState(latch), o)


def test_move_into_free_cell_is_a_fault(monkeypatch):
    from rva.protocols import mesh

    monkeypatch.setitem(mesh.RULE_TABLES, "exclusive", lambda v: "N")
    with pytest.raises(ProtocolFault):
        rvmesh_transition(RvMeshState(), obs("S"))


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)])
def test_some_agent_can_move_in_every_configuration(dims):
    t = build_oriented_mesh(*dims)
    w = World(t, "rv-mesh")
    for occ in analysis.connected_hole_free_sets(t, min_size=3):
        agents = tuple(AgentRec(v, RvMeshState(), 0) for v in sorted(occ))
        s = SimState(w, agents, -1, (), (0,) * len(agents))
        movers = [a for a in range(len(agents)) if classify_view(MeshView(observe(s, a).occupancy)) is not None]
        assert movers, sorted(t.coords(v) for v in occ)


def test_view_ignores_counts_and_malicious():
    t = build_oriented_mesh(3, 3)
    w = World(t, "rv-mesh")
    a = SimState(w, (AgentRec(4, RvMeshState(), 0), AgentRec(5, RvMeshState(), 0)), 0, (), (0, 0))
    b = SimState(w, (AgentRec(4, RvMeshState(), 0), AgentRec(5, RvMeshState(), 0), AgentRec(5, RvMeshState(), 0)),
                 8, (), (0, 0, 0))
    assert observe(a, 0).occupancy == observe(b, 0).occupancy
    assert observe(a, 0).occupancy[0:4] == (False, False, True, False)
