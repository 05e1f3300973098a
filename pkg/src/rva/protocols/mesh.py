"""RV-Mesh: move by looking at which cells within two hops are occupied.

A view is twelve booleans in the order of ``rva.topology.TWO_HOP_ORDER``.
Off-grid cells are reported as free.  Every rule moves an agent onto an
occupied neighbor, so the set of occupied nodes never grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

from rva.errors import ProtocolFault
from rva.protocols import STAY, Action, MeshObs, move
from rva.topology import OPPOSITE, TWO_HOP_ORDER

_IDX = {name: i for i, name in enumerate(TWO_HOP_ORDER)}
_NEAR = ("N", "S", "E", "W")


@dataclass(frozen=True)
class MeshView:
    flags: tuple[bool, ...]

    def __getitem__(self, name: str) -> bool:
        return self.flags[_IDX[name]]

    @classmethod
    def of(cls, *occupied: str) -> "MeshView":
        return cls(tuple(name in occupied for name in TWO_HOP_ORDER))

    @classmethod
    def from_bits(cls, bits: int) -> "MeshView":
        return cls(tuple(bool(bits >> i & 1) for i in range(12)))

    def bits(self) -> int:
        return sum(1 << i for i, f in enumerate(self.flags) if f)

    def neighbors(self) -> frozenset[str]:
        return frozenset(d for d in _NEAR if self[d])


def _exclusive_cd(v: MeshView) -> bool:
    return v["W"] and v["S"] and v["SW"] and not v["N"] and not v["E"] and (v["WW"] or v["NW"])


def _literal_cd(v: MeshView) -> bool:
    return v["W"] and v["S"] and not v["N"] and not v["E"]


def _classifier(cd: Callable[[MeshView], bool]) -> Callable[[MeshView], str | None]:
    def classify(v: MeshView) -> str | None:
        near = v.neighbors()
        if near == {"E"}:  # (a)
            return "E"
        if near == {"E", "S"} and v["SE"]:  # (b)
            return "E"
        if cd(v):  # (c, d)
            return "W"
        if near == {"W"} and (v["WW"] or v["NW"] or v["SW"]):  # (e, f, g)
            return "W"
        if near == {"S"}:  # (h)
            return "S"
        if near == {"N"} and (v["NN"] or v["NW"] or v["NE"]):  # (i, l, m)
            return "N"
        return None

    return classify


# Default table.  West-moves of a block's upper-right corner (c, d) also need
# the cell two steps West or North-West to be occupied, so they never fire in
# the same snapshot as the East-move (b) of the block's upper-left corner.
classify_exclusive = _classifier(_exclusive_cd)
# (c, d) without that condition, kept for comparison; it allows swaps and
# can disconnect the configuration.
classify_literal = _classifier(_literal_cd)

RULE_TABLES = {"exclusive": classify_exclusive, "literal": classify_literal}


def classify_view(v: MeshView, table: str = "exclusive") -> str | None:
    """Direction to move in (N/S/E/W), or None to stay."""
    return RULE_TABLES[table](v)


class RvMeshState(NamedTuple):
    # direction of the swap this agent just took part in, "" when none
    swap_latch: str = ""

    def label(self) -> str:
        return f"rvmesh:latch={self.swap_latch}" if self.swap_latch else "rvmesh"


def rvmesh_transition(
    s: RvMeshState, o: MeshObs, table: str = "exclusive"
) -> tuple[RvMeshState, Action]:
    view = MeshView(tuple(o.occupancy))
    d = classify_view(view, table)
    cleared = RvMeshState()
    if d is None:
        return cleared, STAY
    if not view[d]:
        raise ProtocolFault(f"rule table moves {d} into a free cell")
    if s.swap_latch and d == OPPOSITE[s.swap_latch]:
        return cleared, STAY
    return cleared, move(d)


def rule_table_json(table: str = "exclusive") -> dict:
    """All 4096 views mapped to their action, keyed by the 12-bit pattern.

    Bit i is set when cell ``TWO_HOP_ORDER[i]`` is occupied.
    """
    classify = RULE_TABLES[table]
    actions = {}
    for bits in range(1 << 12):
        d = classify(MeshView.from_bits(bits))
        actions[format(bits, "012b")[::-1]] = d or "stay"
    return {"table": table, "cell_order": list(TWO_HOP_ORDER), "actions": actions}
