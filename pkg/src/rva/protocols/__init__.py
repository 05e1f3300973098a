from typing import NamedTuple


class Action(NamedTuple):
    """What an honest agent does at the end of one activation.

    ``direction`` is "cw"/"ccw" (the agent's own sense of clockwise) on rings
    and one of N/S/E/W on meshes.
    """

    kind: str
    direction: str | None = None


STAY = Action("stay")
EXIT = Action("exit")


def move(direction: str) -> Action:
    return Action("move", direction)


class RingObs(NamedTuple):
    at_special: bool
    colocated: tuple = ()
    bumped: bool = False
    degree: int = 2
    ports: tuple = ()


class MeshObs(NamedTuple):
    occupancy: tuple[bool, ...]
    colocated: tuple = ()
