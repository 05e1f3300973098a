"""Scenario files: one JSON document describing a single run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from rva.engine import PROTOCOL_KINDS, SimState, World, make_state
from rva.errors import InvalidScenario, InvalidTopology
from rva.topology import Topology

SCHEMA_VERSION = 1
POLICIES = ("fair-random", "greedy-blocker", "symmetric-ring")


@lru_cache(maxsize=None)
def schema() -> dict:
    text = resources.files("rva").joinpath(f"schema/scenario-v{SCHEMA_VERSION}.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    protocol: str
    placements: tuple[int, ...]
    malicious: int
    chirality: tuple[int, ...] | None = None
    policy: str = "fair-random"
    seed: int = 0
    fairness: str = "fair"
    mesh_rules: str = "exclusive"
    max_events: int = 100_000
    max_traversals: int | None = None
    name: str = ""
    world: World = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise InvalidScenario(f"unknown policy {self.policy!r}")
        if len(set(self.placements)) != len(self.placements):
            raise InvalidScenario("two agents start on the same node")
        object.__setattr__(self, "world", World(self.topology, self.protocol, self.mesh_rules))
        self.initial_state()  # validates placements and chirality

    @property
    def mode(self) -> str:
        return self.world.mode

    @property
    def k(self) -> int:
        return len(self.placements)

    def initial_state(self) -> SimState:
        return make_state(self.world, self.placements, self.malicious, self.chirality)

    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "topology": self.topology.to_json(),
            "protocol": self.protocol,
            "placements": list(self.placements),
            "malicious": self.malicious,
            "policy": {"kind": self.policy, "seed": self.seed},
            "fairness": self.fairness,
            "mesh_rules": self.mesh_rules,
            "limits": {"max_events": self.max_events, "max_traversals": self.max_traversals},
        }
        if self.chirality is not None:
            out["chirality"] = list(self.chirality)
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        try:
            jsonschema.validate(data, schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise InvalidScenario(f"{where}: {exc.message}") from None
        try:
            topo = Topology.from_json(data["topology"])
        except InvalidTopology as exc:
            raise InvalidScenario(str(exc)) from exc
        if topo.kind is not PROTOCOL_KINDS[data["protocol"]]:
            raise InvalidScenario(f"{data['protocol']} cannot run on a {topo.kind.value} topology")
        policy = data.get("policy", {})
        limits = data.get("limits", {})
        chir = data.get("chirality")
        return cls(
            topology=topo,
            protocol=data["protocol"],
            placements=tuple(data["placements"]),
            malicious=data["malicious"],
            chirality=tuple(chir) if chir is not None else None,
            policy=policy.get("kind", "fair-random"),
            seed=policy.get("seed", 0),
            fairness=data.get("fairness", "fair"),
            mesh_rules=data.get("mesh_rules", "exclusive"),
            max_events=limits.get("max_events", 100_000),
            max_traversals=limits.get("max_traversals"),
            name=data.get("name", ""),
        )


def load(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidScenario(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"{path} is not valid JSON: {exc}") from exc
    return Scenario.from_json(data)
