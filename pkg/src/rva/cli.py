"""``rva`` command line: run a scenario, model-check a sweep, show a demo.

Exit codes: 0 rendezvous / sweep as expected, 1 bad input, 2 livelock or
counterexample (or a sweep that missed its expectation), 3 bound exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from rva import adversary, demos, sweep
from rva.errors import RvaError
from rva.scenario import Scenario, load
from rva.verdicts import verdict_to_json

EXIT_OK, EXIT_ERROR, EXIT_LIVELOCK, EXIT_BOUND = 0, 1, 2, 3

_VERDICT_EXIT = {
    "rendezvous": EXIT_OK,
    "all-schedules-rendezvous": EXIT_OK,
    "livelock": EXIT_LIVELOCK,
    "counterexample": EXIT_LIVELOCK,
    "bound-exhausted": EXIT_BOUND,
}


def _default_max_states() -> int:
    raw = os.environ.get("RVA_MAX_STATES", "")
    return int(raw) if raw.isdigit() else 2_000_000


def _emit(report: dict) -> None:
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_run(args) -> int:
    scenario = load(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    verdict, trace = adversary.run_scenario(scenario, seed, args.max_events)
    if args.trace:
        with open(args.trace, "w") as fh:
            for rec in trace:
                fh.write(json.dumps(rec.to_json()) + "\n")
    per_agent = _traversals(scenario, trace)
    report = {
        "scenario": scenario.name or args.scenario,
        "policy": scenario.policy,
        "seed": seed,
        "verdict": verdict_to_json(verdict),
        "total_traversals": sum(per_agent),
        "per_agent_traversals": per_agent,
        "events": len(trace),
    }
    _emit(report)
    return _VERDICT_EXIT[verdict.kind]


def _traversals(scenario: Scenario, trace) -> list[int]:
    counts = [0] * scenario.k
    for rec in trace:
        kind = rec.event.__class__.__name__
        eff = rec.effects
        if kind == "Deliver":
            for a in eff["agents"]:
                counts[a] += 1
        elif kind == "Activate" and scenario.mode == "instantaneous" and eff["to"] != eff["from"]:
            counts[eff["agent"]] += 1
        elif kind == "SwapPair":
            for a in eff["left"] + eff["right"]:
                counts[a] += 1
    return counts


def cmd_check(args) -> int:
    data = json.loads(Path(args.spec).read_text())
    max_states = args.max_states or _default_max_states()
    if "placements" in data:
        scenario = Scenario.from_json(data)
        verdict = adversary.model_check(scenario, max_states)
        _emit({"scenario": scenario.name or args.spec, "verdict": verdict_to_json(verdict)})
        return _VERDICT_EXIT[verdict.kind]
    report = sweep.run_sweep(data, max_states)
    _emit(report)
    if report["ok"]:
        return EXIT_OK
    kinds = {c["verdict"]["kind"] for c in report["cells"]}
    return EXIT_BOUND if kinds == {"bound-exhausted"} else EXIT_LIVELOCK


def cmd_demo(args) -> int:
    _emit(demos.demo(args.name))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with every other bad input; 2 means livelock
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rva", description="Rendezvous of mobile agents against a blocking adversary.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one scenario under its scheduler policy")
    r.add_argument("scenario")
    r.add_argument("--trace", help="write the event trace as JSON lines")
    r.add_argument("--seed", type=int, help="override the scenario's policy seed")
    r.add_argument("--max-events", type=int, help="override the scenario's event limit")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="model-check a scenario or a sweep over every adversary behaviour")
    c.add_argument("spec")
    c.add_argument("--max-states", type=int, help="state bound (default: $RVA_MAX_STATES or 2000000)")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("demo", help="print the certificate of a canned impossibility scenario")
    d.add_argument("name", help=" | ".join(demos.DEMOS))
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RvaError, OSError, ValueError) as exc:
        print(f"rva: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
