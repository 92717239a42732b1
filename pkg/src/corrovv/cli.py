"""Command-line driver: ``simulate``, ``check``, ``verify`` and ``corroborate``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .assertions import check_suite, load_assertions, render_json, render_text
from .automata import ModelError, load_model, reachability
from .corroboration import (
    BindingError,
    CampaignError,
    campaign_from_binding,
    load_binding,
    run_campaign,
    write_report,
)
from .simulator import ScenarioError, SimulationError, TraceError, load_scenario, load_trace, run

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _controller(path):
    m = load_model(path)
    if m.automaton is None:
        raise UsageError(f"{path}: no automaton or rule diagram in this file")
    return m


def _property(path, controller_model):
    m = load_model(path)
    prop = m.property or controller_model.property
    if prop is None:
        raise UsageError(f"{path}: no property section")
    env = controller_model.environment if m.environment.is_free() else m.environment
    if m.automaton is None:
        prop.validate(controller_model.automaton)
        env.validate(controller_model.automaton)
    return prop, env


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario).with_sim(seed=args.seed, dt=args.dt, duration=args.duration)
    scenario.validate()
    trace = run(scenario, _controller(args.controller).automaton)
    trace.save(args.out)
    last = trace.steps[-1]
    print(f"{len(trace.steps)} steps, final location {last['location']}, t={last['time']:g} s -> {args.out}")
    return EXIT_OK


def cmd_check(args) -> int:
    trace = load_trace(args.trace)
    assertions = load_assertions(args.assertions)
    suite = check_suite(trace, assertions)
    body = render_json(suite, assertions, trace) if args.format == "json" else render_text(suite)
    if args.report:
        Path(args.report).write_text(body, encoding="utf-8")
        print(render_text(suite).splitlines()[0])
    else:
        sys.stdout.write(body if body.endswith("\n") else body + "\n")
    return EXIT_OK if suite.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    cm = _controller(args.controller)
    prop, env = _property(args.property, cm)
    verdict = reachability(cm.automaton, prop, env)
    if args.json:
        print(json.dumps(verdict.to_dict(cm.automaton), indent=2))
    else:
        print(f"{prop.name}: {verdict.label} ({verdict.explored} symbolic states explored)")
        if verdict.witness is not None:
            for s in verdict.witness.to_dict(cm.automaton)["steps"]:
                what = s["edge"]["action"] if s.get("edge") else "observe"
                print(f"  after {s['delay']} tick(s): {what} -> {s['location']}")
    return EXIT_OK if verdict.safe else EXIT_FAIL


def cmd_corroborate(args) -> int:
    cm = _controller(args.controller)
    prop, env = _property(args.property, cm)
    base = load_scenario(args.scenario)
    bindings = [load_binding(p, cm.automaton, prop, env) for p in args.binding]
    primary = [b for b in bindings if b.property is not None]
    if not primary:
        raise UsageError(f"no binding file is for property {prop.name!r}")
    main = primary[0]
    others = [b for b in bindings if b is not main]
    campaign = campaign_from_binding(main, base, args.strategy, args.epsilon, args.trials, args.seed)
    report = run_campaign(main, campaign, others, workers=args.workers)
    out = write_report(report, args.out)
    print(f"{prop.name}: {report.status} ({len(report.outcomes)} trial(s), run {report.run_id}) -> {out / 'report.md'}")
    for r in report.reasons:
        print(f"  - {r}")
    return {"corroborated": EXIT_OK, "refuted": EXIT_FAIL}.get(report.status, 3)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrovv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario under a controller and write a trace")
    s.add_argument("--scenario", required=True)
    s.add_argument("--controller", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--duration", type=float)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="evaluate an assertion file on a trace")
    c.add_argument("--trace", required=True)
    c.add_argument("--assertions", required=True)
    c.add_argument("--report")
    c.add_argument("--format", choices=("json", "text"), default="text")
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("verify", help="model-check a controller against a safety property")
    v.add_argument("--controller", required=True)
    v.add_argument("--property", required=True)
    v.add_argument("--json", action="store_true", help="print the verdict and witness as JSON")
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("corroborate", help="formal check plus a boundary simulation campaign")
    k.add_argument("--scenario", required=True)
    k.add_argument("--controller", required=True)
    k.add_argument("--property", required=True)
    k.add_argument("--binding", required=True, action="append")
    k.add_argument("--strategy", choices=("boundary", "sweep", "random"))
    k.add_argument("--epsilon", type=float)
    k.add_argument("--trials", type=int)
    k.add_argument("--seed", type=int)
    k.add_argument("--workers", type=int, default=1)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_corroborate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, UsageError, ModelError, ScenarioError, SimulationError, TraceError,
            BindingError, CampaignError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
