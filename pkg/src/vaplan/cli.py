"""Command-line front end: plan, diagnose, validate and gen-virtual."""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from typing import Any, Sequence

from vaplan.diagnosis import (
    ChainEntry,
    DiagnosisConfig,
    Diagnosed,
    Explanation,
    GoalList,
    LayoutRing,
    MissingCapability,
    MixedMissing,
    NormalPlan,
    Outcome,
    StaticUnmet,
    Undiagnosed,
    progressive_diagnose,
)
from vaplan.grounder import ground_actions
from vaplan.model import ActionSchema, ConfigError, Domain, Effect, GroundAction, Problem
from vaplan.parser import ParseError, format_action, parse_atom, parse_condition, parse_domain, parse_literal, parse_problem
from vaplan.planner import DEFAULT_MAX_NORMAL_COST, DEFAULT_MAX_STEPS, Plan, plan, validate_plan
from vaplan.virtual import assign_costs, generate_virtual_actions

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSOLVABLE = 2
EXIT_INVALID = 2
EXIT_DIAGNOSED = 3
EXIT_UNDIAGNOSED = 4

ARROW = "←"


class CliError(Exception):
    pass


# JSON encoding


def action_to_json(a: GroundAction) -> dict[str, Any]:
    return {
        "label": a.label,
        "name": a.name,
        "args": list(a.args),
        "kind": a.kind,
        "cost": a.cost,
        "preconditions": [str(c) for c in a.preconditions],
        "effects": [{"literal": str(e.literal), "conditions": [str(c) for c in e.conditions]} for e in a.effects],
    }


def action_from_json(data: dict[str, Any]) -> GroundAction:
    return GroundAction(
        data["name"],
        tuple(data["args"]),
        tuple(parse_condition(c) for c in data["preconditions"]),
        tuple(
            Effect(parse_literal(e["literal"]), tuple(parse_condition(c) for c in e["conditions"]))
            for e in data["effects"]
        ),
        data["cost"],
        data["kind"],
    )


def plan_to_json(p: Plan) -> dict[str, Any]:
    return {"steps": [action_to_json(a) for a in p.steps], "total_cost": p.total_cost}


def plan_from_json(data: dict[str, Any]) -> Plan:
    return Plan(tuple(action_from_json(a) for a in data["steps"]), data["total_cost"])


def _goals_to_json(goals) -> list[list[str]]:
    return [[str(l) for l in g] for g in goals]


def _goals_from_json(data) -> tuple:
    return tuple(tuple(parse_literal(s) for s in g) for g in data)


def _chain_to_json(e: ChainEntry) -> dict[str, Any]:
    return {
        "condition": str(e.condition),
        "action": str(e.action),
        "static": [str(a) for a in e.static],
        "unmet": [str(a) for a in e.unmet],
        "depth": e.depth,
    }


def _chain_from_json(data: dict[str, Any]) -> ChainEntry:
    return ChainEntry(
        parse_condition(data["condition"]),
        parse_atom(data["action"]),
        tuple(parse_atom(a) for a in data["static"]),
        tuple(parse_atom(a) for a in data["unmet"]),
        data["depth"],
    )


def explanation_to_json(e: Explanation) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": e.kind}
    if isinstance(e, (MissingCapability, MixedMissing)):
        out["plan"] = plan_to_json(e.plan)
        out["missing"] = [str(l) for l in e.missing]
    if isinstance(e, (LayoutRing, MixedMissing)):
        out["goal_list"] = _goals_to_json(e.goal_list)
    if isinstance(e, LayoutRing):
        out["ring"] = _goals_to_json(e.ring)
        out["unreachable"] = list(e.unreachable)
    if isinstance(e, StaticUnmet):
        out["goal"] = str(e.goal)
        out["action"] = str(e.action) if e.action is not None else None
        out["binding"] = {v: list(vals) for v, vals in e.binding}
        out["unmet"] = [str(a) for a in e.unmet]
        out["chain"] = [_chain_to_json(c) for c in e.chain]
        out["note"] = e.note
        out["assignments"] = [list(a) for a in e.assignments]
        out["conclusive"] = e.conclusive
    return out


def explanation_from_json(data: dict[str, Any]) -> Explanation:
    kind = data["kind"]
    if kind == "missing_capability":
        return MissingCapability(plan_from_json(data["plan"]), tuple(parse_literal(s) for s in data["missing"]))
    if kind == "mixed_missing":
        return MixedMissing(
            plan_from_json(data["plan"]),
            tuple(parse_literal(s) for s in data["missing"]),
            GoalList(_goals_from_json(data["goal_list"])),
        )
    if kind == "layout_ring":
        return LayoutRing(GoalList(_goals_from_json(data["goal_list"])), _goals_from_json(data["ring"]))
    if kind == "static_unmet":
        return StaticUnmet(
            parse_literal(data["goal"]),
            parse_atom(data["action"]) if data["action"] is not None else None,
            tuple((v, tuple(vals)) for v, vals in data["binding"].items()),
            tuple(parse_atom(a) for a in data["unmet"]),
            tuple(_chain_from_json(c) for c in data["chain"]),
            data["note"],
            tuple(tuple(a) for a in data["assignments"]),
        )
    raise ValueError(f"unknown explanation kind {kind!r}")


def outcome_to_json(o: Outcome) -> dict[str, Any]:
    if isinstance(o, NormalPlan):
        return {"outcome": "normal_plan", "plan": plan_to_json(o.plan)}
    if isinstance(o, Diagnosed):
        out: dict[str, Any] = {"outcome": "diagnosed"}
        if isinstance(o.explanation, (MissingCapability, MixedMissing)):
            out["plan"] = plan_to_json(o.explanation.plan)
        out["explanation"] = explanation_to_json(o.explanation)
        return out
    return {
        "outcome": "undiagnosed",
        "goal_list": _goals_to_json(o.goal_list),
        "report": explanation_to_json(o.report) if o.report is not None else None,
    }


def outcome_from_json(data: dict[str, Any]) -> Outcome:
    kind = data["outcome"]
    if kind == "normal_plan":
        return NormalPlan(plan_from_json(data["plan"]))
    if kind == "diagnosed":
        return Diagnosed(explanation_from_json(data["explanation"]))
    if kind == "undiagnosed":
        report = data.get("report")
        return Undiagnosed(
            GoalList(_goals_from_json(data["goal_list"])),
            explanation_from_json(report) if report is not None else None,  # type: ignore[arg-type]
        )
    raise ValueError(f"unknown outcome {kind!r}")


# text rendering


def _goal_text(goal) -> str:
    return " & ".join(str(l) for l in goal)


def _plan_lines(p: Plan) -> list[str]:
    lines = [f"  {n}. {a.label}" for n, a in enumerate(p.steps, start=1)]
    lines.append(f"  total cost: {p.total_cost}")
    return lines


def _goal_list_lines(lg: GoalList) -> list[str]:
    return [f"  {n}. {_goal_text(g)}" for n, g in enumerate(lg, start=1)]


def _joint_lines(e: StaticUnmet) -> list[str]:
    # pairs of variables whose values are tied together, e.g. the two rooms of a door
    names = [v for v, _ in e.binding]
    multi = [i for i, (_, vals) in enumerate(e.binding) if len(vals) > 1]
    lines = []
    for a, b in itertools.combinations(multi, 2):
        pairs = sorted({(row[a], row[b]) for row in e.assignments})
        if len(pairs) < len(e.binding[a][1]) * len(e.binding[b][1]):
            shown = " or ".join(f"({x},{y})" for x, y in pairs)
            lines.append(f"  ({names[a]},{names[b]}) can be {shown}")
    return lines


def _static_unmet_lines(e: StaticUnmet) -> list[str]:
    lines = [f"goal: {e.goal}"]
    if e.action is None:
        lines.append(e.note or f"no normal action achieves {e.goal}")
        return lines
    lines.append(f"goal-related action: {e.action}")
    single = {v: vals[0] for v, vals in e.binding if len(vals) == 1}
    for v, vals in e.binding:
        lines.append(f"  {v} can be {' or '.join(vals)}" if vals else f"  {v} has no value")
    lines.extend(_joint_lines(e))
    if not e.chain:
        for atom in e.unmet:
            lines.append(f"the robot can not {e.action} because {atom} does not hold")
    if e.chain:
        lines.append("dynamic conditions and the actions achieving them:")
        for c in e.chain:
            shown = " & ".join(str(a) for a in c.static) or "none"
            status = f"unmet: {', '.join(str(a) for a in c.unmet)}" if c.unmet else "ok"
            lines.append(f"  {c.condition} <- {c.action} [static: {shown}] {status}")
    needed = e.action.substitute(single)
    for c in e.chain:
        if c.unmet:
            atoms = " and ".join(str(a) for a in c.unmet)
            lines.append(
                f"the robot can not {c.action.substitute(single)} because {atoms} does not hold,"
                f" but {needed} needs {c.condition.substitute(single)}"
            )
    if not e.conclusive:
        lines.append("every static condition checked can be met")
    return lines


def render_explanation(e: Explanation, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(explanation_to_json(e), indent=2, sort_keys=True)
    lines: list[str] = []
    if isinstance(e, MissingCapability):
        lines.append("plan using virtual actions:")
        lines += _plan_lines(e.plan)
        lines += [f"the robot has no action achieving {l}" for l in e.missing]
    elif isinstance(e, MixedMissing):
        lines.append("goal list:")
        lines += _goal_list_lines(e.goal_list)
        lines.append(f"plan for {_goal_text(e.goal_list.last)} using virtual actions:")
        lines += _plan_lines(e.plan)
        lines += [f"the robot has no action achieving {l}" for l in e.missing]
    elif isinstance(e, LayoutRing):
        lines.append("goal list:")
        lines += _goal_list_lines(e.goal_list)
        lines.append(f"deadlock ring: {f' {ARROW} '.join(_goal_text(g) for g in e.ring)}")
        lines += [f"{c} is unreachable" for c in e.unreachable]
    else:
        lines += _static_unmet_lines(e)
    return "\n".join(lines)


def render_outcome(o: Outcome, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(outcome_to_json(o), indent=2, sort_keys=True)
    if isinstance(o, NormalPlan):
        return "\n".join(["outcome: solvable with normal actions", "plan:"] + _plan_lines(o.plan))
    if isinstance(o, Diagnosed):
        title = o.explanation.kind.replace("_", " ")
        return f"outcome: {title}\n" + render_explanation(o.explanation)
    lines = ["outcome: undiagnosed", "goal list:"] + _goal_list_lines(o.goal_list)
    if o.report is not None:
        lines += _static_unmet_lines(o.report)
    return "\n".join(lines)


# commands


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load(args) -> tuple[Domain, Problem]:
    domain_text = _read(args.domain)
    problem_text = _read(args.problem)
    try:
        d = parse_domain(domain_text)
    except ParseError as exc:
        raise CliError(f"{args.domain}:{exc.render()}") from exc
    try:
        p = parse_problem(problem_text, d)
    except ParseError as exc:
        raise CliError(f"{args.problem}:{exc.render()}") from exc
    return d, p


def _config(args, p: Problem) -> DiagnosisConfig:
    return DiagnosisConfig(
        max_normal_cost=args.max_normal_cost,
        max_steps=args.max_steps,
        exclusions=frozenset(args.exclude_virtual or ()) | p.exclusions,
        static_check_depth=args.static_depth,
    )


def cmd_plan(args, out) -> int:
    d, p = _load(args)
    cfg = _config(args, p)
    assign_costs(generate_virtual_actions(d, exclusions=cfg.exclusions), cfg.max_normal_cost, cfg.max_steps, d.normal_actions)
    result = plan(p.init, p.static_facts, p.goal, ground_actions(d, p), cfg.max_steps)
    if isinstance(result, Plan):
        if args.format == "json":
            print(json.dumps({"outcome": "plan", "plan": plan_to_json(result)}, indent=2, sort_keys=True), file=out)
        else:
            for step in result.steps:
                print(step.label, file=out)
            print(f"cost: {result.total_cost}", file=out)
        return EXIT_OK
    if args.format == "json":
        print(json.dumps({"outcome": "unsolvable", "reason": result.reason}, indent=2, sort_keys=True), file=out)
    else:
        print(f"unsolvable: {result.reason}", file=out)
    return EXIT_UNSOLVABLE


def cmd_diagnose(args, out) -> int:
    d, p = _load(args)
    outcome = progressive_diagnose(d, p, _config(args, p))
    print(render_outcome(outcome, args.format), file=out)
    if isinstance(outcome, NormalPlan):
        return EXIT_OK
    if isinstance(outcome, Diagnosed):
        return EXIT_DIAGNOSED
    return EXIT_UNDIAGNOSED


def cmd_validate(args, out) -> int:
    d, p = _load(args)
    cfg = _config(args, p)
    vset = generate_virtual_actions(d, exclusions=cfg.exclusions)
    costs = assign_costs(vset, cfg.max_normal_cost, cfg.max_steps, d.normal_actions)
    known = {a.label: a for a in ground_actions(d, p, d.normal_actions + vset.all, costs)}
    steps = []
    for n, line in enumerate(_read(args.plan).splitlines(), start=1):
        label = line.split("%", 1)[0].strip().rstrip(";.")
        if not label:
            continue
        label = label.replace(" ", "")
        if label not in known:
            return _report_validation(args, out, False, f"line {n}: unknown ground action {label}")
        steps.append(known[label])
    report = validate_plan(p.init, p.static_facts, steps, p.goal)
    return _report_validation(args, out, report.valid, report.message, sum(a.cost for a in steps))


def _report_validation(args, out, valid: bool, message: str, cost: int | None = None) -> int:
    if args.format == "json":
        data = {"valid": valid, "message": message}
        if valid:
            data["total_cost"] = cost
        print(json.dumps(data, indent=2, sort_keys=True), file=out)
    else:
        print(f"valid, cost {cost}" if valid else f"invalid: {message}", file=out)
    return EXIT_OK if valid else EXIT_INVALID


def _schema_json(s: ActionSchema, cost: int) -> dict[str, Any]:
    return {
        "name": s.name,
        "params": list(s.params),
        "kind": s.kind,
        "cost": cost,
        "preconditions": [str(c) for c in s.preconditions],
        "effects": [str(e) for e in s.effects],
    }


def cmd_gen_virtual(args, out) -> int:
    d = _load(args)[0] if args.problem else _load_domain(args.domain)
    vset = generate_virtual_actions(d, exclusions=args.exclude_virtual or ())
    costs = assign_costs(vset, args.max_normal_cost, args.max_steps, d.normal_actions)
    if args.format == "json":
        data = {
            "full": [_schema_json(s, costs[s.name]) for s in vset.full],
            "semi": [_schema_json(s, costs[s.name]) for s in vset.semi],
        }
        print(json.dumps(data, indent=2, sort_keys=True), file=out)
    else:
        print(f"% {len(vset.full)} full virtual, {len(vset.semi)} semi-virtual", file=out)
        for s in vset.all:
            print(f"% {s.kind.replace('_', ' ')}, cost {costs[s.name]}", file=out)
            print(format_action(s), file=out)
    return EXIT_OK


def _load_domain(path: str) -> Domain:
    try:
        return parse_domain(_read(path))
    except ParseError as exc:
        raise CliError(f"{path}:{exc.render()}") from exc


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} is not a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    default_format = os.environ.get("VAPLAN_FORMAT", "text")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", required=True, help="domain file (.vad)")
    common.add_argument("--format", choices=("text", "json"), default=default_format,
                        help="output format (default: $VAPLAN_FORMAT or text)")
    common.add_argument("--max-steps", type=_positive, default=DEFAULT_MAX_STEPS, help="plan length bound N")
    common.add_argument("--max-normal-cost", type=_positive, default=DEFAULT_MAX_NORMAL_COST,
                        help="upper bound C on normal action costs")
    common.add_argument("--exclude-virtual", action="append", metavar="PREDICATE",
                        help="dynamic predicate without virtual actions (repeatable)")
    common.add_argument("--static-depth", type=_positive, default=1, help="levels of related actions checked")

    parser = argparse.ArgumentParser(prog="vaplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
        ("plan", cmd_plan, "plan with normal actions only"),
        ("diagnose", cmd_diagnose, "plan, and explain the failure if there is no plan"),
        ("validate", cmd_validate, "check a plan file step by step"),
        ("gen-virtual", cmd_gen_virtual, "print the generated virtual actions"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--problem", required=name != "gen-virtual", help="problem file (.vap)")
        if name == "validate":
            p.add_argument("--plan", required=True, help="plan file, one step label per line")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    if hasattr(out, "reconfigure"):
        out.reconfigure(encoding="utf-8")
    parser = build_parser()
    if os.environ.get("VAPLAN_FORMAT", "text") not in ("text", "json"):
        print("vaplan: error: VAPLAN_FORMAT must be text or json", file=sys.stderr)
        return EXIT_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except (CliError, ConfigError) as exc:
        print(f"vaplan: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
