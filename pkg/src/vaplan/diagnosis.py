"""Progressive failure diagnosis built on virtual actions.

Stage 0 plans with normal actions only.  Stage 1 adds full virtual actions:
a plan there means the robot lacks a capability.  Stage 2 regresses through
semi-virtual actions, building a goal list until the planner gives up, a full
virtual step shows up, or a goal repeats (a layout deadlock ring).  Stage 3
inspects the static preconditions of the actions related to the last goal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from vaplan.grounder import FactIndex, bindings_for_case, ground_schema, match
from vaplan.model import (
    FULL_VIRTUAL,
    SEMI_VIRTUAL,
    ActionSchema,
    Atom,
    Condition,
    ConfigError,
    Domain,
    GroundAction,
    Literal,
    Problem,
    complement,
    is_variable,
)
from vaplan.planner import DEFAULT_MAX_NORMAL_COST, DEFAULT_MAX_STEPS, Plan, plan
from vaplan.virtual import VirtualActionSet, assign_costs, generate_virtual_actions, resolve, unify

Goal = tuple[Literal, ...]


@dataclass(frozen=True)
class DiagnosisConfig:
    max_normal_cost: int = DEFAULT_MAX_NORMAL_COST
    max_steps: int = DEFAULT_MAX_STEPS
    exclusions: frozenset[str] = frozenset()
    static_check_depth: int = 1

    def __post_init__(self):
        object.__setattr__(self, "exclusions", frozenset(self.exclusions))
        for name in ("max_normal_cost", "max_steps", "static_check_depth"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class GoalList:
    goals: tuple[Goal, ...]

    def __post_init__(self):
        if not self.goals:
            raise ValueError("a goal list starts with the original goal")

    def __iter__(self) -> Iterator[Goal]:
        return iter(self.goals)

    def __len__(self) -> int:
        return len(self.goals)

    def __getitem__(self, i: int) -> Goal:
        return self.goals[i]

    def __contains__(self, g: object) -> bool:
        return g in self.goals

    @property
    def last(self) -> Goal:
        return self.goals[-1]

    def appended(self, g: Goal) -> GoalList:
        return GoalList(self.goals + (g,))


@dataclass(frozen=True)
class MissingCapability:
    plan: Plan
    missing: tuple[Literal, ...]
    kind: str = field(default="missing_capability", init=False)


@dataclass(frozen=True)
class LayoutRing:
    goal_list: GoalList
    ring: tuple[Goal, ...]
    kind: str = field(default="layout_ring", init=False)

    @property
    def unreachable(self) -> tuple[str, ...]:
        """Constants shared by every literal of the ring (the stuck objects)."""
        sets = [set(l.atom.args) for g in self.ring for l in g]
        common = set.intersection(*sets) if sets else set()
        return tuple(sorted(common))


@dataclass(frozen=True)
class MixedMissing:
    plan: Plan
    missing: tuple[Literal, ...]
    goal_list: GoalList
    kind: str = field(default="mixed_missing", init=False)


@dataclass(frozen=True)
class ChainEntry:
    """A dynamic precondition, an action able to achieve it, and that action's static checks."""

    condition: Condition
    action: Atom
    static: tuple[Atom, ...]
    unmet: tuple[Atom, ...]
    depth: int = 1


@dataclass(frozen=True)
class StaticUnmet:
    """Unsatisfiable static preconditions behind a goal.

    ``unmet`` lists every unmet atom found, either in the goal-related
    actions themselves (then ``chain`` is empty) or in the actions achieving
    their dynamic preconditions (one ``chain`` row per such action).
    """

    goal: Literal
    action: Atom | None
    binding: tuple[tuple[str, tuple[str, ...]], ...] = ()
    unmet: tuple[Atom, ...] = ()
    chain: tuple[ChainEntry, ...] = ()
    note: str = ""
    # joint values of the variables listed in ``binding``, in the same order
    assignments: tuple[tuple[str, ...], ...] = ()
    kind: str = field(default="static_unmet", init=False)

    @property
    def conclusive(self) -> bool:
        return bool(self.unmet)

    @property
    def candidates(self) -> dict[str, tuple[str, ...]]:
        return dict(self.binding)


Explanation = MissingCapability | LayoutRing | MixedMissing | StaticUnmet


@dataclass(frozen=True)
class NormalPlan:
    plan: Plan


@dataclass(frozen=True)
class Diagnosed:
    explanation: Explanation


@dataclass(frozen=True)
class Undiagnosed:
    goal_list: GoalList
    report: StaticUnmet | None = None


Outcome = NormalPlan | Diagnosed | Undiagnosed


def detect_ring(lg: GoalList | Sequence[Goal], g: Goal | Literal) -> tuple[Goal, ...] | None:
    """The sub-list from the first occurrence of ``g`` through ``g`` itself, if ``g`` repeats."""
    g = _as_goal(g)
    goals = tuple(lg)
    for i, prior in enumerate(goals):
        if prior == g:
            return goals[i:] + (g,)
    return None


def first_semi_virtual(p: Plan) -> GroundAction | None:
    for step in p.steps:
        if step.kind == SEMI_VIRTUAL:
            return step
    return None


def _as_goal(g: Goal | Literal) -> Goal:
    return (g,) if isinstance(g, Literal) else tuple(g)


class _Grounded:
    """Ground normal and virtual actions shared by the stages of one run."""

    def __init__(self, d: Domain, p: Problem, cfg: DiagnosisConfig, virtuals: VirtualActionSet | None = None):
        self.domain, self.problem, self.cfg = d, p, cfg
        exclusions = cfg.exclusions | p.exclusions
        self.virtuals = virtuals if virtuals is not None else generate_virtual_actions(d, d.normal_actions, exclusions)
        self.costs = assign_costs(self.virtuals, cfg.max_normal_cost, cfg.max_steps, d.normal_actions)
        index = FactIndex(d, p.static_facts)
        self.normal = [g for s in d.normal_actions for g in ground_schema(index, s)]
        self.full = [g for s in self.virtuals.full for g in ground_schema(index, s, self.costs[s.name])]
        self.semi = [g for s in self.virtuals.semi for g in ground_schema(index, s, self.costs[s.name])]

    def search(self, goal: Sequence[Literal], actions: Sequence[GroundAction]):
        return plan(self.problem.init, self.problem.static_facts, goal, actions, self.cfg.max_steps)


def progressive_diagnose(d: Domain, p: Problem, cfg: DiagnosisConfig | None = None) -> Outcome:
    cfg = cfg or DiagnosisConfig()
    ctx = _Grounded(d, p, cfg)
    result = ctx.search(p.goal, ctx.normal)
    if isinstance(result, Plan):
        return NormalPlan(result)

    if ctx.full:
        result = ctx.search(p.goal, ctx.normal + ctx.full)
        if isinstance(result, Plan):
            missing = tuple(s.effects[0].literal for s in result.steps if s.kind == FULL_VIRTUAL)
            return Diagnosed(MissingCapability(result, missing))

    stage2 = _stage2(ctx)
    if not isinstance(stage2, GoalList):
        return Diagnosed(stage2)

    reports = [stage3_static(lit, d, p, cfg) for lit in stage2.last]
    for report in reports:
        if report.conclusive:
            return Diagnosed(report)
    return Undiagnosed(stage2, reports[0] if reports else None)


def stage2_loop(
    d: Domain,
    p: Problem,
    cfg: DiagnosisConfig | None = None,
    virtuals: VirtualActionSet | None = None,
) -> Explanation | GoalList:
    """Regress through semi-virtual actions; return an explanation or the final goal list."""
    return _stage2(_Grounded(d, p, cfg or DiagnosisConfig(), virtuals))


def _stage2(ctx: _Grounded) -> Explanation | GoalList:
    lg = GoalList((tuple(ctx.problem.goal),))
    virtual = ctx.full + ctx.semi
    while True:
        goal = lg.last
        disabled = set(goal)
        enabled = [a for a in virtual if a.effects[0].literal not in disabled]
        result = ctx.search(goal, ctx.normal + enabled)
        if not isinstance(result, Plan):
            return lg
        full_steps = [s for s in result.steps if s.kind == FULL_VIRTUAL]
        if full_steps:
            missing = tuple(dict.fromkeys(s.effects[0].literal for s in full_steps))
            return MixedMissing(result, missing, lg)
        step = first_semi_virtual(result)
        if step is None:
            # the sub-goal is reachable with normal actions alone; let stage 3 look at it
            return lg
        new_goal = (step.effects[0].literal,)
        ring = detect_ring(lg, new_goal)
        lg = lg.appended(new_goal)
        if ring is not None:
            return LayoutRing(lg, ring)


def _achieving_literal(cond: Condition) -> Literal:
    return complement(cond.literal) if cond.default_negated else cond.literal


def _static_items(index: FactIndex, case: Sequence[Condition]) -> list[tuple[Atom, list]]:
    return [
        (c.atom, index.candidates(c.atom.name))
        for c in case
        if index.is_static(c.atom.name) and not c.default_negated
    ]


def _satisfiable(index: FactIndex, atoms: Sequence[Atom], binding: Mapping[str, str]) -> bool:
    items = [(a, index.candidates(a.name)) for a in atoms]
    return next(match(items, binding), None) is not None


def _unmet_atoms(index: FactIndex, atoms: Sequence[Atom], binding: Mapping[str, str]) -> list[Atom]:
    """Atoms with no matching fact on their own; the whole conjunction if only jointly unsatisfiable."""
    alone = [a.substitute(binding) for a in atoms if not _satisfiable(index, [a], binding)]
    return alone or [a.substitute(binding) for a in atoms]


def _effect_unifiers(target: Literal, schema: ActionSchema) -> Iterator[dict[str, str]]:
    for eff in schema.effects:
        if eff.literal.negated != target.negated:
            continue
        sub = unify(target.atom, eff.literal.atom)
        if sub is not None:
            yield sub


def _fresh(base: str, used: set[str]) -> str:
    stem = re.sub(r"\d+$", "", base) or base
    n = 0
    while f"{stem}{n}" in used:
        n += 1
    used.add(f"{stem}{n}")
    return f"{stem}{n}"


def stage3_static(goal: Literal, d: Domain, p: Problem, cfg: DiagnosisConfig | None = None) -> StaticUnmet:
    """Check the static preconditions behind ``goal``, one level of related actions per depth."""
    cfg = cfg or DiagnosisConfig()
    index = FactIndex(d, p.static_facts)
    virtuals = generate_virtual_actions(d, d.normal_actions, cfg.exclusions | p.exclusions)

    related: list[tuple[ActionSchema, dict[str, str]]] = []
    for schema in d.normal_actions:
        for sub in _effect_unifiers(goal, schema):
            fixed = {v: resolve(sub, "R", v) for v in schema.params}
            related.append((schema, {k: v for k, v in fixed.items() if ":" not in v}))
    if not related:
        return StaticUnmet(goal, None, note=f"no normal action has the effect {goal}")

    # part (a): static preconditions of the goal-related actions
    blocked: list[tuple[ActionSchema, dict[str, str], list[Atom]]] = []
    open_: list[tuple[ActionSchema, dict[str, str], list[tuple[Condition, ...]]]] = []
    for schema, fixed in related:
        cases_ok, unmet = [], []
        for case in schema.precondition_cases():
            statics = [a for a, _ in _static_items(index, case)]
            if _satisfiable(index, statics, fixed):
                cases_ok.append(case)
            else:
                unmet.extend(u for u in _unmet_atoms(index, statics, fixed) if u not in unmet)
        if cases_ok:
            open_.append((schema, fixed, cases_ok))
        else:
            blocked.append((schema, fixed, unmet))

    if not open_:
        schema, fixed, _ = blocked[0]
        unmet = tuple(dict.fromkeys(u for _, _, us in blocked for u in us))
        return StaticUnmet(goal, schema.head.substitute(fixed), (), unmet)

    chain: list[ChainEntry] = []
    candidates: tuple = ()
    assignments: tuple = ()
    for n, (schema, fixed, cases) in enumerate(open_):
        bindings = [b for case in cases for b in bindings_for_case(index, schema, case, fixed)]
        if n == 0:
            free = sorted(v for v in schema.params if v not in fixed)
            candidates = tuple((v, tuple(sorted({b[v] for b in bindings if v in b}))) for v in free)
            assignments = tuple(sorted({tuple(b.get(v, v) for v in free) for b in bindings}))
        display = {v: fixed.get(v, v) for v in schema.params}
        chain.extend(_examine(index, d, virtuals, schema, cases, bindings, display, p, 1, cfg.static_check_depth))
    schema, fixed, _ = open_[0]
    unmet = tuple(sorted({a for entry in chain for a in entry.unmet}))
    return StaticUnmet(goal, schema.head.substitute(fixed), candidates, unmet, tuple(chain), "", assignments)


def _examine(
    index: FactIndex,
    d: Domain,
    virtuals: VirtualActionSet,
    schema: ActionSchema,
    cases: Sequence[tuple[Condition, ...]],
    bindings: Sequence[Mapping[str, str]],
    display: Mapping[str, str],
    p: Problem,
    level: int,
    max_level: int,
) -> list[ChainEntry]:
    entries: list[ChainEntry] = []
    achievers = list(d.normal_actions) + list(virtuals.all)
    seen_conds: set[Condition] = set()
    for case in cases:
        for cond in case:
            if index.is_static(cond.atom.name) or cond in seen_conds:
                continue
            seen_conds.add(cond)
            if any(_holds_initially(p, cond.substitute(b)) for b in bindings):
                continue
            target = _achieving_literal(cond)
            for other in achievers:
                for sub in _effect_unifiers(target, other):
                    entries.extend(_chain_entry(
                        index, d, virtuals, cond, other, sub, bindings, display, p, level, max_level,
                    ))
    return entries


def _holds_initially(p: Problem, cond: Condition) -> bool:
    present = cond.literal in p.init
    return not present if cond.default_negated else present


def _chain_entry(
    index: FactIndex,
    d: Domain,
    virtuals: VirtualActionSet,
    cond: Condition,
    other: ActionSchema,
    sub: Mapping[str, str],
    bindings: Sequence[Mapping[str, str]],
    display: Mapping[str, str],
    p: Problem,
    level: int,
    max_level: int,
) -> list[ChainEntry]:
    # name the achiever's variables after the parent's where unified, fresh otherwise
    links = _links(sub, other.params)
    used = {t for t in display.values() if is_variable(t)}
    names: dict[str, str] = {}
    fresh_for: dict[str, str] = {}
    for v in other.params:
        kind, t = links[v]
        if kind == "L":
            names[v] = display.get(t, t)
        elif kind == "R":
            if t not in fresh_for:
                fresh_for[t] = _fresh(v, used)
            names[v] = fresh_for[t]
        else:
            names[v] = t

    def fixed_for(b: Mapping[str, str]) -> dict[str, str]:
        out = {}
        for v in other.params:
            kind, t = links[v]
            if kind == "C":
                out[v] = t
            elif kind == "L" and t in b:
                out[v] = b[t]
        return out

    effect_vars = {names[v] for v in other.params if links[v][0] != "R"}
    entries: list[ChainEntry] = []
    child_cases: list[tuple[Condition, ...]] = []
    statics_shown: list[Atom] = []
    unmet: list[Atom] = []
    any_case_ok = False
    for case in other.precondition_cases():
        statics = [a for a, _ in _static_items(index, case)]
        for a in statics:
            shown = a.substitute(names)
            relevant = not shown.variables() or effect_vars.intersection(shown.variables())
            if relevant and shown not in statics_shown:
                statics_shown.append(shown)
        case_ok = False
        case_unmet: list[Atom] = []
        for b in bindings:
            fx = fixed_for(b)
            if _satisfiable(index, statics, fx):
                case_ok = True
                break
            case_unmet.extend(u for u in _unmet_atoms(index, statics, fx) if u not in case_unmet)
        if case_ok:
            any_case_ok = True
            child_cases.append(case)
        else:
            unmet.extend(u for u in case_unmet if u not in unmet)

    entries.append(ChainEntry(
        cond.substitute(display),
        other.head.substitute(names),
        tuple(statics_shown),
        () if any_case_ok else tuple(sorted(unmet)),
        level,
    ))
    if any_case_ok and level < max_level:
        child_bindings: list[dict[str, str]] = []
        for b in bindings:
            for case in child_cases:
                for cb in bindings_for_case(index, other, case, fixed_for(b)):
                    if cb not in child_bindings:
                        child_bindings.append(cb)
        entries.extend(_examine(
            index, d, virtuals, other, child_cases, child_bindings, names, p, level + 1, max_level,
        ))
    return entries


def _links(sub: Mapping[str, str], params: Sequence[str]) -> dict[str, tuple[str, str]]:
    """Classify each achiever variable as tied to a parent variable ("L"), a constant ("C") or free ("R")."""
    reps: dict[str, str] = {}
    for key in sub:
        if key.startswith("L:"):
            reps.setdefault(resolve(sub, "L", key[2:]), key[2:])
    out = {}
    for v in params:
        rep = resolve(sub, "R", v)
        if ":" not in rep:
            out[v] = ("C", rep)
        elif rep.startswith("L:"):
            out[v] = ("L", rep[2:])
        elif rep in reps:
            out[v] = ("L", reps[rep])
        else:
            out[v] = ("R", rep)
    return out
