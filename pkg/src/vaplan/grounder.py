"""Instantiate schemas and dynamic-predicate templates over a problem's constants.

Variables are bound by joining atoms against candidate tuples: static atoms
against the problem's facts, dynamic atoms against the tuples allowed by their
predicate's requirements (the predicate's "type").
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from vaplan.model import (
    ActionSchema,
    Atom,
    Condition,
    Domain,
    DynamicPredicate,
    Effect,
    GroundAction,
    Literal,
    Problem,
    is_variable,
)

Binding = dict[str, str]


class FactIndex:
    """Static facts grouped by predicate name, plus typed tuples for dynamic predicates."""

    def __init__(self, domain: Domain, facts: Iterable[Atom]):
        self.domain = domain
        self.facts = frozenset(facts)
        self._by_name: dict[str, list[tuple[str, ...]]] = defaultdict(list)
        for atom in sorted(self.facts):
            self._by_name[atom.name].append(atom.args)
        self._static = set(domain.static_names())
        self._typed: dict[str, list[tuple[str, ...]]] = {}

    def is_static(self, name: str) -> bool:
        return name in self._static

    def candidates(self, name: str) -> list[tuple[str, ...]]:
        if name in self._static:
            return self._by_name.get(name, [])
        if name not in self._typed:
            dp = self.domain.dynamic_predicate(name)
            rows = sorted({tuple(b.get(a, a) for a in dp.head.args) for b in requirement_groundings(dp, self.facts)})
            self._typed[name] = rows
        return self._typed[name]

    def typed(self, atom: Atom) -> bool:
        """True if a ground dynamic atom satisfies its predicate's requirements."""
        return atom.args in set(self.candidates(atom.name))


def match(atoms: Sequence[tuple[Atom, Sequence[tuple[str, ...]]]], binding: Mapping[str, str] | None = None) -> Iterator[Binding]:
    """Backtracking join: yield every extension of ``binding`` consistent with all atoms."""
    start = dict(binding or {})

    def bound_count(item: tuple[Atom, Sequence[tuple[str, ...]]], b: Mapping[str, str]) -> tuple[int, int]:
        atom, rows = item
        free = sum(1 for a in atom.args if is_variable(a) and a not in b)
        return (free, len(rows))

    def rec(remaining: list[tuple[Atom, Sequence[tuple[str, ...]]]], b: Binding) -> Iterator[Binding]:
        if not remaining:
            yield dict(b)
            return
        idx = min(range(len(remaining)), key=lambda i: bound_count(remaining[i], b))
        atom, rows = remaining[idx]
        rest = remaining[:idx] + remaining[idx + 1:]
        for row in rows:
            new = _unify_row(atom.args, row, b)
            if new is not None:
                yield from rec(rest, new)

    yield from rec(list(atoms), start)


def _unify_row(args: tuple[str, ...], row: tuple[str, ...], b: Mapping[str, str]) -> Binding | None:
    out = dict(b)
    for arg, val in zip(args, row):
        if is_variable(arg):
            cur = out.get(arg)
            if cur is None:
                out[arg] = val
            elif cur != val:
                return None
        elif arg != val:
            return None
    return out


def requirement_groundings(dp: DynamicPredicate, facts: Iterable[Atom]) -> list[Binding]:
    """Bindings of the head variables satisfying at least one requirement case."""
    by_name: dict[str, list[tuple[str, ...]]] = defaultdict(list)
    for atom in sorted(set(facts)):
        by_name[atom.name].append(atom.args)
    head_vars = list(dict.fromkeys(dp.head.variables()))
    seen: set[tuple[str, ...]] = set()
    for case in dp.requirements:
        for b in match([(a, by_name.get(a.name, [])) for a in case]):
            seen.add(tuple(b[v] for v in head_vars))
    return [dict(zip(head_vars, row)) for row in sorted(seen)]


def _typing_constraints(index: FactIndex, conds: Iterable[Condition], effects: Iterable[Effect]):
    """Join items for a precondition case: positive static atoms and every dynamic atom."""
    items = []
    for cond in conds:
        atom = cond.atom
        if index.is_static(atom.name):
            if not cond.default_negated:
                items.append((atom, index.candidates(atom.name)))
        else:
            items.append((atom, index.candidates(atom.name)))
    for eff in effects:
        if not eff.conditions:
            items.append((eff.literal.atom, index.candidates(eff.literal.atom.name)))
    return items


def bindings_for_case(
    index: FactIndex,
    schema: ActionSchema,
    case: Sequence[Condition],
    binding: Mapping[str, str] | None = None,
) -> list[Binding]:
    """All parameter bindings for one DNF case, sorted by parameter values."""
    items = _typing_constraints(index, case, schema.effects)
    out: dict[tuple[str, ...], Binding] = {}
    for b in match(items, binding):
        if not _negated_static_ok(index, case, b):
            continue
        key = tuple(b.get(p, "") for p in schema.params)
        out.setdefault(key, {p: b[p] for p in schema.params if p in b})
    return [out[k] for k in sorted(out)]


def _negated_static_ok(index: FactIndex, conds: Iterable[Condition], b: Mapping[str, str]) -> bool:
    for cond in conds:
        if cond.default_negated and index.is_static(cond.atom.name):
            if cond.atom.substitute(b) in index.facts:
                return False
    return True


def _ground_effects(index: FactIndex, effects: Iterable[Effect], b: Binding) -> tuple[Effect, ...] | None:
    out: list[Effect] = []
    for eff in effects:
        if not eff.conditions:
            out.append(eff.substitute(b))
            continue
        items = _typing_constraints(index, eff.conditions, ())
        items.append((eff.literal.atom, index.candidates(eff.literal.atom.name)))
        extensions = sorted(match(items, b), key=lambda x: sorted(x.items()))
        for ext in extensions:
            ground = eff.substitute(ext)
            if not _negated_static_ok(index, ground.conditions, {}):
                continue
            conds = tuple(c for c in ground.conditions if not index.is_static(c.atom.name))
            candidate = Effect(ground.literal, conds)
            if candidate not in out:
                out.append(candidate)
    return tuple(out)


def ground_schema(index: FactIndex, schema: ActionSchema, cost: int | None = None) -> list[GroundAction]:
    seen: set[tuple] = set()
    rows: list[tuple[tuple[str, ...], int, GroundAction]] = []
    for case_no, case in enumerate(schema.precondition_cases()):
        for b in bindings_for_case(index, schema, case):
            args = tuple(b[p] for p in schema.params)
            pre = tuple(
                dict.fromkeys(c.substitute(b) for c in case if not index.is_static(c.atom.name))
            )
            effects = _ground_effects(index, schema.effects, b)
            key = (args, pre, effects)
            if key in seen:
                continue
            seen.add(key)
            action = GroundAction(schema.name, args, pre, effects, cost or schema.cost, schema.kind)
            rows.append((args, case_no, action))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def ground_actions(
    domain: Domain,
    problem: Problem,
    schemas: Sequence[ActionSchema] | None = None,
    costs: Mapping[str, int] | None = None,
) -> list[GroundAction]:
    """Ground ``schemas`` (default: the domain's normal schemas), schema order then binding order."""
    index = FactIndex(domain, problem.static_facts)
    if schemas is None:
        schemas = domain.normal_actions
    out: list[GroundAction] = []
    for schema in schemas:
        out.extend(ground_schema(index, schema, (costs or {}).get(schema.name)))
    return out


@dataclass(frozen=True)
class Diagnostic:
    where: str  # "init" or "goal"
    literal: Literal
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


def check_init_consistency(domain: Domain, problem: Problem) -> list[Diagnostic]:
    """Report init/goal literals whose arguments satisfy none of their predicate's requirements."""
    index = FactIndex(domain, problem.static_facts)
    out: list[Diagnostic] = []
    for where, lits in (("init", list(problem.init)), ("goal", list(problem.goal))):
        for lit in lits:
            if not index.typed(lit.atom):
                dp = domain.dynamic_predicate(lit.atom.name)
                out.append(Diagnostic(where, lit, f"{lit} violates the requirements of {dp.head}"))
    return out
