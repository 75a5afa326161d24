"""Core vocabulary: atoms, literals, conditions, schemas, states and transitions.

Terms are plain strings.  A term starting with an uppercase letter is a
variable; anything else is a constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

NORMAL = "normal"
SEMI_VIRTUAL = "semi_virtual"
FULL_VIRTUAL = "full_virtual"
KINDS = (NORMAL, SEMI_VIRTUAL, FULL_VIRTUAL)
VIRTUAL_PREFIXES = ("full_e_", "full_d_", "semi_e_", "semi_d_")


def is_virtual_name(name: str) -> bool:
    return name.startswith(VIRTUAL_PREFIXES)


class DomainError(Exception):
    """Raised for references to undeclared predicates or malformed model objects."""


class ConfigError(ValueError):
    """Invalid cost bound, step bound or exclusion."""


class InapplicableActionError(Exception):
    """Raised when an action is applied in a state violating its preconditions."""

    def __init__(self, action: "GroundAction", condition: "Condition"):
        self.action = action
        self.condition = condition
        super().__init__(f"{action.label} is not applicable: {condition} does not hold")


class InconsistentEffectsError(Exception):
    """Raised when one transition would add a literal and its complement."""


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid span {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def is_variable(term: str) -> bool:
    return term[:1].isupper()


@dataclass(frozen=True, order=True)
class Atom:
    name: str
    args: tuple[str, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.name:
            raise DomainError("atom name must be nonempty")
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def variables(self) -> list[str]:
        return [a for a in self.args if is_variable(a)]

    def substitute(self, binding: Mapping[str, str]) -> Atom:
        return Atom(self.name, tuple(binding.get(a, a) for a in self.args), self.span)

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(self.args)})"


@dataclass(frozen=True, order=True)
class Literal:
    atom: Atom
    negated: bool = False

    def substitute(self, binding: Mapping[str, str]) -> Literal:
        return Literal(self.atom.substitute(binding), self.negated)

    @property
    def is_ground(self) -> bool:
        return self.atom.is_ground

    def __str__(self) -> str:
        return f"-{self.atom}" if self.negated else str(self.atom)


def complement(lit: Literal) -> Literal:
    return Literal(lit.atom, not lit.negated)


@dataclass(frozen=True, order=True)
class Condition:
    literal: Literal
    default_negated: bool = False

    def __post_init__(self):
        if self.default_negated and self.literal.negated:
            raise DomainError(f"'not -{self.literal.atom}' combines both negations")

    @property
    def atom(self) -> Atom:
        return self.literal.atom

    def substitute(self, binding: Mapping[str, str]) -> Condition:
        return Condition(self.literal.substitute(binding), self.default_negated)

    def __str__(self) -> str:
        return f"not {self.literal}" if self.default_negated else str(self.literal)


@dataclass(frozen=True)
class Or:
    """Disjunction inside a precondition; each option is a conjunction."""

    options: tuple[tuple["Conjunct", ...], ...]

    def __str__(self) -> str:
        return "(" + " | ".join(format_conjunction(o) for o in self.options) + ")"


Conjunct = Union[Condition, Or]


def format_conjunction(parts: Sequence[Conjunct]) -> str:
    return " & ".join(str(p) for p in parts)


def dnf(parts: Sequence[Conjunct]) -> list[tuple[Condition, ...]]:
    """Expand a conjunction with nested disjunctions into its DNF cases."""
    cases: list[tuple[Condition, ...]] = [()]
    for part in parts:
        if isinstance(part, Condition):
            cases = [c + (part,) for c in cases]
        else:
            expanded = [sub for option in part.options for sub in dnf(option)]
            cases = [c + sub for c in cases for sub in expanded]
    out: list[tuple[Condition, ...]] = []
    for case in cases:
        if case not in out:
            out.append(case)
    return out


def conjunct_atoms(parts: Sequence[Conjunct]) -> Iterator[Atom]:
    for part in parts:
        if isinstance(part, Condition):
            yield part.atom
        else:
            for option in part.options:
                yield from conjunct_atoms(option)


@dataclass(frozen=True)
class StaticPredicate:
    name: str
    params: tuple[str, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def head(self) -> Atom:
        return Atom(self.name, self.params)


@dataclass(frozen=True)
class DynamicPredicate:
    """A state template; ``requirements`` is in DNF, one tuple of static atoms per case."""

    head: Atom
    requirements: tuple[tuple[Atom, ...], ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def name(self) -> str:
        return self.head.name

    @property
    def arity(self) -> int:
        return self.head.arity


@dataclass(frozen=True)
class Effect:
    """An effect literal, guarded by ``conditions`` when the effect is conditional."""

    literal: Literal
    conditions: tuple[Condition, ...] = ()

    @property
    def is_conditional(self) -> bool:
        return bool(self.conditions)

    def substitute(self, binding: Mapping[str, str]) -> Effect:
        return Effect(
            self.literal.substitute(binding),
            tuple(c.substitute(binding) for c in self.conditions),
        )

    def __str__(self) -> str:
        if not self.conditions:
            return str(self.literal)
        return f"({self.literal} <- {format_conjunction(self.conditions)})"


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[str, ...]
    preconditions: tuple[Conjunct, ...]
    effects: tuple[Effect, ...]
    cost: int = 1
    kind: str = NORMAL
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def head(self) -> Atom:
        return Atom(self.name, self.params)

    def precondition_cases(self) -> list[tuple[Condition, ...]]:
        return dnf(self.preconditions)

    def __str__(self) -> str:
        return str(self.head)


@dataclass(frozen=True)
class Domain:
    static: tuple[StaticPredicate, ...] = ()
    dynamic: tuple[DynamicPredicate, ...] = ()
    actions: tuple[ActionSchema, ...] = ()

    def static_names(self) -> dict[str, int]:
        return {p.name: p.arity for p in self.static}

    def dynamic_names(self) -> dict[str, int]:
        return {p.name: p.arity for p in self.dynamic}

    def is_static(self, name: str) -> bool:
        if name in self.static_names():
            return True
        if name in self.dynamic_names():
            return False
        raise DomainError(f"unknown predicate {name!r}")

    def dynamic_predicate(self, name: str) -> DynamicPredicate:
        for p in self.dynamic:
            if p.name == name:
                return p
        raise DomainError(f"unknown dynamic predicate {name!r}")

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise DomainError(f"unknown action {name!r}")

    @property
    def normal_actions(self) -> tuple[ActionSchema, ...]:
        """Schemas written by the domain author, excluding virtual-action overrides."""
        return tuple(a for a in self.actions if not is_virtual_name(a.name))

    @property
    def virtual_overrides(self) -> tuple[ActionSchema, ...]:
        return tuple(a for a in self.actions if is_virtual_name(a.name))

    def without_actions(self, *names: str) -> Domain:
        return Domain(self.static, self.dynamic, tuple(a for a in self.actions if a.name not in names))


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    preconditions: tuple[Condition, ...]
    effects: tuple[Effect, ...]
    cost: int = 1
    kind: str = NORMAL

    def __post_init__(self):
        if self.cost <= 0:
            raise DomainError(f"{self.label}: cost must be positive")
        if self.kind not in KINDS:
            raise DomainError(f"unknown action kind {self.kind!r}")

    @property
    def label(self) -> str:
        return str(Atom(self.name, self.args))

    @property
    def is_virtual(self) -> bool:
        return self.kind != NORMAL

    def __str__(self) -> str:
        return self.label


class State:
    """An immutable, consistent set of ground dynamic literals."""

    __slots__ = ("_literals", "_hash")

    def __init__(self, literals: Iterable[Literal] = ()):
        lits = frozenset(literals)
        for lit in lits:
            if not lit.is_ground:
                raise DomainError(f"state literal {lit} is not ground")
            if complement(lit) in lits:
                raise DomainError(f"inconsistent state: contains {lit.atom} and -{lit.atom}")
        self._literals = lits
        self._hash = hash(lits)

    @property
    def literals(self) -> frozenset[Literal]:
        return self._literals

    def __contains__(self, lit: object) -> bool:
        return lit in self._literals

    def __iter__(self) -> Iterator[Literal]:
        return iter(sorted(self._literals))

    def __len__(self) -> int:
        return len(self._literals)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, State) and self._literals == other._literals

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return "State({" + ", ".join(str(l) for l in self) + "})"


@dataclass(frozen=True)
class Problem:
    static_facts: frozenset[Atom]
    init: State
    goal: tuple[Literal, ...]
    exclusions: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.goal:
            raise DomainError("goal must be nonempty")


def holds(state: State, facts: Iterable[Atom] | frozenset[Atom], cond: Condition, domain: Domain) -> bool:
    """Evaluate a ground condition: static atoms against facts, dynamic literals against the state."""
    atom = cond.atom
    if not atom.is_ground:
        raise DomainError(f"condition {cond} is not ground")
    if domain.is_static(atom.name):
        if cond.literal.negated:
            raise DomainError(f"static atom {atom} cannot be classically negated")
        present = atom in facts
    else:
        present = cond.literal in state
    return not present if cond.default_negated else present


def _dynamic_holds(state: State, cond: Condition) -> bool:
    present = cond.literal in state
    return not present if cond.default_negated else present


def triggered_effects(state: State, action: GroundAction) -> list[Literal]:
    """Effect literals that fire for ``action`` in ``state`` (conditions read the pre-state)."""
    out: list[Literal] = []
    for eff in action.effects:
        if all(_dynamic_holds(state, c) for c in eff.conditions):
            if eff.literal not in out:
                out.append(eff.literal)
    return out


def apply(state: State, action: GroundAction) -> State:
    for cond in action.preconditions:
        if not _dynamic_holds(state, cond):
            raise InapplicableActionError(action, cond)
    added = triggered_effects(state, action)
    removed = {complement(l) for l in added}
    clash = removed.intersection(added)
    if clash:
        lit = min(clash)
        raise InconsistentEffectsError(f"{action.label} adds both {lit} and {complement(lit)}")
    return State((state.literals - removed) | set(added))


def is_applicable(state: State, action: GroundAction) -> bool:
    return all(_dynamic_holds(state, c) for c in action.preconditions)


def satisfies_goal(state: State, goal: Iterable[Literal]) -> bool:
    return all(g in state for g in goal)
