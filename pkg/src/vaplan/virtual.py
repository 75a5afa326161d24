"""Generate full and semi-virtual actions from dynamic predicates and price them.

Each non-excluded dynamic predicate ``s`` with requirement case ``R`` yields an
``e_`` schema (``R & not s`` -> ``s``) and a ``d_`` schema (``R & s`` -> ``-s``).
The schema is semi-virtual when some normal action already has that effect,
otherwise it is full virtual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from vaplan.model import (
    FULL_VIRTUAL,
    SEMI_VIRTUAL,
    VIRTUAL_PREFIXES,
    ActionSchema,
    Atom,
    Condition,
    ConfigError,
    Domain,
    Effect,
    Literal,
    complement,
    is_variable,
    is_virtual_name,
)

__all__ = [
    "ConfigError",
    "VirtualActionSet",
    "VIRTUAL_PREFIXES",
    "is_virtual_name",
    "generate_virtual_actions",
    "assign_costs",
    "unify",
]


@dataclass(frozen=True)
class VirtualActionSet:
    full: tuple[ActionSchema, ...] = ()
    semi: tuple[ActionSchema, ...] = ()

    @property
    def all(self) -> tuple[ActionSchema, ...]:
        return self.full + self.semi

    def __len__(self) -> int:
        return len(self.full) + len(self.semi)


def unify(a: Atom, b: Atom, binding: Mapping[str, str] | None = None) -> dict[str, str] | None:
    """Most general unifier of two atoms whose variables live in separate namespaces.

    Variables of ``a`` are keyed ``"L:X"``, those of ``b`` ``"R:X"``; the result
    maps keys to a constant or to another key.
    """
    if a.name != b.name or a.arity != b.arity:
        return None
    sub: dict[str, str] = dict(binding or {})

    def term(side: str, t: str) -> str:
        return f"{side}:{t}" if is_variable(t) else t

    def walk(t: str) -> str:
        while t in sub:
            t = sub[t]
        return t

    for x, y in zip(a.args, b.args):
        x, y = walk(term("L", x)), walk(term("R", y))
        if x == y:
            continue
        if ":" in x:
            sub[x] = y
        elif ":" in y:
            sub[y] = x
        else:
            return None
    return sub


def resolve(sub: Mapping[str, str], side: str, var: str) -> str:
    t = f"{side}:{var}"
    while t in sub:
        t = sub[t]
    return t


def _effect_literals(schemas: Iterable[ActionSchema]) -> list[Literal]:
    return [eff.literal for s in schemas for eff in s.effects]


def achievable_by(lit: Literal, schemas: Iterable[ActionSchema]) -> bool:
    """True if ``lit`` unifies with some effect literal of the given schemas."""
    return any(
        e.negated == lit.negated and unify(lit.atom, e.atom) is not None
        for e in _effect_literals(schemas)
    )


def generate_virtual_actions(
    domain: Domain,
    schemas: Sequence[ActionSchema] | None = None,
    exclusions: Iterable[str] = (),
) -> VirtualActionSet:
    """Build the virtual schemas for every dynamic predicate not in ``exclusions``.

    ``schemas`` are the normal actions used to decide semi vs full (default:
    the domain's normal actions).  Virtual overrides declared in the domain (an
    action named e.g. ``semi_e_isHeld``) replace the generated body of the
    matching ``e_``/``d_`` schema.
    """
    excluded = set(exclusions)
    unknown = excluded - set(domain.dynamic_names())
    if unknown:
        raise ConfigError(f"cannot exclude undeclared dynamic predicate(s): {', '.join(sorted(unknown))}")
    if schemas is None:
        schemas = domain.normal_actions
    overrides = {_override_key(a.name): a for a in domain.virtual_overrides}

    full: list[ActionSchema] = []
    semi: list[ActionSchema] = []
    for dp in domain.dynamic:
        if dp.name in excluded:
            continue
        s = Literal(dp.head)
        params = tuple(dict.fromkeys(dp.head.variables()))
        for k, case in enumerate(dp.requirements, start=1):
            suffix = "" if k == 1 else f"_{k}"
            reqs = tuple(Condition(Literal(a)) for a in case)
            for direction, guard, effect in (
                ("e", Condition(s, default_negated=True), s),
                ("d", Condition(s), complement(s)),
            ):
                is_semi = achievable_by(effect, schemas)
                kind = SEMI_VIRTUAL if is_semi else FULL_VIRTUAL
                name = f"{'semi' if is_semi else 'full'}_{direction}_{dp.name}{suffix}"
                override = overrides.get(f"{direction}_{dp.name}{suffix}")
                if override is not None:
                    schema = ActionSchema(name, override.params, override.preconditions, override.effects, 1, kind)
                else:
                    schema = ActionSchema(name, params, reqs + (guard,), (Effect(effect),), 1, kind)
                (semi if is_semi else full).append(schema)
    return VirtualActionSet(tuple(full), tuple(semi))


def _override_key(name: str) -> str:
    # "semi_e_isHeld" and "full_e_isHeld" both override the e_isHeld schema
    return name.split("_", 1)[1]


def assign_costs(
    vset: VirtualActionSet,
    max_normal_cost: int,
    max_steps: int,
    normal: Iterable[ActionSchema] = (),
) -> dict[str, int]:
    """Cost table: normal schemas keep their cost, semi cost C*N, full cost C*N*N."""
    if max_normal_cost < 1 or max_steps < 1:
        raise ConfigError("C and N must be positive integers")
    table: dict[str, int] = {}
    for schema in normal:
        if schema.cost > max_normal_cost:
            raise ConfigError(
                f"action {schema.name!r} costs {schema.cost}, above the normal-action bound C={max_normal_cost}"
            )
        table[schema.name] = schema.cost
    for schema in vset.semi:
        table[schema.name] = max_normal_cost * max_steps
    for schema in vset.full:
        table[schema.name] = max_normal_cost * max_steps * max_steps
    return table
