"""Recursive-descent parser and printer for domain (``.vad``) and problem (``.vap``) files.

Surface syntax::

    % comment to end of line
    static  { room(R). connected(D,R1,R2). }
    dynamic { robAt(A) : room(A). isNear(B) : human(B) | location(B). }
    action {
      name: moveTo(R2,R1,D).
      precondition: robAt(R1) & connected(D,R1,R2) & doorStatus(D,opened).
      effect: robAt(R2) & -robAt(R1).
      cost: 1.
    }

``-p`` is classical negation, ``not p`` default negation, ``(e <- c & d)`` a
conditional effect.  Problems use ``facts``, ``init``, ``goal`` and the
optional ``exclude`` block (dynamic predicate names without virtual actions).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, NoReturn

from vaplan.model import (
    FULL_VIRTUAL,
    NORMAL,
    SEMI_VIRTUAL,
    ActionSchema,
    Atom,
    Condition,
    Conjunct,
    Domain,
    DomainError,
    DynamicPredicate,
    Effect,
    Literal,
    Or,
    Problem,
    SourceSpan,
    State,
    StaticPredicate,
    complement,
    conjunct_atoms,
    dnf,
    format_conjunction,
    is_variable,
)

MAX_NESTING = 64


class ParseError(Exception):
    def __init__(self, span: SourceSpan, message: str, expected: Iterable[str] = ()):
        self.span = span
        self.message = message or "parse error"
        self.expected = list(expected)
        super().__init__(self.render())

    def render(self) -> str:
        text = f"{self.span.line}:{self.span.column}: {self.message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        return text


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "number", "eof" or the punctuation itself
    value: str
    span: SourceSpan


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)|(?P<nl>\n)|(?P<comment>%[^\n]*)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<number>[0-9]+)"
    r"|(?P<punct><-|[{}(),.:&|-])"
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(SourceSpan(line, col, 1), f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident" or kind == "number":
            tokens.append(Token(kind, value, SourceSpan(line, col, len(value))))
        elif kind == "punct":
            tokens.append(Token(value, value, SourceSpan(line, col, len(value))))
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(line, pos - line_start + 1, 0)))
    return tokens


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.value)


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, expected: Iterable[str] = (), tok: Token | None = None) -> NoReturn:
        raise ParseError((tok or self.tok).span, message, expected)

    def at(self, kind: str, value: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> Token:
        if not self.at(kind):
            desc = what or (f"'{kind}'" if kind not in ("ident", "number") else kind)
            self.error(f"unexpected {_describe(self.tok)}", [desc])
        return self.advance()

    # atoms and literals

    def atom(self) -> Atom:
        if self.at("ident", "not"):
            self.error("'not' cannot be used as a predicate name", ["predicate name"])
        name_tok = self.expect("ident", "predicate name")
        if is_variable(name_tok.value):
            self.error(f"predicate name {name_tok.value!r} must start lowercase", ["predicate name"], name_tok)
        args: list[str] = []
        if self.at("("):
            self.advance()
            while True:
                if self.at("ident", "not"):
                    self.error("'not' cannot be used as a term", ["term"])
                args.append(self.expect("ident", "term").value)
                if self.at(","):
                    self.advance()
                    continue
                self.expect(")", "',' or ')'")
                break
        last = self.tokens[self.pos - 1]
        if last.span.line == name_tok.span.line:
            length = last.span.column + last.span.length - name_tok.span.column
        else:
            length = name_tok.span.length
        return Atom(name_tok.value, tuple(args), SourceSpan(name_tok.span.line, name_tok.span.column, length))

    def literal(self) -> Literal:
        if self.at("-"):
            self.advance()
            return Literal(self.atom(), True)
        return Literal(self.atom(), False)

    def condition(self) -> Condition:
        if self.at("ident", "not"):
            not_tok = self.advance()
            if self.at("-"):
                self.error("'not' and '-' cannot be combined", ["atom"], not_tok)
            return Condition(Literal(self.atom(), False), True)
        return Condition(self.literal(), False)

    # formulas: '|' binds looser than '&'

    def disjunction(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            self.error("formula nested too deeply")
        parts = [self.conjunction()]
        while self.at("|"):
            self.advance()
            parts.append(self.conjunction())
        self.depth -= 1
        return parts[0] if len(parts) == 1 else ("or", parts)

    def conjunction(self):
        parts = [self.primary()]
        while self.at("&"):
            self.advance()
            parts.append(self.primary())
        return parts[0] if len(parts) == 1 else ("and", parts)

    def primary(self):
        if self.at("("):
            self.advance()
            node = self.disjunction()
            self.expect(")", "')'")
            return node
        if not (self.at("ident") or self.at("-")):
            self.error(f"unexpected {_describe(self.tok)}", ["atom", "'not'", "'-'", "'('"])
        return self.condition()

    # effects

    def effects(self) -> tuple[Effect, ...]:
        items = [self.effect_item()]
        while self.at("&"):
            self.advance()
            items.append(self.effect_item())
        return tuple(items)

    def effect_item(self) -> Effect:
        if self.at("("):
            self.advance()
            lit = self.literal()
            self.expect("<-", "'<-'")
            conds = [self.condition()]
            while self.at("&"):
                self.advance()
                conds.append(self.condition())
            self.expect(")", "'&' or ')'")
            return Effect(lit, tuple(conds))
        if self.at("ident", "not"):
            self.error("effects cannot use default negation", ["literal"])
        return Effect(self.literal())


def _conjuncts(node) -> tuple[Conjunct, ...]:
    if isinstance(node, Condition):
        return (node,)
    kind, children = node
    if kind == "and":
        return tuple(c for child in children for c in _conjuncts(child))
    options: list[tuple[Conjunct, ...]] = []
    for child in children:
        opt = _conjuncts(child)
        if len(opt) == 1 and isinstance(opt[0], Or):
            options.extend(opt[0].options)
        else:
            options.append(opt)
    if len(options) == 1:
        return options[0]
    return (Or(tuple(options)),)


def _kind_for(name: str) -> str:
    if name.startswith("full_"):
        return FULL_VIRTUAL
    if name.startswith("semi_"):
        return SEMI_VIRTUAL
    return NORMAL


def _span_of(obj) -> SourceSpan:
    return getattr(obj, "span", None) or SourceSpan(1, 1, 0)


def _fail(obj, message: str) -> NoReturn:
    raise ParseError(_span_of(obj), message)


# domain


def parse_domain(text: str) -> Domain:
    """Parse and validate a domain; raises ParseError on any lexical, syntax or semantic problem."""
    p = _Parser(text)
    static: list[StaticPredicate] = []
    dynamic: list[DynamicPredicate] = []
    actions: list[ActionSchema] = []
    while not p.at("eof"):
        if p.at("ident", "static"):
            p.advance()
            p.expect("{")
            while not p.at("}"):
                if p.at("eof"):
                    p.error("unterminated static block", ["'}'"])
                atom = p.atom()
                p.expect(".", "'.'")
                static.append(StaticPredicate(atom.name, atom.args, atom.span))
            p.advance()
        elif p.at("ident", "dynamic"):
            p.advance()
            p.expect("{")
            while not p.at("}"):
                if p.at("eof"):
                    p.error("unterminated dynamic block", ["'}'"])
                head = p.atom()
                p.expect(":", "':'")
                req = _conjuncts(p.disjunction())
                p.expect(".", "'.'")
                dynamic.append(_requirement_predicate(head, req))
            p.advance()
        elif p.at("ident", "action"):
            p.advance()
            actions.append(_action_block(p))
        else:
            p.error(f"unexpected {_describe(p.tok)}", ["'static'", "'dynamic'", "'action'"])
    domain = Domain(tuple(static), tuple(dynamic), tuple(actions))
    validate_domain(domain)
    return domain


def _requirement_predicate(head: Atom, req: tuple[Conjunct, ...]) -> DynamicPredicate:
    cases = []
    for case in dnf(req):
        atoms = []
        for cond in case:
            if cond.default_negated or cond.literal.negated:
                _fail(cond.atom, "requirements must be positive static atoms")
            atoms.append(cond.atom)
        cases.append(tuple(atoms))
    return DynamicPredicate(head, tuple(cases), head.span)


def _action_block(p: _Parser) -> ActionSchema:
    p.expect("{")
    head: Atom | None = None
    pre: tuple[Conjunct, ...] = ()
    effects: tuple[Effect, ...] | None = None
    cost = 1
    seen: set[str] = set()
    while not p.at("}"):
        if p.at("eof"):
            p.error("unterminated action block", ["'}'"])
        stmt_names = ["'name'", "'precondition'", "'effect'", "'cost'"]
        if not p.at("ident") or p.tok.value not in ("name", "precondition", "effect", "cost"):
            p.error(f"unexpected {_describe(p.tok)}", stmt_names)
        kw = p.advance()
        if kw.value in seen:
            p.error(f"duplicate '{kw.value}' statement", [], kw)
        seen.add(kw.value)
        p.expect(":", "':'")
        if kw.value == "name":
            head = p.atom()
        elif kw.value == "precondition":
            if not p.at("."):
                pre = _conjuncts(p.disjunction())
        elif kw.value == "effect":
            effects = p.effects()
        else:
            num = p.expect("number", "positive integer")
            cost = int(num.value)
            if cost < 1:
                p.error("cost must be a positive integer", ["positive integer"], num)
        p.expect(".", "'.'")
    close_tok = p.advance()
    if head is None:
        p.error("action block has no 'name' statement", ["'name'"], close_tok)
    if effects is None:
        p.error("action block has no 'effect' statement", ["'effect'"], close_tok)
    for arg in head.args:
        if not is_variable(arg):
            _fail(head, f"action parameter {arg!r} must be a variable")
    return ActionSchema(head.name, head.args, pre, effects, cost, _kind_for(head.name), head.span)


def validate_domain(d: Domain) -> None:
    arities: dict[str, int] = {}
    static_names: set[str] = set()

    def declare(name: str, arity: int, obj) -> None:
        if name in arities:
            _fail(obj, f"predicate {name!r} declared twice")
        arities[name] = arity

    for sp in d.static:
        declare(sp.name, sp.arity, sp)
        static_names.add(sp.name)
        _check_template_args(sp.head, sp)
    for dp in d.dynamic:
        declare(dp.name, dp.arity, dp)
        _check_template_args(dp.head, dp)
    dynamic_names = set(arities) - static_names

    def check_atom(atom: Atom, allowed: set[str] | None = None) -> None:
        if atom.name not in arities:
            _fail(atom, f"undeclared predicate {atom.name!r}")
        if arities[atom.name] != atom.arity:
            _fail(atom, f"{atom.name!r} expects {arities[atom.name]} argument(s), got {atom.arity}")
        if allowed is not None and atom.name not in allowed:
            kind = "static" if allowed is static_names else "dynamic"
            _fail(atom, f"{atom.name!r} is not a {kind} predicate")

    for dp in d.dynamic:
        if not dp.requirements:
            _fail(dp, f"{dp.name!r} has no requirements")
        for case in dp.requirements:
            if not case:
                _fail(dp, f"{dp.name!r} has an empty requirement case")
            case_vars: set[str] = set()
            for atom in case:
                check_atom(atom, static_names)
                case_vars.update(atom.variables())
            for var in dp.head.variables():
                if var not in case_vars:
                    _fail(dp, f"variable {var} of {dp.head} is not limited by a static predicate in every case")

    names: set[str] = set()
    for a in d.actions:
        if a.name in names:
            _fail(a, f"action {a.name!r} declared twice")
        names.add(a.name)
        if len(set(a.params)) != len(a.params):
            _fail(a, f"action {a.head} repeats a parameter")
        params = set(a.params)
        for atom in conjunct_atoms(a.preconditions):
            check_atom(atom)
        for case in a.precondition_cases():
            case_vars: set[str] = set()
            for cond in case:
                if cond.atom.name in static_names and cond.literal.negated:
                    _fail(cond.atom, f"static atom {cond.atom} cannot be classically negated")
                for var in cond.atom.variables():
                    if var not in params:
                        _fail(cond.atom, f"variable {var} in preconditions is not a parameter of {a.head}")
                if not (cond.atom.name in static_names and cond.default_negated):
                    case_vars.update(cond.atom.variables())
            for var in a.params:
                if var not in case_vars:
                    _fail(a, f"parameter {var} of {a.head} does not occur in a precondition atom")
        if not a.effects:
            _fail(a, f"action {a.head} has no effects")
        for eff in a.effects:
            check_atom(eff.literal.atom, dynamic_names)
            bound = set(params)
            for cond in eff.conditions:
                check_atom(cond.atom)
                if cond.atom.name in static_names and cond.literal.negated:
                    _fail(cond.atom, f"static atom {cond.atom} cannot be classically negated")
                if not cond.default_negated:
                    bound.update(cond.atom.variables())
            for atom in [eff.literal.atom] + [c.atom for c in eff.conditions]:
                for var in atom.variables():
                    if var not in bound:
                        _fail(atom, f"effect variable {var} is not bound by parameters or effect conditions")
        if a.kind != NORMAL:
            if len(a.effects) != 1 or a.effects[0].is_conditional:
                _fail(a, f"virtual action {a.name!r} must have exactly one unconditional effect")
            if a.effects[0].literal.atom.name not in a.name:
                _fail(a, f"virtual action {a.name!r} does not name its effect predicate")


def _check_template_args(head: Atom, obj) -> None:
    for arg in head.args:
        if not is_variable(arg):
            _fail(obj, f"declaration {head} must use variables, got {arg!r}")


# problem


def parse_problem(text: str, domain: Domain) -> Problem:
    p = _Parser(text)
    facts: list[Atom] = []
    init: list[Literal] = []
    goal: list[Literal] = []
    exclude: list[Token] = []
    goal_tok: Token | None = None
    while not p.at("eof"):
        if not p.at("ident") or p.tok.value not in ("facts", "init", "goal", "exclude"):
            p.error(f"unexpected {_describe(p.tok)}", ["'facts'", "'init'", "'goal'", "'exclude'"])
        block = p.advance()
        if block.value == "goal":
            goal_tok = block
        p.expect("{")
        while not p.at("}"):
            if p.at("eof"):
                p.error(f"unterminated {block.value} block", ["'}'"])
            if block.value == "facts":
                facts.append(p.atom())
            elif block.value == "exclude":
                exclude.append(p.expect("ident", "dynamic predicate name"))
            else:
                if p.at("ident", "not"):
                    p.error(f"{block.value} literals cannot use default negation", ["literal"])
                (init if block.value == "init" else goal).append(p.literal())
            p.expect(".", "'.'")
        p.advance()
    if not goal:
        raise ParseError(goal_tok.span if goal_tok else p.tok.span, "goal must be nonempty", ["goal literal"])
    return _build_problem(domain, facts, init, goal, exclude)


def _build_problem(domain: Domain, facts, init, goal, exclude) -> Problem:
    static = domain.static_names()
    dynamic = domain.dynamic_names()

    def check(atom: Atom, table: dict[str, int], what: str) -> None:
        if atom.name not in table:
            other = "dynamic" if atom.name in dynamic else "static" if atom.name in static else None
            if other:
                _fail(atom, f"{atom.name!r} is {other}; {what} need {'static' if table is static else 'dynamic'} predicates")
            _fail(atom, f"undeclared predicate {atom.name!r}")
        if table[atom.name] != atom.arity:
            _fail(atom, f"{atom.name!r} expects {table[atom.name]} argument(s), got {atom.arity}")
        if not atom.is_ground:
            _fail(atom, f"{atom} is not ground")

    constants: set[str] = set()
    for atom in facts:
        check(atom, static, "facts")
        constants.update(atom.args)
    seen: set[Literal] = set()
    for lit in init + goal:
        check(lit.atom, dynamic, "init and goal")
        for c in lit.atom.args:
            if c not in constants:
                _fail(lit.atom, f"constant {c!r} does not occur in any static fact")
    for lit in init:
        if complement(lit) in seen:
            _fail(lit.atom, f"inconsistent init: both {lit.atom} and -{lit.atom}")
        seen.add(lit)
    names: list[str] = []
    for tok in exclude:
        if tok.value not in dynamic:
            raise ParseError(tok.span, f"cannot exclude {tok.value!r}: not a dynamic predicate")
        names.append(tok.value)
    try:
        return Problem(frozenset(facts), State(init), tuple(goal), frozenset(names))
    except DomainError as exc:  # pragma: no cover - guarded above
        raise ParseError(SourceSpan(1, 1, 0), str(exc)) from exc


def parse_literal(text: str) -> Literal:
    p = _Parser(text)
    lit = p.literal()
    p.expect("eof", "end of input")
    return lit


def parse_condition(text: str) -> Condition:
    p = _Parser(text)
    cond = p.condition()
    p.expect("eof", "end of input")
    return cond


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    atom = p.atom()
    p.expect("eof", "end of input")
    return atom


# printing


def format_requirements(cases: tuple[tuple[Atom, ...], ...]) -> str:
    return " | ".join(" & ".join(str(a) for a in case) for case in cases)


def format_action(a: ActionSchema, indent: str = "  ") -> str:
    lines = ["action {", f"{indent}name: {a.head}."]
    if a.preconditions:
        lines.append(f"{indent}precondition: {format_conjunction(a.preconditions)}.")
    lines.append(f"{indent}effect: {' & '.join(str(e) for e in a.effects)}.")
    if a.cost != 1:
        lines.append(f"{indent}cost: {a.cost}.")
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_domain(d: Domain) -> str:
    out = ["static {\n"]
    out += [f"  {sp.head}.\n" for sp in d.static]
    out.append("}\ndynamic {\n")
    out += [f"  {dp.head} : {format_requirements(dp.requirements)}.\n" for dp in d.dynamic]
    out.append("}\n")
    out += [format_action(a) for a in d.actions]
    return "".join(out)


def print_problem(p: Problem) -> str:
    out = ["facts {\n"]
    out += [f"  {a}.\n" for a in sorted(p.static_facts)]
    out.append("}\ninit {\n")
    out += [f"  {l}.\n" for l in p.init]
    out.append("}\ngoal {\n")
    out += [f"  {l}.\n" for l in p.goal]
    out.append("}\n")
    if p.exclusions:
        out.append("exclude {\n")
        out += [f"  {n}.\n" for n in sorted(p.exclusions)]
        out.append("}\n")
    return "".join(out)
