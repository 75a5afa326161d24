"""Cost-optimal forward search bounded by plan length, and a plan validator.

Plans are ordered by (total cost, number of virtual steps, number of steps,
step sequence), where steps compare by (virtual rank, label) so that normal
actions sort before semi-virtual ones and those before full virtual ones.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from vaplan.model import (
    FULL_VIRTUAL,
    NORMAL,
    SEMI_VIRTUAL,
    Atom,
    ConfigError,
    GroundAction,
    InapplicableActionError,
    InconsistentEffectsError,
    Literal,
    State,
    apply,
    complement,
    satisfies_goal,
)

DEFAULT_MAX_STEPS = 20
DEFAULT_MAX_NORMAL_COST = 10

_RANK = {NORMAL: 0, SEMI_VIRTUAL: 1, FULL_VIRTUAL: 2}


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundAction, ...]
    total_cost: int

    @property
    def labels(self) -> list[str]:
        return [a.label for a in self.steps]

    @property
    def virtual_steps(self) -> list[GroundAction]:
        return [a for a in self.steps if a.is_virtual]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Unsolvable:
    explored: int
    reason: str = "no plan within the step bound"


SearchResult = Plan | Unsolvable


class _Task:
    """Ground actions compiled to integer literal ids."""

    def __init__(self, actions: Sequence[GroundAction], costs: Mapping[str, int] | None):
        self.ids: dict[Literal, int] = {}
        self.actions = list(actions)
        order = sorted(range(len(self.actions)), key=lambda i: (_RANK[self.actions[i].kind], self.actions[i].label, i))
        self.rank_of = [0] * len(self.actions)
        for pos, i in enumerate(order):
            self.rank_of[i] = pos
        self.cost: list[int] = []
        self.pre_in: list[frozenset[int]] = []
        self.pre_out: list[frozenset[int]] = []
        self.effects: list[list[tuple[frozenset[int], frozenset[int], int]]] = []
        for a in self.actions:
            cost = (costs or {}).get(a.name, a.cost)
            if cost <= 0:
                raise ConfigError(f"{a.label}: cost must be positive")
            self.cost.append(cost)
            self.pre_in.append(frozenset(self.lit(c.literal) for c in a.preconditions if not c.default_negated))
            self.pre_out.append(frozenset(self.lit(c.literal) for c in a.preconditions if c.default_negated))
            effs = []
            for e in a.effects:
                effs.append((
                    frozenset(self.lit(c.literal) for c in e.conditions if not c.default_negated),
                    frozenset(self.lit(c.literal) for c in e.conditions if c.default_negated),
                    self.lit(e.literal),
                ))
            self.effects.append(effs)
        self.always: list[int] = []
        self.trigger: dict[int, list[int]] = {}
        for i, pre in enumerate(self.pre_in):
            if pre:
                self.trigger.setdefault(min(pre), []).append(i)
            else:
                self.always.append(i)

    def lit(self, l: Literal) -> int:
        i = self.ids.get(l)
        if i is None:
            i = self.ids[l] = len(self.ids)
        return i

    def finalize(self) -> None:
        literals = [None] * len(self.ids)
        for l, i in self.ids.items():
            literals[i] = l
        self.literals: list[Literal] = literals  # type: ignore[assignment]
        self.comp = [self.ids.get(complement(l), -1) for l in literals]

    def applicable(self, state: frozenset[int]) -> Iterable[int]:
        cands = list(self.always)
        for l in state:
            cands.extend(self.trigger.get(l, ()))
        cands.sort()
        for i in cands:
            if self.pre_in[i] <= state and not (self.pre_out[i] & state):
                yield i

    def successor(self, state: frozenset[int], i: int) -> frozenset[int] | None:
        adds = set()
        for cond_in, cond_out, lit in self.effects[i]:
            if cond_in <= state and not (cond_out & state):
                adds.add(lit)
        removes = {self.comp[l] for l in adds if self.comp[l] >= 0}
        if removes & adds:
            return None
        return frozenset((state - removes) | adds)

    def relaxed_reachable(self, init: frozenset[int], goal: frozenset[int]) -> bool:
        reach = set(init)
        changed = True
        while changed and not goal <= reach:
            changed = False
            for i in range(len(self.actions)):
                if self.pre_in[i] <= reach:
                    for cond_in, _, lit in self.effects[i]:
                        if lit not in reach and cond_in <= reach:
                            reach.add(lit)
                            changed = True
        return goal <= reach


def plan(
    init: State,
    facts: Iterable[Atom],
    goal: Sequence[Literal],
    actions: Sequence[GroundAction],
    max_steps: int = DEFAULT_MAX_STEPS,
    costs: Mapping[str, int] | None = None,
) -> SearchResult:
    """Uniform-cost search for the best plan of at most ``max_steps`` steps.

    ``facts`` is accepted for interface symmetry; ground actions already have
    their static preconditions checked.  ``costs`` optionally overrides action
    costs by schema name.
    """
    del facts
    if max_steps < 1:
        raise ConfigError("the step bound N must be at least 1")
    task = _Task(actions, costs)
    start = frozenset(task.lit(l) for l in init.literals)
    goal_ids = frozenset(task.lit(g) for g in goal)
    task.finalize()

    if goal_ids <= start:
        return Plan((), 0)
    if not task.relaxed_reachable(start, goal_ids):
        return Unsolvable(0, "goal unreachable even ignoring delete effects")

    counter = itertools.count()
    # (cost, virtual steps, steps, sequence of action ranks, tiebreak, state, path)
    heap: list = [(0, 0, 0, (), next(counter), start, ())]
    best_depth: dict[frozenset[int], int] = {}
    explored = 0
    while heap:
        cost, nvirt, depth, seq, _, state, path = heapq.heappop(heap)
        if depth >= best_depth.get(state, math.inf):
            continue
        best_depth[state] = depth
        explored += 1
        if goal_ids <= state:
            steps = tuple(task.actions[i] for i in path)
            return Plan(steps, cost)
        if depth == max_steps:
            continue
        for i in task.applicable(state):
            nxt = task.successor(state, i)
            if nxt is None or depth + 1 >= best_depth.get(nxt, math.inf):
                continue
            a = task.actions[i]
            heapq.heappush(heap, (
                cost + task.cost[i],
                nvirt + (a.kind != NORMAL),
                depth + 1,
                seq + (task.rank_of[i],),
                next(counter),
                nxt,
                path + (i,),
            ))
    return Unsolvable(explored)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    message: str
    failed_step: int | None = None  # 1-based
    final_state: State | None = None

    def __bool__(self) -> bool:
        return self.valid


def validate_plan(
    init: State,
    facts: Iterable[Atom],
    plan: Plan | Sequence[GroundAction],
    goal: Sequence[Literal],
) -> ValidationReport:
    """Simulate the plan step by step; report the first inapplicable step or an unmet goal."""
    del facts
    steps = plan.steps if isinstance(plan, Plan) else tuple(plan)
    state = init
    for n, action in enumerate(steps, start=1):
        try:
            state = apply(state, action)
        except InapplicableActionError as exc:
            return ValidationReport(False, f"step {n}: {exc}", n, state)
        except InconsistentEffectsError as exc:
            return ValidationReport(False, f"step {n}: {exc}", n, state)
    if not satisfies_goal(state, goal):
        missing = [str(g) for g in goal if g not in state]
        return ValidationReport(False, f"goal not reached: {', '.join(missing)} missing", None, state)
    return ValidationReport(True, "plan is valid", None, state)
