"""Acceptance suite: one PASS/FAIL line per criterion, printed even without ``-s``."""

from __future__ import annotations

import time

import pytest
from hypothesis import HealthCheck, given, settings

from vaplan.cli import render_explanation
from vaplan.diagnosis import Diagnosed, GoalList, LayoutRing, MissingCapability, StaticUnmet, progressive_diagnose, stage2_loop, stage3_static
from vaplan.grounder import ground_actions
from vaplan.parser import parse_atom, parse_domain, parse_literal, print_domain
from vaplan.virtual import generate_virtual_actions

from tests.properties import noninterference_case, optimality_case, preference_case, soundness_case
from tests.strategies import domains
from tests.test_virtual import FULL_EXPECTED, SEMI_EXPECTED, _expected, _structure
from tests.worlds import load_fixture, oracle_best_cost


@pytest.fixture
def report(capsys):
    def emit(criterion: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def goals(*texts):
    return tuple((parse_literal(t),) for t in texts)


def test_criterion_1_case1_missing_capability(report):
    d, p = load_fixture("case1/domain.vad", "case1/world.vap")
    start = time.perf_counter()
    out = progressive_diagnose(d, p)
    elapsed = time.perf_counter() - start
    want = [
        "moveTo(room1,room0,door01)",
        "full_e_doorStatus(door12,opened)",
        "moveTo(room2,room1,door12)",
        "moveTo(room5,room2,door25)",
    ]
    got = out.explanation.plan.labels if isinstance(out, Diagnosed) and isinstance(out.explanation, MissingCapability) else None
    normal_blocked = oracle_best_cost(p.init, p.goal, ground_actions(d, p), 12) is None
    ok = got == want and elapsed < 1.0 and normal_blocked
    report("1", ok, f"plan {got}, normal-only unsolvable by oracle: {normal_blocked}, {elapsed:.3f}s (limit 1s)")
    assert ok


def test_criterion_2_virtual_schema_structure(report):
    d, _ = load_fixture("case2/domain.vad", "case2/world.vap")
    vset = generate_virtual_actions(d)
    full_ok = vset.full == () and {s.name: _structure(s) for s in vset.semi} == _expected(SEMI_EXPECTED)
    d, _ = load_fixture("case1/domain.vad", "case1/world.vap")
    reduced = generate_virtual_actions(d)
    door_ok = {s.name: _structure(s) for s in reduced.full} == _expected(FULL_EXPECTED)
    ok = full_ok and door_ok
    report("2", ok, f"full domain: {len(vset.full)} full / {len(vset.semi)} semi, exact={full_ok}; "
                    f"without openDoor the doorStatus pair is full virtual, exact={door_ok}")
    assert ok


def test_criterion_3_case2_ring(report):
    start = time.perf_counter()
    d, p = load_fixture("case2/domain.vad", "case2/world.vap")
    ring = stage2_loop(d, p)
    ring_ok = isinstance(ring, LayoutRing) and ring.ring == goals("robAt(room5)", "robAt(room4)", "robAt(room5)")
    unsolvable = oracle_best_cost(p.init, p.goal, ground_actions(d, p), 12) is None
    d, p = load_fixture("case2/domain.vad", "case2/world_no_robat.vap")
    out = progressive_diagnose(d, p)
    e = out.explanation
    text = render_explanation(e)
    tail_ok = (
        isinstance(e, LayoutRing)
        and e.goal_list.goals[1:3] == goals("doorStatus(door34,opened)", "isHeld(key34,left_hand)")
        and e.goal_list.goals[-1] == goals("isHeld(key34,left_hand)")[0]
        and "key34 is unreachable" in text
    )
    elapsed = time.perf_counter() - start
    ok = ring_ok and unsolvable and tail_ok and elapsed < 5.0
    report("3", ok, f"ring robAt(room5) <- robAt(room4) <- robAt(room5): {ring_ok}, oracle unsolvable: {unsolvable}, "
                    f"excluded robAt names key34: {tail_ok}, {elapsed:.3f}s (limit 5s)")
    assert ok


def test_criterion_4_case3_static_unmet(report):
    d, p = load_fixture("case3/domain.vad", "case3/world.vap")
    out = progressive_diagnose(d, p)
    e = out.explanation
    lg = stage2_loop(d, p)
    checks = {
        "goal list": isinstance(lg, GoalList) and lg.last == (parse_literal("doorStatus(door14,opened)"),),
        "kind": isinstance(e, StaticUnmet),
    }
    if checks["kind"]:
        rows = [(str(c.condition), str(c.action), {str(a) for a in c.static}, [str(a) for a in c.unmet]) for c in e.chain]
        checks.update({
            "goal": e.goal == parse_literal("doorStatus(door14,opened)"),
            "action": e.action == parse_atom("openDoor(door14,G,K,R1,R2)"),
            "K": e.candidates.get("K") == ("key14",),
            "(R1,R2)": {(a[2], a[3]) for a in e.assignments} == {("room1", "room4"), ("room4", "room1")},
            "chain": rows == [
                ("robAt(R1)", "moveTo(R1,R0,D0)", {"connected(D0,R0,R1)"}, []),
                ("isHeld(K,G)", "pickup(K,G,L0,R0)", {"key(K)", "isCard(K)"}, ["isCard(key14)"]),
                ("isHeld(K,G)", "semi_e_isHeld(K,G)", {"key(K)", "isCard(K)", "hand(G)"}, ["isCard(key14)"]),
            ],
            "sole unmet": e.unmet == (parse_atom("isCard(key14)"),),
            "stage 3 alone": stage3_static(parse_literal("doorStatus(door14,opened)"), d, p) == e,
            "sentence": "the robot can not pickup(key14,G,L0,R0) because isCard(key14) does not hold" in render_explanation(e),
        })
    ok = all(checks.values())
    report("4", ok, ", ".join(f"{k}={v}" for k, v in checks.items()))
    assert ok


def _sweep(case, seeds):
    failures, applicable = [], 0
    for seed in seeds:
        result = case(seed)
        if isinstance(result, tuple):
            hit, msg = result
            applicable += hit
        else:
            msg = result
            applicable += 1
        if msg:
            failures.append(msg)
    return failures, applicable


def test_criterion_5a_plan_soundness(report):
    failures, n = _sweep(soundness_case, range(1000))
    report("5a", not failures, f"1000 random worlds, {len(failures)} plans failed replay {failures[:3]}")
    assert not failures


def test_criterion_5b_optimality_against_oracle(report):
    failures, n = _sweep(optimality_case, range(200))
    report("5b", not failures, f"200 worlds of at most 5 rooms, {len(failures)} cost mismatches {failures[:3]}")
    assert not failures


def test_criterion_5c_no_virtual_preference(report):
    failures, n = _sweep(preference_case, range(300))
    ok = not failures and n >= 100
    report("5c", ok, f"{n} solvable worlds with virtual actions available, {len(failures)} used a virtual step")
    assert ok


def test_criterion_5d_count_law(report):
    seen = []

    @settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
    @given(domains())
    def check(d):
        vset = generate_virtual_actions(d)
        assert len(vset) == 2 * sum(len(dp.requirements) for dp in d.dynamic)
        seen.append(len(vset))

    try:
        check()
        ok, detail = True, ""
    except AssertionError as exc:
        ok, detail = False, f": {exc}"
    report("5d", ok, f"{len(seen)} generated domains, virtual count is twice the DNF cases{detail}")
    assert ok


def test_criterion_5e_parser_round_trip(report):
    seen = []

    @settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
    @given(domains())
    def check(d):
        text = print_domain(d)
        assert parse_domain(text) == d
        seen.append(1)

    try:
        check()
        ok, detail = True, ""
    except AssertionError as exc:
        ok, detail = False, f": {exc}"
    report("5e", ok, f"{len(seen)} generated domains print and re-parse to an equal domain{detail}")
    assert ok


def test_criterion_5f_non_interference(report):
    failures, n = _sweep(noninterference_case, range(300))
    ok = not failures and n >= 100
    report("5f", ok, f"{n} solvable worlds, {len(failures)} where diagnosis differed from the plain plan")
    assert ok
