from __future__ import annotations

import random

import pytest

from vaplan.diagnosis import (
    DiagnosisConfig,
    Diagnosed,
    GoalList,
    LayoutRing,
    MissingCapability,
    MixedMissing,
    NormalPlan,
    StaticUnmet,
    Undiagnosed,
    detect_ring,
    first_semi_virtual,
    progressive_diagnose,
    stage2_loop,
    stage3_static,
)
from vaplan.grounder import FactIndex, ground_actions, match
from vaplan.model import FULL_VIRTUAL, ConfigError, Effect, GroundAction
from vaplan.parser import parse_atom, parse_domain, parse_literal, parse_problem
from vaplan.planner import Plan, plan, validate_plan
from vaplan.virtual import assign_costs, generate_virtual_actions

from tests.properties import noninterference_case
from tests.worlds import fixture_text, load_fixture, oracle_best_cost, parsed_rooms_world


def L(text):
    return parse_literal(text)


def goals(*texts):
    return tuple((L(t),) for t in texts)


def step(name, kind, effect="p"):
    return GroundAction(name, (), (), (Effect(L(effect)),), 1, kind)


def test_detect_ring():
    g1, g2, g3 = L("robAt(room5)"), L("robAt(room4)"), L("robAt(room3)")
    assert detect_ring(GoalList(((g1,), (g2,))), g1) == ((g1,), (g2,), (g1,))
    assert detect_ring(GoalList(((g1,),)), g2) is None
    assert detect_ring(GoalList(((g1,), (g2,), (g3,))), (g2,)) == ((g2,), (g3,), (g2,))


def test_first_semi_virtual():
    p = Plan((step("moveTo", "normal"), step("semi_e_doorStatus", "semi_virtual", "q"),
              step("semi_e_robAt", "semi_virtual", "r")), 3)
    assert first_semi_virtual(p).effects[0].literal == L("q")
    assert first_semi_virtual(Plan((step("moveTo", "normal"),), 1)) is None


def test_config_validation():
    with pytest.raises(ConfigError):
        DiagnosisConfig(max_normal_cost=0)
    with pytest.raises(ConfigError):
        DiagnosisConfig(max_steps=0)
    with pytest.raises(ConfigError):
        DiagnosisConfig(static_check_depth=0)


def test_solvable_world_returns_the_normal_plan():
    d, p = load_fixture("case1/domain_full.vad", "case1/world.vap")
    out = progressive_diagnose(d, p)
    assert out == NormalPlan(plan(p.init, p.static_facts, p.goal, ground_actions(d, p)))


def test_case1_missing_capability():
    d, p = load_fixture("case1/domain.vad", "case1/world.vap")
    out = progressive_diagnose(d, p)
    assert isinstance(out, Diagnosed) and isinstance(out.explanation, MissingCapability)
    e = out.explanation
    assert e.missing == (L("doorStatus(door12,opened)"),)
    assert e.plan.labels == [
        "moveTo(room1,room0,door01)",
        "full_e_doorStatus(door12,opened)",
        "moveTo(room2,room1,door12)",
        "moveTo(room5,room2,door25)",
    ]
    assert e.plan.total_cost == 3 + 10 * 20 * 20


def test_case2_ring_with_robot_moves():
    d, p = load_fixture("case2/domain.vad", "case2/world.vap")
    result = stage2_loop(d, p)
    assert isinstance(result, LayoutRing)
    expected = goals("robAt(room5)", "robAt(room4)", "robAt(room5)")
    assert result.goal_list.goals == expected
    assert result.ring == expected
    assert result.unreachable == ()


def test_case2_without_robot_moves_names_key34():
    d, p = load_fixture("case2/domain.vad", "case2/world_no_robat.vap")
    out = progressive_diagnose(d, p)
    e = out.explanation
    assert isinstance(e, LayoutRing)
    assert e.goal_list.goals == goals(
        "robAt(room5)", "doorStatus(door34,opened)", "isHeld(key34,left_hand)",
        "isPlaced(key34,table0)", "isHeld(key34,left_hand)",
    )
    assert e.ring == goals("isHeld(key34,left_hand)", "isPlaced(key34,table0)", "isHeld(key34,left_hand)")
    assert e.unreachable == ("key34",)


def test_case2_is_unsolvable_by_brute_force():
    d, p = load_fixture("case2/domain.vad", "case2/world.vap")
    assert oracle_best_cost(p.init, p.goal, ground_actions(d, p), 12) is None


def test_case3_goal_list_then_static_report():
    d, p = load_fixture("case3/domain.vad", "case3/world.vap")
    lg = stage2_loop(d, p)
    assert isinstance(lg, GoalList)
    assert lg.goals == goals("robAt(room5)", "doorStatus(door14,opened)")
    report = stage3_static(lg.last[0], d, p)
    assert report.action == parse_atom("openDoor(door14,G,K,R1,R2)")
    assert report.unmet == (parse_atom("isCard(key14)"),)
    assert report.candidates["K"] == ("key14",)
    assert report.candidates["G"] == ("left_hand", "right_hand")
    pairs = {(a[2], a[3]) for a in report.assignments}
    assert pairs == {("room1", "room4"), ("room4", "room1")}
    rows = [(str(c.condition), str(c.action), {str(a) for a in c.static}, [str(a) for a in c.unmet]) for c in report.chain]
    assert rows == [
        ("robAt(R1)", "moveTo(R1,R0,D0)", {"connected(D0,R0,R1)"}, []),
        ("isHeld(K,G)", "pickup(K,G,L0,R0)", {"key(K)", "isCard(K)"}, ["isCard(key14)"]),
        ("isHeld(K,G)", "semi_e_isHeld(K,G)", {"key(K)", "isCard(K)", "hand(G)"}, ["isCard(key14)"]),
    ]


def _brute_force_absent(facts, atom) -> bool:
    index_rows = [f.args for f in facts if f.name == atom.name]
    return not any(
        all(a == v or a[:1].isupper() for a, v in zip(atom.args, row)) for row in index_rows
    )


def test_case3_unmet_atoms_are_absent_under_every_binding():
    d, p = load_fixture("case3/domain.vad", "case3/world.vap")
    out = progressive_diagnose(d, p)
    assert isinstance(out.explanation, StaticUnmet)
    for entry in out.explanation.chain:
        for atom in entry.unmet:
            assert _brute_force_absent(p.static_facts, atom)


MIXED = """
facts {
  room(room0). room(room5). room(room9). table(table0). table(table9).
  inRoom(table0,room0). inRoom(table9,room9). door(door05).
  connected(door05,room0,room5). connected(door05,room5,room0).
  key(keyx). hand(left_hand).
  doorStatusValue(opened). doorStatusValue(closed). handStatusValue(empty). handStatusValue(full).
}
init {
  robAt(room0). handStatus(left_hand,empty). isPlaced(keyx,table9).
  doorStatus(door05,closed). -doorStatus(door05,opened).
}
goal { isHeld(keyx,left_hand). robAt(room5). }
"""
MIXED_CONFIG = DiagnosisConfig(exclusions=frozenset({"robAt", "handStatus"}))


def test_mixed_missing():
    # keyx sits in a room without doors and the only door to room5 cannot be opened
    d = parse_domain(fixture_text("case1", "domain.vad"))
    p = parse_problem(MIXED, d)
    out = progressive_diagnose(d, p, MIXED_CONFIG)
    e = out.explanation
    assert isinstance(e, MixedMissing)
    assert e.goal_list.goals == (p.goal,)
    assert e.missing == (L("doorStatus(door05,opened)"),)
    assert e.plan.labels == [
        "semi_e_isPlaced(keyx,table0)",
        "pickup(keyx,left_hand,table0,room0)",
        "full_e_doorStatus(door05,opened)",
        "moveTo(room5,room0,door05)",
    ]
    # oracle: without full virtual actions the same iteration has no plan at all
    vset = generate_virtual_actions(d, exclusions=MIXED_CONFIG.exclusions)
    costs = assign_costs(vset, 10, 20, d.normal_actions)
    semi = [a for a in ground_actions(d, p, vset.semi, costs) if a.effects[0].literal not in p.goal]
    assert oracle_best_cost(p.init, p.goal, ground_actions(d, p) + semi, 8) is None


DOOR99 = """
facts {
  room(room0). room(room1). table(table0). inRoom(table0,room0).
  door(door99). key(key99). keyDoor(key99,door99). hand(left_hand).
  doorStatusValue(opened). doorStatusValue(closed). handStatusValue(empty). handStatusValue(full).
}
init { robAt(room0). handStatus(left_hand,empty). isPlaced(key99,table0). doorStatus(door99,closed). }
goal { doorStatus(door99,opened). }
"""


def test_unconnected_door_reports_connected_atom():
    d = parse_domain(fixture_text("case1", "domain_full.vad"))
    p = parse_problem(DOOR99, d)
    assert oracle_best_cost(p.init, p.goal, ground_actions(d, p), 8) is None
    report = stage3_static(L("doorStatus(door99,opened)"), d, p)
    assert report.action == parse_atom("openDoor(door99,G,K,R1,R2)")
    assert report.unmet == (parse_atom("connected(door99,R1,R2)"),)
    out = progressive_diagnose(d, p)
    assert out == Diagnosed(report)


def test_no_goal_related_action():
    d = parse_domain(fixture_text("case1", "domain.vad"))
    p = parse_problem(DOOR99, d)
    report = stage3_static(L("doorStatus(door99,opened)"), d, p)
    assert report.action is None and report.note
    assert not report.conclusive


def test_undiagnosed_when_nothing_static_is_wrong():
    d, p = load_fixture("case1/domain_full.vad", "case1/world.vap")
    out = progressive_diagnose(d, p, DiagnosisConfig(max_steps=2, exclusions=frozenset({"robAt"})))
    assert isinstance(out, Undiagnosed)
    assert out.goal_list.goals == (p.goal,)
    assert out.report is not None and not out.report.conclusive
    assert out.report.action == parse_atom("moveTo(room5,R1,D)")


CHAIN_DOMAIN = """
static { s(A). good(A). }
dynamic { p(A) : s(A). q(A) : s(A). r(A) : s(A). }
action { name: finish(X). precondition: s(X) & q(X). effect: p(X). }
action { name: prepare(Y). precondition: s(Y) & r(Y). effect: q(Y). }
action { name: start(Z). precondition: s(Z) & good(Z). effect: r(Z). }
"""
CHAIN_PROBLEM = "facts { s(a). } goal { p(a). } exclude { p. q. r. }"


def test_deeper_static_check_extends_the_chain():
    d = parse_domain(CHAIN_DOMAIN)
    p = parse_problem(CHAIN_PROBLEM, d)
    shallow = progressive_diagnose(d, p)
    assert isinstance(shallow, Undiagnosed)
    assert [str(c.action) for c in shallow.report.chain] == ["prepare(a)"]
    deep = progressive_diagnose(d, p, DiagnosisConfig(static_check_depth=2))
    assert isinstance(deep, Diagnosed)
    chain = deep.explanation.chain
    assert [(str(c.condition), str(c.action), c.depth) for c in chain] == [("q(a)", "prepare(a)", 1), ("r(a)", "start(a)", 2)]
    assert chain[1].unmet == (parse_atom("good(a)"),)
    assert deep.explanation.unmet == (parse_atom("good(a)"),)


def _check_invariants(d, p, out) -> None:
    if isinstance(out, NormalPlan):
        assert validate_plan(p.init, p.static_facts, out.plan, p.goal).valid
        return
    if isinstance(out, Undiagnosed):
        assert out.goal_list[0] == p.goal
        return
    e = out.explanation
    if isinstance(e, MissingCapability):
        assert any(s.kind == FULL_VIRTUAL for s in e.plan.steps)
        assert validate_plan(p.init, p.static_facts, e.plan, p.goal).valid
    elif isinstance(e, MixedMissing):
        assert e.missing and any(s.kind == FULL_VIRTUAL for s in e.plan.steps)
        assert e.goal_list[0] == p.goal
    elif isinstance(e, LayoutRing):
        assert len(e.ring) >= 2 and e.ring[0] == e.ring[-1]
        assert e.goal_list[0] == p.goal and e.goal_list.last == e.ring[-1]
    else:
        index = FactIndex(d, p.static_facts)
        for atom in list(e.unmet) + [a for c in e.chain for a in c.unmet]:
            assert next(match([(atom, index.candidates(atom.name))]), None) is None


@pytest.mark.parametrize("seed", range(40))
def test_diagnosis_invariants_on_random_worlds(seed):
    rng = random.Random(seed)
    d, p = parsed_rooms_world(rng, max_rooms=4, open_door_action=rng.random() < 0.5)
    cfg = DiagnosisConfig(max_steps=6, exclusions=frozenset({"robAt"}) if rng.random() < 0.5 else frozenset())
    _check_invariants(d, p, progressive_diagnose(d, p, cfg))


@pytest.mark.parametrize("seed", range(20))
def test_non_interference_sample(seed):
    assert noninterference_case(seed)[1] is None
