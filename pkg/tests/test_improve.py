import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import object_models, random_rule
from rebac_miner.engine import Evaluator
from rebac_miner.features import FeatureLimits
from rebac_miner.fixtures import departments
from rebac_miner.improve import (
    DTRM,
    DTRM_MINUS,
    SIMPLIFY_PASSES,
    CandidatePolicy,
    NegationEliminationExhausted,
    eliminate_negative_features,
    improve,
    is_valid,
    lub_conditions,
    merge_pair,
    merge_rules,
    mergeable,
    pass_constant_constraints,
    pass_constant_propagation,
    pass_overlapping_actions,
    pass_redundant_actions,
    pass_remove_conditions,
    pass_remove_constraints,
    pass_remove_cycles,
)
from rebac_miner.model import (
    CONTAINS,
    EQUAL,
    ID,
    IN,
    MANY,
    ONE,
    OPTIONAL,
    ClassModel,
    Condition,
    Constraint,
    FieldDecl,
    Obj,
    ObjectModel,
    Rule,
    wsc_policy,
)


def _om(schema, objs):
    return ObjectModel(ClassModel({c: [FieldDecl(*f) for f in fs] for c, fs in schema.items()}), objs)


def _dept(*names):
    return Condition(("dept",), IN, frozenset(names))


@pytest.fixture(scope="module")
def dep():
    fx = departments()
    return fx, Evaluator(fx.object_model)


def _cp(dep, rules):
    fx, ev = dep
    return CandidatePolicy(ev, fx.au, rules)


# -- validity --------------------------------------------------------------------------


def test_is_valid(dep):
    fx, ev = dep
    good = Rule("Employee", [_dept("ChemEng")], "Document", (), (), {"read"})
    bad = Rule("Employee", (), "Document", (), (), {"read"})
    assert is_valid(ev, fx.au, good)
    assert not is_valid(ev, fx.au, bad)
    assert _cp(dep, []).is_valid(good)
    # the action matters too
    assert not is_valid(ev, fx.au, Rule("Employee", [_dept("ChemEng")], "Document", (), (), {"read", "delete"}))


# -- negation elimination -----------------------------------------------------------


def test_substep1_drops_a_redundant_negation(dep):
    neg = Condition(("dept",), IN, frozenset({"MechEng"}), neg=True)
    cp = _cp(dep, [Rule("Employee", [_dept("ChemEng"), neg], "Document", (), (), {"read"}),
                   Rule("Employee", [_dept("ElecEng")], "Document", (), (), {"read"})])
    hist = eliminate_negative_features(cp)
    assert hist == {1: 1}
    assert Rule("Employee", [_dept("ChemEng")], "Document", (), (), {"read"}) in cp.rules


def test_substep3_complement_on_single_valued_path(dep):
    fx, _ = dep
    neg = Condition(("dept",), IN, frozenset({"MechEng"}), neg=True)
    cp = _cp(dep, [Rule("Employee", [neg], "Document", (), (), {"read"})])
    assert cp.meaning() == {t for t in fx.au if t.action == "read" and t.resource.startswith("doc")}
    hist = eliminate_negative_features(cp)
    assert hist == {3: 1}
    assert cp.rules == [Rule("Employee", [_dept("ChemEng", "ElecEng")], "Document", (), (), {"read"})]


def _tags_instance():
    om = _om({"T": [], "U": [("tags", "T", MANY)], "R": []},
             [Obj("t0", "T"), Obj("t1", "T"), Obj("r", "R"),
              Obj("u0", "U", {"tags": ["t0"]}), Obj("u1", "U", {"tags": ["t1"]}),
              Obj("u2", "U", {"tags": []}), Obj("u3", "U", {"tags": ["t0", "t1"]})])
    rule = Rule("U", [Condition(("tags",), CONTAINS, "t0", neg=True)], "R", (), (), {"a"})
    ev = Evaluator(om)
    return ev, rule


def test_substep4_enumerates_ids_on_a_many_path():
    ev, rule = _tags_instance()
    au = ev.rule_meaning(rule)
    cp = CandidatePolicy(ev, au, [rule])
    hist = eliminate_negative_features(cp)
    assert hist == {4: 1}
    assert cp.rules == [Rule("U", [Condition((ID,), IN, {"u1", "u2"})], "R", (), (), {"a"})]
    assert cp.meaning() == au


def test_substep2_prefers_a_single_positive_feature():
    ev, rule = _tags_instance()
    # without u2 the non-t0 users are exactly those tagged t1
    au = {t for t in ev.rule_meaning(rule) if t.subject == "u1"}
    cp = CandidatePolicy(ev, au, [Rule("U", [Condition(("tags",), CONTAINS, "t0", neg=True),
                                             Condition(("tags",), CONTAINS, "t1")], "R", (), (), {"a"})])
    hist = eliminate_negative_features(cp)
    assert sum(hist.values()) == 1 and not cp.rules[0].negated_atoms()
    assert cp.meaning() == au


def _negated_constraint_instance():
    # the subject may not be the resource's owner, and no positive feature
    # or pair of features describes the remaining pairs
    om = _om({"U": [], "R": [("owner", "U", ONE)]},
             [Obj("u0", "U"), Obj("u1", "U"), Obj("u2", "U"),
              Obj("r0", "R", {"owner": "u0"}), Obj("r1", "R", {"owner": "u1"}), Obj("r2", "R", {"owner": "u2"})])
    ev = Evaluator(om)
    rule = Rule("U", (), "R", (), [Constraint((), EQUAL, ("owner",), neg=True)], {"a"})
    return ev, rule


def test_exhausted_negation_falls_back_to_id_split():
    ev, rule = _negated_constraint_instance()
    au = ev.rule_meaning(rule)
    cp = CandidatePolicy(ev, au, [rule])
    hist = eliminate_negative_features(cp, FeatureLimits())
    assert hist == {"split": 1}
    assert cp.meaning() == au
    assert all(not r.negated_atoms() for r in cp.rules)
    assert len(cp.rules) == 3


def test_negated_boolean_equality_splits_into_value_cases():
    # flag != locked is an exclusive or: no single positive rule expresses it
    from rebac_miner.model import BOOLEAN

    om = _om({"U": [("flag", BOOLEAN, ONE)], "R": [("locked", BOOLEAN, ONE)]},
             [Obj(f"u{i}", "U", {"flag": i % 2 == 0}) for i in range(4)] +
             [Obj(f"r{i}", "R", {"locked": i < 2}) for i in range(4)])
    ev = Evaluator(om)
    rule = Rule("U", (), "R", (), [Constraint(("flag",), EQUAL, ("locked",), neg=True)], {"a"})
    au = ev.rule_meaning(rule)
    cp = CandidatePolicy(ev, au, [rule])
    hist = eliminate_negative_features(cp, FeatureLimits(), strict=True)
    assert hist == {"cases": 1}
    assert sorted(cp.rules, key=Rule.sort_key) == sorted([
        Rule("U", [Condition(("flag",), IN, {False})], "R", [Condition(("locked",), IN, {True})], (), {"a"}),
        Rule("U", [Condition(("flag",), IN, {True})], "R", [Condition(("locked",), IN, {False})], (), {"a"}),
    ], key=Rule.sort_key)
    assert cp.meaning() == au


def test_strict_raises_when_exhausted():
    ev, rule = _negated_constraint_instance()
    cp = CandidatePolicy(ev, ev.rule_meaning(rule), [rule])
    with pytest.raises(NegationEliminationExhausted):
        eliminate_negative_features(cp, FeatureLimits(), strict=True)


# -- merge ----------------------------------------------------------------------------


def test_lub_examples():
    a = [_dept("A"), Condition(("tags",), CONTAINS, "x"), Condition(("tags",), CONTAINS, "y")]
    b = [_dept("B"), Condition(("tags",), CONTAINS, "x"), Condition(("flag",), IN, {True})]
    assert lub_conditions(a, b) == {_dept("A", "B"), Condition(("tags",), CONTAINS, "x")}
    assert lub_conditions(a, []) == frozenset()
    assert lub_conditions([_dept("A", "C")], [_dept("C")]) == {_dept("A", "C")}


def test_merge_pair_unions_actions():
    r1 = Rule("E", [_dept("A")], "D", (), [Constraint(("dept",), EQUAL, ("dept",))], {"read"})
    r2 = Rule("E", [_dept("B")], "D", (), [Constraint(("dept",), EQUAL, ("dept",))], {"edit"})
    assert mergeable(r1, r2)
    assert merge_pair(r1, r2) == Rule("E", [_dept("A", "B")], "D", (), [Constraint(("dept",), EQUAL, ("dept",))],
                                      {"read", "edit"})
    assert not mergeable(r1, Rule("E", [_dept("B")], "D", (), (), {"edit"}))


def test_merge_rules_valid_and_invalid(dep):
    r_chem = Rule("Employee", [_dept("ChemEng")], "Document", (), (), {"read"})
    r_elec = Rule("Employee", [_dept("ElecEng")], "Document", (), (), {"read"})
    cp = _cp(dep, [r_chem, r_elec])
    assert merge_rules(cp) == 1
    assert cp.rules == [Rule("Employee", [_dept("ChemEng", "ElecEng")], "Document", (), (), {"read"})]
    # edit is dept-restricted, so merging with an unconstrained read rule would over-grant
    edit = Rule("Employee", (), "Document", (), [Constraint(("dept",), EQUAL, ("dept",))], {"edit"})
    cp = _cp(dep, [r_chem, edit])
    assert merge_rules(cp) == 0


# -- simplification passes --------------------------------------------------------------


def test_pass1_removes_redundant_condition(dep):
    extra = Condition(("dept",), IN, frozenset({"MechEng", "ChemEng", "ElecEng"}))
    cp = _cp(dep, [Rule("Employee", [_dept("ChemEng", "ElecEng")], "Document", [extra], (), {"read"})])
    assert pass_remove_conditions(cp)
    assert cp.rules == [Rule("Employee", [_dept("ChemEng", "ElecEng")], "Document", (), (), {"read"})]
    assert not pass_remove_conditions(cp)


def test_pass2_removes_redundant_constraint(dep):
    con = Constraint(("dept",), EQUAL, ("dept",))
    cp = _cp(dep, [Rule("Employee", [_dept("ChemEng")], "Document", [_dept("ChemEng")], [con], {"read"})])
    assert pass_remove_constraints(cp)
    assert cp.rules[0].constraint == frozenset()


def test_pass3_drops_action_covered_by_weaker_rule(dep):
    con = Constraint(("dept",), EQUAL, ("dept",))
    weak = Rule("Employee", (), "Drawing", (), [con], {"read", "edit"})
    strong = Rule("Employee", [_dept("ChemEng")], "Drawing", (), [con], {"read"})
    cp = _cp(dep, [strong, weak])
    assert pass_overlapping_actions(cp)
    assert cp.rules == [weak]
    # every action pass 3 drops, pass 4 drops too
    cp4 = _cp(dep, [strong, weak])
    assert pass_redundant_actions(cp4)
    assert cp4.rules == [weak]


def test_pass4_semantic_redundancy_without_syntactic_inclusion(dep):
    both = Rule("Employee", [_dept("ChemEng", "ElecEng")], "Document", (), (), {"read"})
    chem = Rule("Employee", [_dept("ChemEng")], "Document", (), (), {"read"})
    cp = _cp(dep, [both, chem])
    assert not pass_overlapping_actions(cp)
    assert pass_redundant_actions(cp)
    assert len(cp.rules) == 1


def _alone(dep, rule):
    _, ev = dep
    return CandidatePolicy(ev, ev.rule_meaning(rule), [rule])


def test_pass5_constant_propagation(dep):
    con = Constraint(("dept",), EQUAL, ("dept",))
    cp = _alone(dep, Rule("Employee", [_dept("ChemEng")], "Drawing", (), [con], {"read", "edit"}))
    before = wsc_policy(cp.rules)
    assert pass_constant_propagation(cp)
    assert cp.rules == [Rule("Employee", [_dept("ChemEng")], "Drawing", [_dept("ChemEng")], (), {"read", "edit"})]
    assert wsc_policy(cp.rules) <= before


def test_pass6_removes_a_cycle():
    schema = {"D": [], "E": [("dept", "D", ONE), ("boss", "E", OPTIONAL)], "F": [("dept", "D", ONE)]}
    objs = [Obj("d0", "D"), Obj("d1", "D"),
            Obj("e0", "E", {"dept": "d0", "boss": None}), Obj("e1", "E", {"dept": "d0", "boss": "e0"}),
            Obj("e2", "E", {"dept": "d1", "boss": None}), Obj("e3", "E", {"dept": "d1", "boss": "e2"}),
            Obj("f0", "F", {"dept": "d0"}), Obj("f1", "F", {"dept": "d1"})]
    ev = Evaluator(_om(schema, objs))
    long = Rule("E", [Condition(("boss",), IN, {"e0", "e2"})], "F", (),
                [Constraint(("boss", "dept"), EQUAL, ("dept",))], {"a"})
    cp = CandidatePolicy(ev, ev.rule_meaning(long), [long])
    assert pass_remove_cycles(cp)
    assert cp.rules[0].constraint == {Constraint(("dept",), EQUAL, ("dept",))}
    assert cp.meaning() == cp.au


def test_pass7_constant_constraint_side(dep):
    con = Constraint(("dept",), EQUAL, ("dept",))
    cp = _alone(dep, Rule("Employee", [_dept("ChemEng")], "Drawing", (), [con], {"read", "edit"}))
    assert pass_constant_constraints(cp)
    assert cp.rules == [Rule("Employee", [_dept("ChemEng")], "Drawing", [_dept("ChemEng")], (), {"read", "edit"})]


# -- whole phase ------------------------------------------------------------------------------


def test_empty_au():
    ev, _ = _tags_instance()
    cp = CandidatePolicy(ev, frozenset(), [])
    stats = improve(cp)
    assert cp.rules == [] and stats["rounds"] == 1


@pytest.mark.parametrize("mode", [DTRM, DTRM_MINUS])
def test_improve_is_idempotent_on_fixture_rules(dep, mode):
    fx, ev = dep
    cp = CandidatePolicy(ev, fx.au, fx.rules)
    improve(cp, mode)
    first = list(cp.rules)
    improve(cp, mode)
    assert cp.rules == first
    assert cp.meaning() == fx.au


@settings(max_examples=40)
@given(om=object_models(), seed=st.integers(0, 10**6), mode=st.sampled_from([DTRM, DTRM_MINUS]))
def test_improve_preserves_meaning_and_never_grows_wsc(om, seed, mode):
    rng = random.Random(seed)
    ev = Evaluator(om)
    rules = [random_rule(rng, ev, "Emp", rng.choice(["Doc", "Proj"]), negation=True) for _ in range(4)]
    au = ev.policy_meaning(rules)
    cp = CandidatePolicy(ev, au, rules)
    trace = []
    improve(cp, mode, observer=lambda stage, rs: trace.append((stage, wsc_policy(rs), ev.policy_meaning(rs))))
    assert cp.meaning() == au
    names = {n for n, _ in SIMPLIFY_PASSES}
    prev = None
    for stage, w, meaning in trace:
        assert meaning == au, stage
        if stage == "negation_elimination":
            prev = w
            continue
        assert stage in names | {"merge"}
        if prev is not None:
            assert w <= prev, stage
        prev = w
    if mode == DTRM:
        assert all(not r.negated_atoms() for r in cp.rules)
    else:
        assert wsc_policy(cp.rules) <= wsc_policy(rules)
