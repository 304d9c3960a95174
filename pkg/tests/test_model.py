import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rebac_miner.model import (
    BOOLEAN,
    CONTAINS,
    EQUAL,
    IN,
    MANY,
    ONE,
    OPTIONAL,
    SUBSETEQ,
    SUPSETEQ,
    ClassModel,
    Condition,
    Constraint,
    FieldDecl,
    ModelError,
    Obj,
    ObjectModel,
    PathError,
    PolicyError,
    Rule,
    SraTuple,
    UnknownObjectError,
    make_condition,
    make_constraint,
    nav,
    policy_meaning,
    rule_meaning,
    satisfies_condition,
    satisfies_constraint,
    satisfies_rule,
    wsc_atomic,
    wsc_policy,
    wsc_rule,
)

from helpers import brute_meaning, object_models, random_object_model, random_rule, toy_class_model
from rebac_miner.engine import Evaluator


def _cm(schema):
    return ClassModel({c: [FieldDecl(*f) for f in fs] for c, fs in schema.items()})


@pytest.fixture
def edoc():
    cm = _cm({
        "Company": [],
        "Employee": [("employer", "Company", ONE), ("workOn", "Project", MANY), ("dept", "Dept", OPTIONAL)],
        "Project": [("relatedDoc", "Document", MANY)],
        "Document": [],
        "Dept": [],
    })
    objs = [
        Obj("LargeBank", "Company"), Obj("Other", "Company"), Obj("CompSci", "Dept"),
        Obj("o", "Employee", {"employer": "LargeBank", "workOn": ["p1", "p2"], "dept": "CompSci"}),
        Obj("u", "Employee", {"employer": "Other", "workOn": [], "dept": None}),
        Obj("p1", "Project", {"relatedDoc": ["d1"]}),
        Obj("p2", "Project", {"relatedDoc": ["d1", "d2"]}),
        Obj("d1", "Document"), Obj("d2", "Document"), Obj("d3", "Document"),
    ]
    return ObjectModel(cm, objs)


# -- class / object model validation ----------------------------------------------------


def test_boolean_fields_must_have_multiplicity_one():
    with pytest.raises(ModelError):
        _cm({"A": [("b", BOOLEAN, MANY)]})


def test_unknown_reference_type_rejected():
    with pytest.raises(ModelError):
        _cm({"A": [("x", "Nope", ONE)]})


def test_id_is_implicit_and_not_declarable():
    with pytest.raises(ModelError):
        _cm({"A": [("id", "A", ONE)]})
    cm = _cm({"A": []})
    assert cm.field("A", "id").multiplicity == ONE
    assert [f.name for f in cm.fields("A")] == []


def test_duplicate_field_rejected():
    with pytest.raises(ModelError):
        ClassModel({"A": [FieldDecl("x", BOOLEAN, ONE), FieldDecl("x", BOOLEAN, ONE)]})


def test_dangling_reference_names_object_and_field():
    cm = _cm({"A": [("b", "B", ONE)], "B": []})
    with pytest.raises(ModelError, match=r"a1.*field b.*ghost"):
        ObjectModel(cm, [Obj("a1", "A", {"b": "ghost"})])


def test_wrong_multiplicity_values_rejected():
    cm = _cm({"A": [("b", "B", ONE), ("bs", "B", MANY)], "B": []})
    with pytest.raises(ModelError):
        ObjectModel(cm, [Obj("x", "B"), Obj("a", "A", {"b": ["x"], "bs": []})])
    with pytest.raises(ModelError):
        ObjectModel(cm, [Obj("x", "B"), Obj("a", "A", {"b": None, "bs": []})])


def test_duplicate_object_ids_rejected():
    cm = _cm({"A": []})
    with pytest.raises(ModelError):
        ObjectModel(cm, [Obj("x", "A"), Obj("x", "A")])


def test_path_multiplicity_rule():
    cm = toy_class_model()
    assert cm.path_multiplicity("Emp", ("dept",)) == ONE
    assert cm.path_multiplicity("Emp", ("boss", "dept")) == OPTIONAL
    assert cm.path_multiplicity("Emp", ("projects", "dept")) == MANY
    assert cm.path_multiplicity("Emp", ()) == ONE
    assert cm.path_type("Emp", ("projects", "docs")) == "Doc"


# -- nav ---------------------------------------------------------------------------------


def test_nav_dept_id(edoc):
    assert nav(edoc, "o", ("dept", "id")) == "CompSci"


def test_nav_empty_path_is_self(edoc):
    assert nav(edoc, "o", ()) == "o"


def test_nav_many_path_flattens(edoc):
    # hand enumeration: o -> {p1, p2}; p1 -> {d1}; p2 -> {d1, d2}
    assert nav(edoc, "o", ("workOn", "relatedDoc")) == frozenset({"d1", "d2"})
    assert nav(edoc, "u", ("workOn", "relatedDoc")) == frozenset()


def test_nav_absent_value(edoc):
    assert nav(edoc, "u", ("dept",)) is None
    assert nav(edoc, "u", ("dept", "id")) is None


def test_nav_structural_errors_are_not_bottom(edoc):
    with pytest.raises(UnknownObjectError):
        nav(edoc, "nobody", ("dept",))
    with pytest.raises(PathError):
        nav(edoc, "o", ("salary",))


def test_nav_many_through_absent_intermediate():
    om = random_object_model(random.Random(0))
    for e in om.of_type("Emp"):
        boss = om.field_value(e, "boss")
        expected = frozenset() if boss is None else om.field_value(boss, "projects")
        assert nav(om, e, ("boss", "projects")) == expected


# -- satisfaction ---------------------------------------------------------------------------


def test_condition_in(edoc):
    c = Condition(("dept", "id"), IN, {"CompSci"})
    assert satisfies_condition(edoc, "o", c)
    assert not satisfies_condition(edoc, "o", c.negate())


def test_condition_bottom_truth_table(edoc):
    c = Condition(("dept",), IN, {"CompSci"})
    assert not satisfies_condition(edoc, "u", c)
    assert satisfies_condition(edoc, "u", c.negate())


def test_constraint_contains():
    cm = _cm({"Doc": [("specialties", "T", MANY)], "Rec": [("topic", "T", ONE)], "T": []})
    om = ObjectModel(cm, [Obj("a", "T"), Obj("b", "T"), Obj("s", "Doc", {"specialties": ["a", "b"]}),
                          Obj("r", "Rec", {"topic": "a"})])
    assert satisfies_constraint(om, "s", "r", Constraint(("specialties",), CONTAINS, ("topic",)))


def test_constraint_supseteq_empty_sets():
    cm = _cm({"A": [("xs", "T", MANY)], "T": []})
    om = ObjectModel(cm, [Obj("a", "A", {"xs": []}), Obj("b", "A", {"xs": []})])
    assert satisfies_constraint(om, "a", "b", Constraint(("xs",), SUPSETEQ, ("xs",)))


# truth-table oracle for the positive comparison, written out case by case
_BOT = None


def _oracle(op, a, b):
    if op == EQUAL:
        if a is _BOT or b is _BOT:
            return False
        return a == b
    if op == IN:
        return a is not _BOT and b is not _BOT and a in b
    if op == CONTAINS:
        return a is not _BOT and b is not _BOT and b in a
    if op == SUPSETEQ:
        return set(a) >= set(b)
    return set(a) <= set(b)


def test_constraint_bottom_truth_table():
    cm = _cm({"T": [], "A": [("one", "T", OPTIONAL), ("many", "T", MANY)]})
    singles = [None, "t1", "t2"]
    sets = [(), ("t1",), ("t1", "t2")]
    for (s1, m1), (s2, m2) in itertools.product(itertools.product(singles, sets), repeat=2):
        om = ObjectModel(cm, [Obj("t1", "T"), Obj("t2", "T"),
                              Obj("x", "A", {"one": s1, "many": list(m1)}),
                              Obj("y", "A", {"one": s2, "many": list(m2)})])
        cases = [
            (EQUAL, ("one",), ("one",), s1, s2),
            (IN, ("one",), ("many",), s1, m2),
            (CONTAINS, ("many",), ("one",), m1, s2),
            (SUPSETEQ, ("many",), ("many",), m1, m2),
            (SUBSETEQ, ("many",), ("many",), m1, m2),
        ]
        for op, sp, rp, a, b in cases:
            con = Constraint(sp, op, rp)
            assert satisfies_constraint(om, "x", "y", con) == _oracle(op, a, b), (op, a, b)
            assert satisfies_constraint(om, "x", "y", con.negate()) != _oracle(op, a, b)


def test_in_with_bottom_subject_side_is_false():
    cm = _cm({"T": [], "A": [("one", "T", OPTIONAL), ("many", "T", MANY)]})
    om = ObjectModel(cm, [Obj("t", "T"), Obj("x", "A", {"one": None, "many": ["t"]})])
    assert not satisfies_constraint(om, "x", "x", Constraint(("one",), IN, ("many",)))


def _edoc_rule():
    return Rule("Employee", [Condition(("employer",), IN, {"LargeBank"})], "Document", (),
                [Constraint(("workOn", "relatedDoc"), CONTAINS, ())], {"read"})


def test_satisfies_rule_edocument_example(edoc):
    rule = _edoc_rule()
    assert satisfies_rule(edoc, SraTuple("o", "d2", "read"), rule)
    assert not satisfies_rule(edoc, SraTuple("o", "d2", "send"), rule)
    assert not satisfies_rule(edoc, SraTuple("o", "d3", "read"), rule)
    assert not satisfies_rule(edoc, SraTuple("u", "d1", "read"), rule)


def test_satisfies_rule_type_guard(edoc):
    rule = Rule("Project", (), "Document", (), (), {"read"})
    assert not satisfies_rule(edoc, SraTuple("o", "d1", "read"), rule)


def test_empty_meaning_for_unsatisfiable_condition(edoc):
    rule = Rule("Employee", [Condition(("employer",), IN, {"NoSuchCompany"})], "Document", (), (), {"read"})
    assert rule_meaning(edoc, rule) == frozenset()


def test_policy_meaning_is_union(edoc):
    r1 = _edoc_rule()
    r2 = Rule("Employee", (), "Project", (), (), {"view"})
    assert policy_meaning(edoc, [r1, r2]) == rule_meaning(edoc, r1) | rule_meaning(edoc, r2)


def test_three_object_brute_force():
    cm = _cm({"A": [("peer", "A", OPTIONAL)]})
    om = ObjectModel(cm, [Obj("a", "A", {"peer": "b"}), Obj("b", "A", {"peer": None}), Obj("c", "A", {"peer": "a"})])
    rule = Rule("A", (), "A", (), [Constraint(("peer",), EQUAL, ())], {"x"})
    assert rule_meaning(om, rule) == brute_meaning(om, [rule], ("x",)) == {
        SraTuple("a", "b", "x"), SraTuple("c", "a", "x")}


# -- operator coupling ------------------------------------------------------------------


def test_condition_operator_must_match_multiplicity():
    cm = toy_class_model()
    assert make_condition(cm, "Emp", "projects", ["proj0"]).op == CONTAINS
    assert make_condition(cm, "Emp", "dept", ["dept0"]).op == IN
    from rebac_miner.model import check_condition

    with pytest.raises(PolicyError):
        check_condition(cm, "Emp", Condition(("projects",), IN, {"proj0"}))
    with pytest.raises(PolicyError):
        check_condition(cm, "Emp", Condition(("dept",), CONTAINS, "dept0"))


def test_constraint_operator_and_type_checks():
    cm = toy_class_model()
    assert make_constraint(cm, "Emp", "Doc", "", "owner").op == EQUAL
    assert make_constraint(cm, "Emp", "Proj", "dept", "dept").op == EQUAL
    assert make_constraint(cm, "Emp", "Doc", "projects.docs", "").op == CONTAINS
    with pytest.raises(PolicyError):
        make_constraint(cm, "Emp", "Doc", "dept", "owner")
    with pytest.raises(PolicyError):
        make_constraint(cm, "Emp", "Doc", "", "owner", op=IN)


def test_condition_rejects_empty_value_set():
    with pytest.raises(PolicyError):
        Condition(("dept",), IN, [])


def test_rule_needs_an_action():
    with pytest.raises(PolicyError):
        Rule("A", (), "B", (), (), ())


# -- WSC --------------------------------------------------------------------------------


def test_wsc_examples():
    c = Condition(("dept", "id"), IN, {"CompSci"})
    assert wsc_atomic(c) == 3
    assert wsc_atomic(c.negate()) == 4
    assert wsc_atomic(Constraint(("specialties",), CONTAINS, ("topic",))) == 2
    assert wsc_rule(Rule("A", (), "B", (), (), {"read"})) == 1
    assert wsc_rule(_edoc_rule()) == 5


def test_wsc_policy_additive():
    r = _edoc_rule()
    r2 = Rule("Employee", (), "Project", (), (), {"view"})
    assert wsc_policy([r, r2]) == wsc_rule(r) + wsc_rule(r2)
    assert wsc_policy([r, r]) == 2 * wsc_rule(r)


# -- properties --------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(om=object_models(), seed=st.integers(0, 10**6))
def test_meaning_matches_exhaustive_oracle(om, seed):
    rng = random.Random(seed)
    ev = Evaluator(om)
    types = ["Emp", "Proj", "Doc"]
    rules = [random_rule(rng, ev, rng.choice(types), rng.choice(types)) for _ in range(3)]
    assert policy_meaning(om, rules) == brute_meaning(om, rules)


@settings(max_examples=60, deadline=None)
@given(om=object_models(), seed=st.integers(0, 10**6))
def test_negation_involution_and_wsc_positive(om, seed):
    rng = random.Random(seed)
    ev = Evaluator(om)
    rule = random_rule(rng, ev, "Emp", "Doc")
    assert wsc_rule(rule) >= 1
    for atom in rule.atoms:
        twice = atom.negate().negate()
        assert twice == atom
        for s, r in itertools.product(om.of_type("Emp"), om.of_type("Doc")):
            if isinstance(atom, Condition):
                o = s if atom in rule.subject_condition else r
                assert satisfies_condition(om, o, twice) == satisfies_condition(om, o, atom)
            else:
                assert satisfies_constraint(om, s, r, twice) == satisfies_constraint(om, s, r, atom)
