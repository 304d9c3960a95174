"""Small hand-authored policies with seeded object models.

Each builder returns a :class:`Fixture`; the authorization set is always
computed from the fixture's rules.  Object counts stay between 20 and 100.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from functools import cached_property

from .engine import Evaluator
from .model import (
    BOOLEAN,
    CONTAINS,
    EQUAL,
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
    canonical_rules,
    check_rule,
)


@dataclass
class Fixture:
    name: str
    class_model: ClassModel
    object_model: ObjectModel
    rules: list
    actions: frozenset

    def __post_init__(self):
        self.rules = canonical_rules(self.rules)
        for r in self.rules:
            check_rule(self.class_model, r, self.actions)

    @cached_property
    def au(self) -> frozenset:
        return Evaluator(self.object_model).policy_meaning(self.rules)


def _cm(schema: dict) -> ClassModel:
    return ClassModel({cls: [FieldDecl(n, t, m) for n, t, m in fields] for cls, fields in schema.items()})


def _ids(prefix: str, n: int) -> list:
    return [f"{prefix}{i}" for i in range(n)]


def _some(rng: random.Random, pool: list, lo: int, hi: int) -> list:
    return sorted(rng.sample(pool, rng.randint(lo, min(hi, len(pool)))))


def _c(path, val, neg=False) -> Condition:
    return Condition(tuple(path.split(".")) if path else (), IN, frozenset([val] if not isinstance(val, (set, frozenset)) else val), neg)


def _has(path, val) -> Condition:
    return Condition(tuple(path.split(".")), CONTAINS, val)


def _k(spath, op, rpath, neg=False) -> Constraint:
    sp = tuple(spath.split(".")) if spath else ()
    rp = tuple(rpath.split(".")) if rpath else ()
    return Constraint(sp, op, rp, neg)


def healthcare(seed: int = 1) -> Fixture:
    rng = random.Random(seed)
    cm = _cm({
        "Ward": [], "Team": [], "Specialty": [],
        "Nurse": [("ward", "Ward", ONE)],
        "Doctor": [("teams", "Team", MANY), ("specialties", "Specialty", MANY)],
        "Patient": [("ward", "Ward", ONE), ("team", "Team", OPTIONAL)],
        "HealthRecord": [("patient", "Patient", ONE), ("topic", "Specialty", ONE),
                         ("author", "Doctor", OPTIONAL)],
    })
    wards, teams, specs = _ids("ward", 3), _ids("team", 3), _ids("spec", 3)
    nurses, doctors, patients, records = _ids("nurse", 5), _ids("doc", 5), _ids("pat", 8), _ids("hr", 18)
    objs = [Obj(i, "Ward") for i in wards] + [Obj(i, "Team") for i in teams] + [Obj(i, "Specialty") for i in specs]
    objs += [Obj(n, "Nurse", {"ward": wards[k % 3]}) for k, n in enumerate(nurses)]
    objs += [Obj(d, "Doctor", {"teams": _some(rng, teams, 1, 2), "specialties": _some(rng, specs, 1, 2)})
             for d in doctors]
    objs += [Obj(p, "Patient", {"ward": rng.choice(wards), "team": rng.choice(teams + [None])}) for p in patients]
    objs += [Obj(h, "HealthRecord", {"patient": rng.choice(patients), "topic": rng.choice(specs),
                                     "author": rng.choice(doctors + [None])}) for h in records]
    rules = [
        Rule("Nurse", (), "HealthRecord", (), [_k("ward", EQUAL, "patient.ward")], {"read"}),
        Rule("Doctor", (), "HealthRecord", (),
             [_k("teams", CONTAINS, "patient.team"), _k("specialties", CONTAINS, "topic")], {"read"}),
        Rule("Patient", (), "HealthRecord", (), [_k("", EQUAL, "patient")], {"read"}),
        Rule("Doctor", (), "HealthRecord", (), [_k("", EQUAL, "author")], {"read", "addItem"}),
    ]
    return Fixture("healthcare", cm, ObjectModel(cm, objs), rules, frozenset({"read", "addItem"}))


def physician_toy(seed: int = 2) -> Fixture:
    """One rule: non-trainee physicians read records that list them."""
    rng = random.Random(seed)
    cm = _cm({
        "Physician": [("isTrainee", BOOLEAN, ONE)],
        "MedicalRecord": [("physician", "Physician", MANY)],
    })
    phys = _ids("phy", 6)
    objs = [Obj(p, "Physician", {"isTrainee": k % 3 == 0}) for k, p in enumerate(phys)]
    objs += [Obj(m, "MedicalRecord", {"physician": _some(rng, phys, 1, 2)}) for m in _ids("mr", 14)]
    rules = [Rule("Physician", [_c("isTrainee", False)], "MedicalRecord", (),
                  [_k("", IN, "physician")], {"read"})]
    return Fixture("physician_toy", cm, ObjectModel(cm, objs), rules, frozenset({"read"}))


def project_management(seed: int = 3) -> Fixture:
    rng = random.Random(seed)
    cm = _cm({
        "Dept": [],
        "Employee": [("dept", "Dept", ONE), ("projects", "Project", MANY), ("isManager", BOOLEAN, ONE)],
        "Project": [("dept", "Dept", ONE), ("leader", "Employee", ONE)],
        "Task": [("project", "Project", ONE), ("assignee", "Employee", OPTIONAL)],
        "Budget": [("project", "Project", ONE)],
    })
    depts, emps, projs = _ids("dept", 3), _ids("emp", 10), _ids("proj", 5)
    members = {p: [] for p in projs}
    emp_projects = {}
    for k, e in enumerate(emps):
        ps = _some(rng, projs, 1, 2)
        emp_projects[e] = ps
        for p in ps:
            members[p].append(e)
    objs = [Obj(d, "Dept") for d in depts]
    objs += [Obj(e, "Employee", {"dept": depts[k % 3], "projects": emp_projects[e], "isManager": k % 4 == 0})
             for k, e in enumerate(emps)]
    objs += [Obj(p, "Project", {"dept": rng.choice(depts), "leader": rng.choice(members[p] or emps)}) for p in projs]
    tasks = _ids("task", 14)
    for t in tasks:
        p = rng.choice(projs)
        objs.append(Obj(t, "Task", {"project": p, "assignee": rng.choice(members[p] + [None])}))
    objs += [Obj(b, "Budget", {"project": projs[k % len(projs)]}) for k, b in enumerate(_ids("budget", 5))]
    rules = [
        Rule("Employee", (), "Task", (), [_k("projects", CONTAINS, "project")], {"read"}),
        Rule("Employee", (), "Task", (), [_k("", EQUAL, "assignee")], {"update"}),
        Rule("Employee", [_c("isManager", True)], "Budget", (), [_k("projects", CONTAINS, "project")],
             {"read", "approve"}),
        Rule("Employee", (), "Project", (), [_k("", EQUAL, "leader")], {"close"}),
        Rule("Employee", (), "Budget", (), [_k("dept", EQUAL, "project.dept")], {"view"}),
    ]
    acts = frozenset({"read", "update", "approve", "close", "view"})
    return Fixture("project_management", cm, ObjectModel(cm, objs), rules, acts)


def emr(seed: int = 4) -> Fixture:
    rng = random.Random(seed)
    cm = _cm({
        "Dept": [], "Patient": [],
        "Doctor": [("dept", "Dept", ONE), ("consults", "Patient", MANY)],
        "Nurse": [("dept", "Dept", ONE)],
        "Record": [("patient", "Patient", ONE), ("dept", "Dept", ONE), ("sensitive", BOOLEAN, ONE)],
    })
    depts, pats = _ids("dept", 3), _ids("pat", 8)
    objs = [Obj(d, "Dept") for d in depts] + [Obj(p, "Patient") for p in pats]
    objs += [Obj(d, "Doctor", {"dept": depts[k % 3], "consults": _some(rng, pats, 1, 3)})
             for k, d in enumerate(_ids("doc", 6))]
    objs += [Obj(n, "Nurse", {"dept": depts[k % 3]}) for k, n in enumerate(_ids("nurse", 6))]
    objs += [Obj(r, "Record", {"patient": rng.choice(pats), "dept": rng.choice(depts),
                               "sensitive": rng.random() < 0.4}) for r in _ids("rec", 20)]
    rules = [
        Rule("Doctor", (), "Record", (), [_k("consults", CONTAINS, "patient")], {"read"}),
        Rule("Nurse", (), "Record", [_c("sensitive", False)], [_k("dept", EQUAL, "dept")], {"read"}),
        Rule("Doctor", (), "Record", (), [_k("consults", CONTAINS, "patient"), _k("dept", EQUAL, "dept")],
             {"write"}),
        Rule("Patient", (), "Record", (), [_k("", EQUAL, "patient")], {"read"}),
    ]
    return Fixture("emr", cm, ObjectModel(cm, objs), rules, frozenset({"read", "write"}))


def university(seed: int = 5) -> Fixture:
    rng = random.Random(seed)
    cm = _cm({
        "Dept": [],
        "Course": [("dept", "Dept", ONE)],
        "Student": [("courses", "Course", MANY), ("dept", "Dept", ONE), ("isGrad", BOOLEAN, ONE)],
        "Faculty": [("teaches", "Course", MANY), ("dept", "Dept", ONE)],
        "Gradebook": [("course", "Course", ONE)],
        "Transcript": [("student", "Student", ONE)],
    })
    depts, courses = _ids("dept", 3), _ids("course", 6)
    studs = _ids("stu", 10)
    objs = [Obj(d, "Dept") for d in depts]
    objs += [Obj(c, "Course", {"dept": depts[k % 3]}) for k, c in enumerate(courses)]
    objs += [Obj(s, "Student", {"courses": _some(rng, courses, 1, 3), "dept": rng.choice(depts),
                                "isGrad": k % 3 == 0}) for k, s in enumerate(studs)]
    objs += [Obj(f, "Faculty", {"teaches": _some(rng, courses, 1, 2), "dept": depts[k % 3]})
             for k, f in enumerate(_ids("fac", 5))]
    objs += [Obj(g, "Gradebook", {"course": courses[k]}) for k, g in enumerate(_ids("gb", 6))]
    objs += [Obj(t, "Transcript", {"student": studs[k]}) for k, t in enumerate(_ids("tr", 10))]
    rules = [
        Rule("Faculty", (), "Gradebook", (), [_k("teaches", CONTAINS, "course")], {"read", "write"}),
        Rule("Student", (), "Gradebook", (), [_k("courses", CONTAINS, "course")], {"read"}),
        Rule("Student", [_c("isGrad", True)], "Gradebook", (), [_k("courses", CONTAINS, "course")], {"grade"}),
        Rule("Student", (), "Transcript", (), [_k("", EQUAL, "student")], {"read"}),
        Rule("Faculty", (), "Transcript", (), [_k("dept", EQUAL, "student.dept")], {"read"}),
    ]
    return Fixture("university", cm, ObjectModel(cm, objs), rules, frozenset({"read", "write", "grade"}))


def edocument(seed: int = 6) -> Fixture:
    rng = random.Random(seed)
    cm = _cm({
        "Company": [],
        "Employee": [("employer", "Company", ONE), ("workOn", "Project", MANY)],
        "Project": [("owner", "Company", ONE), ("relatedDoc", "Document", MANY)],
        "Document": [("author", "Employee", ONE)],
    })
    comps = ["LargeBank", "SmallFirm", "MidCorp"]
    emps, projs, docs = _ids("emp", 12), _ids("proj", 5), _ids("doc", 15)
    objs = [Obj(c, "Company") for c in comps]
    objs += [Obj(e, "Employee", {"employer": comps[k % 3], "workOn": _some(rng, projs, 0, 2)})
             for k, e in enumerate(emps)]
    objs += [Obj(p, "Project", {"owner": rng.choice(comps), "relatedDoc": _some(rng, docs, 1, 4)}) for p in projs]
    objs += [Obj(d, "Document", {"author": rng.choice(emps)}) for d in docs]
    rules = [
        Rule("Employee", [_c("employer", "LargeBank")], "Document", (),
             [_k("workOn.relatedDoc", CONTAINS, "")], {"read"}),
        Rule("Employee", (), "Document", (), [_k("", EQUAL, "author")], {"read", "edit"}),
        Rule("Employee", (), "Project", (), [_k("employer", EQUAL, "owner")], {"view"}),
    ]
    return Fixture("edocument", cm, ObjectModel(cm, objs), rules, frozenset({"read", "edit", "view"}))


def departments(seed: int = 7) -> Fixture:
    """Department-restricted access whose natural tree test is a negation."""
    rng = random.Random(seed)
    cm = _cm({
        "Dept": [],
        "Employee": [("dept", "Dept", ONE)],
        "Document": [("dept", "Dept", ONE)],
        "Drawing": [("dept", "Dept", ONE)],
    })
    depts = ["MechEng", "ChemEng", "ElecEng"]
    objs = [Obj(d, "Dept") for d in depts]
    objs += [Obj(e, "Employee", {"dept": depts[k % 3]}) for k, e in enumerate(_ids("emp", 9))]
    objs += [Obj(d, "Document", {"dept": rng.choice(depts)}) for d in _ids("doc", 8)]
    objs += [Obj(d, "Drawing", {"dept": rng.choice(depts)}) for d in _ids("dwg", 5)]
    rules = [
        Rule("Employee", [_c("dept", {"ChemEng", "ElecEng"})], "Document", (), (), {"read"}),
        Rule("Employee", (), "Document", (), [_k("dept", EQUAL, "dept")], {"edit"}),
        Rule("Employee", (), "Drawing", (), [_k("dept", EQUAL, "dept")], {"read", "edit"}),
    ]
    return Fixture("departments", cm, ObjectModel(cm, objs), rules, frozenset({"read", "edit"}))


def workforce(seed: int = 8) -> Fixture:
    rng = random.Random(seed)
    cm = _cm({
        "Office": [], "Provider": [],
        "Worker": [("office", "Office", ONE), ("supervisor", "Worker", OPTIONAL), ("isSenior", BOOLEAN, ONE)],
        "WorkOrder": [("office", "Office", ONE), ("provider", "Provider", ONE), ("assigned", "Worker", MANY)],
        "Timecard": [("worker", "Worker", ONE)],
    })
    offices, provs = _ids("office", 3), _ids("prov", 2)
    workers = _ids("wk", 12)
    objs = [Obj(o, "Office") for o in offices] + [Obj(p, "Provider") for p in provs]
    for k, w in enumerate(workers):
        sup = workers[k // 4 * 4] if k % 4 else None
        objs.append(Obj(w, "Worker", {"office": offices[(k // 4) % 3], "supervisor": sup, "isSenior": k % 4 == 0}))
    objs += [Obj(o, "WorkOrder", {"office": rng.choice(offices), "provider": rng.choice(provs),
                                  "assigned": _some(rng, workers, 1, 3)}) for o in _ids("wo", 10)]
    objs += [Obj(t, "Timecard", {"worker": workers[k % 12]}) for k, t in enumerate(_ids("tc", 12))]
    rules = [
        Rule("Worker", (), "WorkOrder", (), [_k("", IN, "assigned")], {"view", "update"}),
        Rule("Worker", [_c("isSenior", True)], "WorkOrder", (), [_k("office", EQUAL, "office")], {"view", "assign"}),
        Rule("Worker", (), "Timecard", (), [_k("", EQUAL, "worker")], {"submit"}),
        Rule("Worker", (), "Timecard", (), [_k("", EQUAL, "worker.supervisor")], {"approve"}),
    ]
    acts = frozenset({"view", "update", "assign", "submit", "approve"})
    return Fixture("workforce", cm, ObjectModel(cm, objs), rules, acts)


BUILDERS = {
    "healthcare": healthcare,
    "project_management": project_management,
    "emr": emr,
    "university": university,
    "edocument": edocument,
    "departments": departments,
    "workforce": workforce,
}


def all_fixtures() -> list:
    """The bundled mini policies (3-10 rules each), in name order."""
    return [BUILDERS[name]() for name in sorted(BUILDERS)]
