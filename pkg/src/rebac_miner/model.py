"""The ORAL2 policy language and its negation extension.

Class models, object models, path navigation, atomic conditions and
constraints, rules, and the brute-force meaning of rules and policies.
Everything here is deliberately simple and object-at-a-time; the
vectorized evaluator in :mod:`rebac_miner.engine` is checked against it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Optional, Union

ONE = "one"
OPTIONAL = "optional"
MANY = "many"
MULTIPLICITIES = (ONE, OPTIONAL, MANY)

BOOLEAN = "Boolean"
STRING = "String"
ID = "id"

IN = "in"
CONTAINS = "contains"
EQUAL = "equal"
SUPSETEQ = "supseteq"
SUBSETEQ = "subseteq"
CONDITION_OPS = (IN, CONTAINS)
CONSTRAINT_OPS = (EQUAL, IN, CONTAINS, SUPSETEQ, SUBSETEQ)

Atomic = Union[str, bool]
Value = Union[Atomic, frozenset, None]
Path = tuple


class PolicyError(Exception):
    """Structural error: bad model, ill-typed path, unknown object."""


class ModelError(PolicyError):
    pass


class PathError(PolicyError):
    pass


class UnknownObjectError(PolicyError):
    pass


def as_path(p) -> tuple:
    if p is None:
        return ()
    if isinstance(p, str):
        return tuple(s for s in p.split(".") if s)
    return tuple(p)


def atom_key(v: Atomic) -> tuple:
    """Total order on atomic values: Booleans (False < True) before ids."""
    if isinstance(v, bool):
        return (0, int(v), "")
    return (1, 0, v)


def sorted_atoms(values: Iterable[Atomic]) -> list:
    return sorted(values, key=atom_key)


# -- class model ------------------------------------------------------------


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: str
    multiplicity: str = ONE


_ID_FIELD = FieldDecl(ID, STRING, ONE)


def _combine_multiplicity(mults: Iterable[str]) -> str:
    mults = list(mults)
    if MANY in mults:
        return MANY
    if OPTIONAL in mults:
        return OPTIONAL
    return ONE


class ClassModel:
    """A set of class declarations; every class implicitly has ``id``."""

    def __init__(self, classes: Mapping[str, Iterable[FieldDecl]]):
        self.classes: dict[str, dict[str, FieldDecl]] = {}
        for name in sorted(classes):
            if name in (BOOLEAN, STRING):
                raise ModelError(f"class name {name!r} is reserved")
            fields: dict[str, FieldDecl] = {}
            for fd in classes[name]:
                if fd.name == ID:
                    raise ModelError(f"{name}: field 'id' is implicit and may not be declared")
                if fd.name in fields:
                    raise ModelError(f"{name}: duplicate field {fd.name!r}")
                if fd.multiplicity not in MULTIPLICITIES:
                    raise ModelError(f"{name}.{fd.name}: bad multiplicity {fd.multiplicity!r}")
                fields[fd.name] = fd
            self.classes[name] = fields
        for name, fields in self.classes.items():
            for fd in fields.values():
                if fd.type == BOOLEAN:
                    if fd.multiplicity != ONE:
                        raise ModelError(f"{name}.{fd.name}: Boolean fields have multiplicity one")
                elif fd.type not in self.classes:
                    raise ModelError(f"{name}.{fd.name}: unknown type {fd.type!r}")

    def __eq__(self, other):
        return isinstance(other, ClassModel) and self.classes == other.classes

    def __repr__(self):
        return f"ClassModel({sorted(self.classes)})"

    def class_names(self) -> list:
        return sorted(self.classes)

    def fields(self, cls: str) -> list:
        """Declared fields of `cls` in name order (``id`` excluded)."""
        return [self.classes[cls][n] for n in sorted(self.classes[cls])]

    def field(self, cls: str, name: str) -> FieldDecl:
        if cls not in self.classes:
            raise PathError(f"unknown class {cls!r}")
        if name == ID:
            return _ID_FIELD
        try:
            return self.classes[cls][name]
        except KeyError:
            raise PathError(f"class {cls} has no field {name!r}") from None

    def path_fields(self, cls: str, path) -> list:
        """Field declarations traversed by `path` from `cls`."""
        out = []
        cur = cls
        for step in as_path(path):
            if cur in (BOOLEAN, STRING):
                raise PathError(f"cannot dereference {step!r} on {cur} value")
            fd = self.field(cur, step)
            out.append(fd)
            cur = fd.type
        return out

    def path_type(self, cls: str, path) -> str:
        if cls not in self.classes:
            raise PathError(f"unknown class {cls!r}")
        fds = self.path_fields(cls, path)
        return fds[-1].type if fds else cls

    def path_multiplicity(self, cls: str, path) -> str:
        if cls not in self.classes:
            raise PathError(f"unknown class {cls!r}")
        return _combine_multiplicity(fd.multiplicity for fd in self.path_fields(cls, path))

    def is_many(self, cls: str, path) -> bool:
        return self.path_multiplicity(cls, path) == MANY


# -- object model -----------------------------------------------------------


@dataclass(frozen=True)
class Obj:
    id: str
    type: str
    fields: Mapping[str, Value] = field(default_factory=dict)


class ObjectModel:
    """Objects consistent with a class model, keyed by unique id.

    Field values are normalized on load: multiplicity one holds an atomic,
    optional holds an atomic or None, many holds a frozenset.
    """

    def __init__(self, class_model: ClassModel, objects: Iterable[Obj]):
        self.class_model = class_model
        self.objects: dict[str, Obj] = {}
        for o in objects:
            if not isinstance(o.id, str) or not o.id:
                raise ModelError(f"object id must be a non-empty string: {o.id!r}")
            if o.id in self.objects:
                raise ModelError(f"duplicate object id {o.id!r}")
            if o.type not in class_model.classes:
                raise ModelError(f"object {o.id}: unknown class {o.type!r}")
            self.objects[o.id] = Obj(o.id, o.type, self._normalize(o))
        self._by_type: dict[str, tuple] = {}
        for oid in sorted(self.objects):
            self._by_type.setdefault(self.objects[oid].type, [])
            self._by_type[self.objects[oid].type].append(oid)
        self._by_type = {k: tuple(v) for k, v in self._by_type.items()}
        self._check_references()

    def _normalize(self, o: Obj) -> dict:
        decls = self.class_model.classes[o.type]
        for fname in o.fields:
            if fname not in decls:
                raise ModelError(f"object {o.id}: class {o.type} has no field {fname!r}")
        out = {}
        for fname, fd in decls.items():
            raw = o.fields.get(fname)
            if fd.multiplicity == MANY:
                if raw is None:
                    raw = ()
                if isinstance(raw, (str, bool)):
                    raise ModelError(f"object {o.id}, field {fname}: expected a set of values")
                out[fname] = frozenset(raw)
            else:
                if isinstance(raw, (list, tuple, set, frozenset)):
                    raise ModelError(f"object {o.id}, field {fname}: expected a single value")
                if raw is None and fd.multiplicity == ONE:
                    raise ModelError(f"object {o.id}, field {fname}: missing value for multiplicity one")
                out[fname] = raw
            vals = out[fname] if isinstance(out[fname], frozenset) else [out[fname]]
            for v in vals:
                if v is None:
                    continue
                if fd.type == BOOLEAN:
                    if not isinstance(v, bool):
                        raise ModelError(f"object {o.id}, field {fname}: expected Boolean, got {v!r}")
                elif not isinstance(v, str):
                    raise ModelError(f"object {o.id}, field {fname}: expected object id, got {v!r}")
        return out

    def _check_references(self):
        for o in self.objects.values():
            for fname, fd in self.class_model.classes[o.type].items():
                if fd.type == BOOLEAN:
                    continue
                v = o.fields[fname]
                for ref in (v if isinstance(v, frozenset) else [v]):
                    if ref is None:
                        continue
                    target = self.objects.get(ref)
                    if target is None:
                        raise ModelError(f"object {o.id}, field {fname}: dangling reference {ref!r}")
                    if target.type != fd.type:
                        raise ModelError(
                            f"object {o.id}, field {fname}: {ref!r} has type {target.type}, expected {fd.type}"
                        )

    def __len__(self):
        return len(self.objects)

    def __contains__(self, oid):
        return oid in self.objects

    def get(self, oid: str) -> Obj:
        try:
            return self.objects[oid]
        except (KeyError, TypeError):
            raise UnknownObjectError(f"unknown object {oid!r}") from None

    def type_of(self, oid: str) -> str:
        return self.get(oid).type

    def of_type(self, cls: str) -> tuple:
        """Ids of instances of `cls`, sorted."""
        return self._by_type.get(cls, ())

    def field_value(self, oid: str, fname: str) -> Value:
        if fname == ID:
            self.get(oid)
            return oid
        o = self.get(oid)
        try:
            return o.fields[fname]
        except KeyError:
            raise PathError(f"class {o.type} has no field {fname!r}") from None


# -- navigation ---------------------------------------------------------------


def nav(om: ObjectModel, oid: str, path) -> Value:
    """Follow `path` from object `oid`.

    Returns None for an absent value, an atomic for single-valued paths, or
    a frozenset for multiplicity-many paths (absent intermediates contribute
    nothing). The empty path denotes the object itself.
    """
    path = as_path(path)
    obj = om.get(oid)
    mult = om.class_model.path_multiplicity(obj.type, path)
    if not path:
        return oid
    if mult == MANY:
        cur: set = {oid}
        for step in path:
            nxt: set = set()
            for o in cur:
                v = om.field_value(o, step)
                if v is None:
                    continue
                if isinstance(v, frozenset):
                    nxt |= v
                else:
                    nxt.add(v)
            cur = nxt
        return frozenset(cur)
    cur_v: Value = oid
    for step in path:
        cur_v = om.field_value(cur_v, step)
        if cur_v is None:
            return None
    return cur_v


# -- atomics ------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    """Atomic condition ``<path, op, val>``, possibly negated.

    `val` is a frozenset for op ``in`` and a single atomic for ``contains``.
    """

    path: tuple
    op: str
    val: object
    neg: bool = False

    def __post_init__(self):
        object.__setattr__(self, "path", as_path(self.path))
        if not self.path:
            raise PolicyError("atomic condition needs a non-empty path")
        if self.op == IN:
            val = self.val
            if isinstance(val, (str, bool)):
                val = (val,)
            val = frozenset(val)
            if not val:
                raise PolicyError("atomic condition with op 'in' needs a non-empty value set")
            object.__setattr__(self, "val", val)
        elif self.op == CONTAINS:
            if not isinstance(self.val, (str, bool)):
                raise PolicyError("atomic condition with op 'contains' needs a single atomic value")
        else:
            raise PolicyError(f"bad condition operator {self.op!r}")
        object.__setattr__(self, "neg", bool(self.neg))

    @property
    def values(self) -> frozenset:
        return self.val if self.op == IN else frozenset((self.val,))

    def negate(self) -> "Condition":
        return replace(self, neg=not self.neg)

    def positive(self) -> "Condition":
        return replace(self, neg=False) if self.neg else self

    def sort_key(self) -> tuple:
        vals = tuple(atom_key(v) for v in sorted_atoms(self.values))
        return (self.path, self.op, vals, self.neg)

    def __str__(self):
        return format_condition(self)


@dataclass(frozen=True)
class Constraint:
    """Atomic constraint ``<subjectPath, op, resourcePath>``, possibly negated."""

    spath: tuple
    op: str
    rpath: tuple
    neg: bool = False

    def __post_init__(self):
        object.__setattr__(self, "spath", as_path(self.spath))
        object.__setattr__(self, "rpath", as_path(self.rpath))
        if self.op not in CONSTRAINT_OPS:
            raise PolicyError(f"bad constraint operator {self.op!r}")
        object.__setattr__(self, "neg", bool(self.neg))

    def negate(self) -> "Constraint":
        return replace(self, neg=not self.neg)

    def positive(self) -> "Constraint":
        return replace(self, neg=False) if self.neg else self

    def sort_key(self) -> tuple:
        return (self.spath, self.op, self.rpath, self.neg)

    def __str__(self):
        return format_constraint(self)


def condition_op(cm: ClassModel, cls: str, path) -> str:
    """The operator a condition on `path` must use."""
    return CONTAINS if cm.is_many(cls, path) else IN


def constraint_ops(cm: ClassModel, cs: str, spath, cr: str, rpath) -> tuple:
    """Operators compatible with the two paths' multiplicities."""
    sm = cm.is_many(cs, spath)
    rm = cm.is_many(cr, rpath)
    if not sm and not rm:
        return (EQUAL,)
    if not sm and rm:
        return (IN,)
    if sm and not rm:
        return (CONTAINS,)
    return (SUPSETEQ, SUBSETEQ)


def make_condition(cm: ClassModel, cls: str, path, values, neg: bool = False) -> Condition:
    """Build a well-typed condition, choosing the operator from the path."""
    path = as_path(path)
    op = condition_op(cm, cls, path)
    if op == CONTAINS:
        if not isinstance(values, (str, bool)):
            values = list(values)
            if len(values) != 1:
                raise PolicyError(f"path {'.'.join(path)} is multi-valued: 'contains' takes one value")
            values = values[0]
    cond = Condition(path, op, values, neg)
    check_condition(cm, cls, cond)
    return cond


def make_constraint(cm: ClassModel, cs: str, cr: str, spath, rpath, op: Optional[str] = None,
                    neg: bool = False) -> Constraint:
    ops = constraint_ops(cm, cs, spath, cr, rpath)
    if op is None:
        op = ops[0]
    con = Constraint(spath, op, rpath, neg)
    check_constraint(cm, cs, cr, con)
    return con


def check_condition(cm: ClassModel, cls: str, cond: Condition) -> None:
    """Reject conditions that are ill-typed for objects of class `cls`."""
    ptype = cm.path_type(cls, cond.path)
    expected = condition_op(cm, cls, cond.path)
    if cond.op != expected:
        raise PolicyError(
            f"condition on {cls}.{'.'.join(cond.path)}: operator must be {expected!r}, got {cond.op!r}"
        )
    for v in cond.values:
        if ptype == BOOLEAN and not isinstance(v, bool):
            raise PolicyError(f"condition on {cls}.{'.'.join(cond.path)}: expected Boolean constant, got {v!r}")
        if ptype != BOOLEAN and not isinstance(v, str):
            raise PolicyError(f"condition on {cls}.{'.'.join(cond.path)}: expected id constant, got {v!r}")


def check_constraint(cm: ClassModel, cs: str, cr: str, con: Constraint) -> None:
    st = cm.path_type(cs, con.spath)
    rt = cm.path_type(cr, con.rpath)
    if st != rt:
        raise PolicyError(f"constraint {con}: path types differ ({st} vs {rt})")
    ops = constraint_ops(cm, cs, con.spath, cr, con.rpath)
    if con.op not in ops:
        raise PolicyError(f"constraint {con}: operator {con.op!r} incompatible with multiplicities; use {ops}")


# -- rules and policies ---------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    subject_type: str
    subject_condition: frozenset = frozenset()
    resource_type: str = ""
    resource_condition: frozenset = frozenset()
    constraint: frozenset = frozenset()
    actions: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "subject_condition", frozenset(self.subject_condition))
        object.__setattr__(self, "resource_condition", frozenset(self.resource_condition))
        object.__setattr__(self, "constraint", frozenset(self.constraint))
        acts = self.actions
        if isinstance(acts, str):
            acts = (acts,)
        object.__setattr__(self, "actions", frozenset(acts))
        if not self.actions:
            raise PolicyError("a rule needs at least one action")

    @property
    def atoms(self) -> list:
        return list(self.subject_condition) + list(self.resource_condition) + list(self.constraint)

    def negated_atoms(self) -> list:
        return [a for a in self.atoms if a.neg]

    def sort_key(self) -> tuple:
        return (
            self.subject_type,
            self.resource_type,
            tuple(c.sort_key() for c in sorted(self.subject_condition, key=Condition.sort_key)),
            tuple(c.sort_key() for c in sorted(self.resource_condition, key=Condition.sort_key)),
            tuple(c.sort_key() for c in sorted(self.constraint, key=Constraint.sort_key)),
            tuple(sorted(self.actions)),
        )

    def __str__(self):
        return format_rule(self)


def canonical_rules(rules: Iterable[Rule]) -> list:
    """Deduplicated rules in canonical order."""
    return sorted(set(rules), key=Rule.sort_key)


def check_rule(cm: ClassModel, rule: Rule, actions: Optional[Iterable[str]] = None) -> None:
    for cls in (rule.subject_type, rule.resource_type):
        if cls not in cm.classes:
            raise PolicyError(f"rule {rule}: unknown class {cls!r}")
    for c in rule.subject_condition:
        check_condition(cm, rule.subject_type, c)
    for c in rule.resource_condition:
        check_condition(cm, rule.resource_type, c)
    for c in rule.constraint:
        check_constraint(cm, rule.subject_type, rule.resource_type, c)
    if actions is not None:
        extra = set(rule.actions) - set(actions)
        if extra:
            raise PolicyError(f"rule {rule}: unknown actions {sorted(extra)}")


class SraTuple(NamedTuple):
    subject: str
    resource: str
    action: str


@dataclass(frozen=True)
class Policy:
    class_model: ClassModel
    object_model: ObjectModel
    actions: frozenset
    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", frozenset(self.actions))
        object.__setattr__(self, "rules", tuple(canonical_rules(self.rules)))
        for r in self.rules:
            check_rule(self.class_model, r, self.actions)


# -- satisfaction -----------------------------------------------------------------


def _compare(op: str, a: Value, b: Value) -> bool:
    if op == EQUAL:
        return a is not None and b is not None and a == b
    if op == IN:
        return a is not None and not isinstance(a, frozenset) and isinstance(b, frozenset) and a in b
    if op == CONTAINS:
        return b is not None and not isinstance(b, frozenset) and isinstance(a, frozenset) and b in a
    if op == SUPSETEQ:
        return isinstance(a, frozenset) and isinstance(b, frozenset) and a >= b
    if op == SUBSETEQ:
        return isinstance(a, frozenset) and isinstance(b, frozenset) and a <= b
    raise PolicyError(f"bad operator {op!r}")


def satisfies_condition(om: ObjectModel, oid: str, cond: Condition) -> bool:
    v = nav(om, oid, cond.path)
    if cond.op == IN:
        pos = v is not None and not isinstance(v, frozenset) and v in cond.val
    else:
        pos = isinstance(v, frozenset) and cond.val in v
    return pos != cond.neg


def satisfies_constraint(om: ObjectModel, s: str, r: str, con: Constraint) -> bool:
    pos = _compare(con.op, nav(om, s, con.spath), nav(om, r, con.rpath))
    return pos != con.neg


def satisfies_rule(om: ObjectModel, t, rule: Rule) -> bool:
    s, r, a = t
    if om.type_of(s) != rule.subject_type or om.type_of(r) != rule.resource_type:
        return False
    if a not in rule.actions:
        return False
    return (
        all(satisfies_condition(om, s, c) for c in rule.subject_condition)
        and all(satisfies_condition(om, r, c) for c in rule.resource_condition)
        and all(satisfies_constraint(om, s, r, c) for c in rule.constraint)
    )


def rule_meaning(om: ObjectModel, rule: Rule, actions: Optional[Iterable[str]] = None) -> frozenset:
    acts = rule.actions if actions is None else rule.actions & frozenset(actions)
    subjects = [s for s in om.of_type(rule.subject_type)
                if all(satisfies_condition(om, s, c) for c in rule.subject_condition)]
    resources = [r for r in om.of_type(rule.resource_type)
                 if all(satisfies_condition(om, r, c) for c in rule.resource_condition)]
    out = set()
    for s, r in itertools.product(subjects, resources):
        if all(satisfies_constraint(om, s, r, c) for c in rule.constraint):
            out.update(SraTuple(s, r, a) for a in acts)
    return frozenset(out)


def policy_meaning(om: ObjectModel, rules: Iterable[Rule], actions: Optional[Iterable[str]] = None) -> frozenset:
    out: set = set()
    for rule in rules:
        out |= rule_meaning(om, rule, actions)
    return frozenset(out)


# -- weighted structural complexity -----------------------------------------------


def wsc_atomic(atom) -> int:
    if isinstance(atom, Condition):
        size = len(atom.path) + (len(atom.val) if atom.op == IN else 1)
    else:
        size = len(atom.spath) + len(atom.rpath)
    return size + (1 if atom.neg else 0)


def wsc_rule(rule: Rule) -> int:
    return sum(wsc_atomic(a) for a in rule.atoms) + len(rule.actions)


def wsc_policy(rules: Iterable[Rule]) -> int:
    return sum(wsc_rule(r) for r in rules)


# -- formatting --------------------------------------------------------------------


def _fmt_value(v) -> str:
    return str(v)


def format_condition(c: Condition, prefix: str = "") -> str:
    p = prefix + ".".join(c.path)
    if c.op == IN:
        vals = sorted_atoms(c.val)
        if len(vals) == 1:
            return f"{p} {'!=' if c.neg else '='} {_fmt_value(vals[0])}"
        body = "{" + ", ".join(_fmt_value(v) for v in vals) + "}"
        return f"{p} {'not in' if c.neg else 'in'} {body}"
    return f"{p} {'not contains' if c.neg else 'contains'} {_fmt_value(c.val)}"


_CON_SYM = {EQUAL: "=", IN: "in", CONTAINS: "contains", SUPSETEQ: "supseteq", SUBSETEQ: "subseteq"}


def format_constraint(c: Constraint) -> str:
    lhs = "subject" + "".join("." + f for f in c.spath)
    rhs = "resource" + "".join("." + f for f in c.rpath)
    sym = _CON_SYM[c.op]
    if c.neg:
        sym = "!=" if c.op == EQUAL else "not " + sym
    return f"{lhs} {sym} {rhs}"


def format_rule(rule: Rule) -> str:
    sc = [format_condition(c, "subject.") for c in sorted(rule.subject_condition, key=Condition.sort_key)]
    rc = [format_condition(c, "resource.") for c in sorted(rule.resource_condition, key=Condition.sort_key)]
    con = [format_constraint(c) for c in sorted(rule.constraint, key=Constraint.sort_key)]
    acts = "{" + ", ".join(sorted(rule.actions)) + "}"
    return "<{}, {}, {}, {}, {}, {}>".format(
        rule.subject_type,
        " and ".join(sc) or "true",
        rule.resource_type,
        " and ".join(rc) or "true",
        " and ".join(con) or "true",
        acts,
    )
