"""JSON file formats: class model, object model, ACL, and policy files.

All writers emit canonical JSON (sorted keys, sorted collections) so equal
inputs always produce byte-identical files.
"""
from __future__ import annotations

import json
import os
from typing import Iterable

from .model import (
    IN,
    ClassModel,
    Condition,
    Constraint,
    FieldDecl,
    Obj,
    ObjectModel,
    PolicyError,
    Rule,
    SraTuple,
    canonical_rules,
    check_rule,
    sorted_atoms,
)

CLASSMODEL_FILE = "classmodel.json"
OBJECTMODEL_FILE = "objectmodel.json"
ACL_FILE = "acl.json"
POLICY_FILE = "reference_policy.json"


class FormatError(PolicyError):
    """Malformed input file; the message names the offending location."""


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from None
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None


def _write(path, data):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(data))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


# -- class model ---------------------------------------------------------------


def class_model_to_json(cm: ClassModel) -> dict:
    return {"classes": {
        name: {"fields": {fd.name: {"type": fd.type, "multiplicity": fd.multiplicity}
                          for fd in cm.fields(name)}}
        for name in cm.class_names()
    }}


def class_model_from_json(data: dict) -> ClassModel:
    try:
        classes = {}
        for name, body in data["classes"].items():
            classes[name] = [FieldDecl(fname, decl["type"], decl.get("multiplicity", "one"))
                             for fname, decl in body.get("fields", {}).items()]
    except (KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"class model: malformed entry ({exc!r})") from None
    return ClassModel(classes)


# -- object model ----------------------------------------------------------------


def _value_to_json(v):
    if isinstance(v, frozenset):
        return sorted_atoms(v)
    return v


def object_model_to_json(om: ObjectModel) -> dict:
    objs = []
    for oid in sorted(om.objects):
        o = om.objects[oid]
        objs.append({"id": o.id, "type": o.type,
                     "fields": {k: _value_to_json(v) for k, v in sorted(o.fields.items())}})
    return {"objects": objs}


def object_model_from_json(data: dict, cm: ClassModel) -> ObjectModel:
    objs = []
    try:
        for i, entry in enumerate(data["objects"]):
            fields = {}
            for k, v in entry.get("fields", {}).items():
                fields[k] = frozenset(v) if isinstance(v, list) else v
            objs.append(Obj(entry["id"], entry["type"], fields))
    except (KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"object model: malformed object entry ({exc!r})") from None
    return ObjectModel(cm, objs)


# -- ACL ----------------------------------------------------------------------------


def acl_to_json(actions: Iterable[str], au: Iterable) -> dict:
    return {"actions": sorted(set(actions)),
            "au": [list(t) for t in sorted(set(tuple(t) for t in au))]}


def acl_from_json(data: dict, om: ObjectModel | None = None) -> tuple:
    """Returns ``(actions, au)``; checks tuples against `om` when given."""
    try:
        actions = frozenset(data["actions"])
        au = frozenset(SraTuple(*t) for t in data["au"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"ACL: malformed entry ({exc!r})") from None
    for t in au:
        if t.action not in actions:
            raise FormatError(f"ACL: tuple {list(t)} uses undeclared action {t.action!r}")
        if om is not None:
            for oid in (t.subject, t.resource):
                if oid not in om:
                    raise FormatError(f"ACL: tuple {list(t)} names unknown object {oid!r}")
    return actions, au


# -- policy --------------------------------------------------------------------------


def condition_to_json(c: Condition) -> dict:
    val = [v for v in sorted_atoms(c.val)] if c.op == IN else c.val
    return {"path": list(c.path), "op": c.op, "val": val, "neg": c.neg}


def condition_from_json(d: dict) -> Condition:
    val = d["val"]
    if d["op"] == IN and isinstance(val, list):
        val = frozenset(val)
    return Condition(tuple(d["path"]), d["op"], val, d.get("neg", False))


def constraint_to_json(c: Constraint) -> dict:
    return {"sPath": list(c.spath), "op": c.op, "rPath": list(c.rpath), "neg": c.neg}


def constraint_from_json(d: dict) -> Constraint:
    return Constraint(tuple(d["sPath"]), d["op"], tuple(d["rPath"]), d.get("neg", False))


def rule_to_json(r: Rule) -> dict:
    return {
        "subjectType": r.subject_type,
        "subjectCondition": [condition_to_json(c) for c in sorted(r.subject_condition, key=Condition.sort_key)],
        "resourceType": r.resource_type,
        "resourceCondition": [condition_to_json(c) for c in sorted(r.resource_condition, key=Condition.sort_key)],
        "constraint": [constraint_to_json(c) for c in sorted(r.constraint, key=Constraint.sort_key)],
        "actions": sorted(r.actions),
    }


def rule_from_json(d: dict) -> Rule:
    return Rule(
        d["subjectType"],
        [condition_from_json(c) for c in d.get("subjectCondition", [])],
        d["resourceType"],
        [condition_from_json(c) for c in d.get("resourceCondition", [])],
        [constraint_from_json(c) for c in d.get("constraint", [])],
        d["actions"],
    )


def policy_to_json(rules: Iterable[Rule], actions: Iterable[str] | None = None) -> dict:
    rules = canonical_rules(rules)
    if actions is None:
        actions = set().union(*(r.actions for r in rules)) if rules else set()
    return {"actions": sorted(actions), "rules": [rule_to_json(r) for r in rules]}


def policy_from_json(data: dict, cm: ClassModel | None = None) -> tuple:
    """Returns ``(rules, actions)``; type-checks rules against `cm` when given."""
    try:
        entries = data["rules"] if isinstance(data, dict) else data
        rules = []
        for i, d in enumerate(entries):
            try:
                rules.append(rule_from_json(d))
            except PolicyError as exc:
                raise FormatError(f"policy: rule {i}: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise FormatError(f"policy: malformed entry ({exc!r})") from None
    actions = frozenset(data.get("actions", ())) if isinstance(data, dict) else frozenset()
    actions = actions | frozenset().union(*(r.actions for r in rules)) if rules else actions
    if cm is not None:
        for i, r in enumerate(rules):
            try:
                check_rule(cm, r)
            except PolicyError as exc:
                raise FormatError(f"policy: rule {i}: {exc}") from None
    return rules, actions


# -- files ------------------------------------------------------------------------------


def load_class_model(path) -> ClassModel:
    try:
        return class_model_from_json(_read(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None
    except PolicyError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_object_model(path, cm: ClassModel) -> ObjectModel:
    try:
        return object_model_from_json(_read(path), cm)
    except PolicyError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_acl(path, om: ObjectModel | None = None) -> tuple:
    try:
        return acl_from_json(_read(path), om)
    except PolicyError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_policy(path, cm: ClassModel | None = None) -> tuple:
    try:
        return policy_from_json(_read(path), cm)
    except PolicyError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_class_model(path, cm: ClassModel) -> None:
    _write(path, class_model_to_json(cm))


def save_object_model(path, om: ObjectModel) -> None:
    _write(path, object_model_to_json(om))


def save_acl(path, actions, au) -> None:
    _write(path, acl_to_json(actions, au))


def save_policy(path, rules, actions=None) -> None:
    _write(path, policy_to_json(rules, actions))


def save_json(path, data) -> None:
    _write(path, data)


def load_instance(directory) -> dict:
    """Load whichever of the four instance files exist in `directory`."""
    cm = load_class_model(os.path.join(directory, CLASSMODEL_FILE))
    om = load_object_model(os.path.join(directory, OBJECTMODEL_FILE), cm)
    out = {"class_model": cm, "object_model": om}
    acl_path = os.path.join(directory, ACL_FILE)
    if os.path.exists(acl_path):
        out["actions"], out["au"] = load_acl(acl_path, om)
    pol_path = os.path.join(directory, POLICY_FILE)
    if os.path.exists(pol_path):
        out["rules"], out["policy_actions"] = load_policy(pol_path, cm)
    return out
