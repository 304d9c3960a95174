"""Seeded synthetic policy instances: class model, objects, rules, and AU.

Shape: subject classes hold N instances each, resource classes 5N, and
auxiliary (value) classes a fixed 3.  Subjects and resources reference the
auxiliary classes through single and multi-valued fields, resources point
back at subjects (``owner``, ``members``), and rules are sampled from a small
grammar of conditions and constraints over those fields.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .engine import Evaluator
from .model import (
    BOOLEAN,
    CONTAINS,
    EQUAL,
    IN,
    MANY,
    ONE,
    OPTIONAL,
    SUPSETEQ,
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
from . import serialize

AUX_INSTANCES = 3
RESOURCE_FACTOR = 5
MAX_RETRIES = 200


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n: int = 5
    rules: int = 5
    subject_classes: int = 1
    resource_classes: int = 2
    aux_classes: int = 3
    max_path_len: int = 2
    actions: tuple = ("read", "write")

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.rules < 1:
            raise ValueError("rules must be >= 1")
        if self.subject_classes < 1 or self.resource_classes < 1:
            raise ValueError("need at least one subject and one resource class")
        if self.aux_classes < 1:
            raise ValueError("need at least one auxiliary class")
        if self.max_path_len < 1:
            raise ValueError("max_path_len must be >= 1")
        if not self.actions:
            raise ValueError("need at least one action")


@dataclass
class GeneratedInstance:
    config: GenConfig
    class_model: ClassModel
    object_model: ObjectModel
    rules: list
    actions: frozenset
    au: frozenset


def _names(cfg: GenConfig):
    subs = [f"S{i}" for i in range(cfg.subject_classes)]
    ress = [f"R{i}" for i in range(cfg.resource_classes)]
    auxs = [f"A{i}" for i in range(cfg.aux_classes)]
    return subs, ress, auxs


def build_class_model(cfg: GenConfig) -> ClassModel:
    subs, ress, auxs = _names(cfg)
    classes = {a: [] for a in auxs}
    for s in subs:
        fields = [FieldDecl(f"a{i}", a, ONE) for i, a in enumerate(auxs)]
        fields.append(FieldDecl("tags", auxs[0], MANY))
        fields.append(FieldDecl("flag", BOOLEAN, ONE))
        classes[s] = fields
    for k, r in enumerate(ress):
        owner_cls = subs[k % len(subs)]
        fields = [FieldDecl(f"a{i}", a, OPTIONAL if i == len(auxs) - 1 and i > 0 else ONE)
                  for i, a in enumerate(auxs)]
        fields.append(FieldDecl("labels", auxs[0], MANY))
        fields.append(FieldDecl("locked", BOOLEAN, ONE))
        fields.append(FieldDecl("owner", owner_cls, ONE))
        fields.append(FieldDecl("members", owner_cls, MANY))
        classes[r] = fields
    return ClassModel(classes)


def build_object_model(cfg: GenConfig, cm: ClassModel, rng: np.random.Generator) -> ObjectModel:
    subs, ress, auxs = _names(cfg)
    objs = []
    aux_ids = {a: [f"{a.lower()}_{j}" for j in range(AUX_INSTANCES)] for a in auxs}
    for a in auxs:
        objs += [Obj(oid, a, {}) for oid in aux_ids[a]]
    sub_ids = {s: [f"{s.lower()}_{j}" for j in range(cfg.n)] for s in subs}
    for s in subs:
        for oid in sub_ids[s]:
            f = {}
            for i, a in enumerate(auxs):
                f[f"a{i}"] = aux_ids[a][int(rng.integers(AUX_INSTANCES))]
            k = int(rng.integers(0, 3))
            f["tags"] = sorted(rng.choice(aux_ids[auxs[0]], size=k, replace=False).tolist())
            f["flag"] = bool(rng.random() < 0.5)
            objs.append(Obj(oid, s, f))
    for k, r in enumerate(ress):
        owner_cls = subs[k % len(subs)]
        owners = sub_ids[owner_cls]
        for j in range(RESOURCE_FACTOR * cfg.n):
            f = {}
            for i, a in enumerate(auxs):
                decl = cm.field(r, f"a{i}")
                if decl.multiplicity == OPTIONAL and rng.random() < 0.2:
                    f[f"a{i}"] = None
                else:
                    f[f"a{i}"] = aux_ids[a][int(rng.integers(AUX_INSTANCES))]
            m = int(rng.integers(0, 3))
            f["labels"] = sorted(rng.choice(aux_ids[auxs[0]], size=m, replace=False).tolist())
            f["locked"] = bool(rng.random() < 0.3)
            f["owner"] = owners[int(rng.integers(len(owners)))]
            m = int(rng.integers(0, min(3, len(owners)) + 1))
            f["members"] = sorted(rng.choice(owners, size=m, replace=False).tolist())
            objs.append(Obj(f"{r.lower()}_{j}", r, f))
    return ObjectModel(cm, objs)


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _subject_condition(rng, ev: Evaluator, cls: str, n_aux: int) -> Condition:
    kind = int(rng.integers(3))
    if kind == 0:
        i = int(rng.integers(n_aux))
        return Condition((f"a{i}",), IN, {_pick(rng, ev.universe(cls, (f"a{i}",)))})
    if kind == 1 and ev.universe(cls, ("tags",)):
        return Condition(("tags",), CONTAINS, _pick(rng, ev.universe(cls, ("tags",))))
    return Condition(("flag",), IN, {bool(rng.random() < 0.5)})


def _resource_condition(rng, ev: Evaluator, cls: str, n_aux: int, max_len: int) -> Condition:
    kind = int(rng.integers(4 if max_len >= 2 else 3))
    if kind == 0:
        i = int(rng.integers(n_aux))
        u = ev.universe(cls, (f"a{i}",))
        if u:
            return Condition((f"a{i}",), IN, {_pick(rng, u)})
    if kind == 1 and ev.universe(cls, ("labels",)):
        return Condition(("labels",), CONTAINS, _pick(rng, ev.universe(cls, ("labels",))))
    if kind == 3:
        i = int(rng.integers(n_aux))
        p = ("owner", f"a{i}")
        return Condition(p, IN, {_pick(rng, ev.universe(cls, p))})
    return Condition(("locked",), IN, {bool(rng.random() < 0.5)})


def _constraint(rng, cfg: GenConfig, cs: str, cr: str, cm: ClassModel) -> Constraint | None:
    owner_cls = cm.field(cr, "owner").type
    options = []
    for i in range(cfg.aux_classes):
        options.append(Constraint((f"a{i}",), EQUAL, (f"a{i}",)))
    options.append(Constraint(("tags",), SUPSETEQ, ("labels",)))
    if owner_cls == cs:
        options.append(Constraint((), EQUAL, ("owner",)))
        options.append(Constraint((), IN, ("members",)))
        if cfg.max_path_len >= 2:
            options.append(Constraint(("a0",), EQUAL, ("owner", "a0")))
    return _pick(rng, options)



def _sample_rule(rng, cfg: GenConfig, ev: Evaluator, cs: str, cr: str, action: str) -> Rule:
    cm = ev.cm
    sc, rc, con = set(), set(), set()
    n_atoms = int(rng.integers(1, 4))
    for _ in range(n_atoms):
        kind = int(rng.integers(3))
        if kind == 0:
            c = _subject_condition(rng, ev, cs, cfg.aux_classes)
            if all(x.path != c.path for x in sc):
                sc.add(c)
        elif kind == 1:
            c = _resource_condition(rng, ev, cr, cfg.aux_classes, cfg.max_path_len)
            if all(x.path != c.path for x in rc):
                rc.add(c)
        else:
            con.add(_constraint(rng, cfg, cs, cr, cm))
    rule = Rule(cs, sc, cr, rc, con, {action})
    check_rule(cm, rule)
    return rule


def generate(cfg: GenConfig) -> GeneratedInstance:
    """Deterministic in `cfg`; every rule adds authorizations no other rule grants."""
    rng = np.random.default_rng(cfg.seed)
    cm = build_class_model(cfg)
    om = build_object_model(cfg, cm, rng)
    ev = Evaluator(om)
    subs, ress, _ = _names(cfg)
    pairs = [(s, r) for r in ress for s in subs if cm.field(r, "owner").type == s]
    triples = [(s, r, a) for s, r in pairs for a in cfg.actions]
    order = [triples[i] for i in rng.permutation(len(triples))]
    # 1-4 rules per triple, cycling through triples until M rules are placed
    plan = []
    k = 0
    while len(plan) < cfg.rules:
        t = order[k % len(order)]
        take = min(int(rng.integers(1, 5)), cfg.rules - len(plan))
        plan += [t] * take
        k += 1
    rules: list = []
    for cs, cr, a in plan:
        for _ in range(MAX_RETRIES):
            cand = _sample_rule(rng, cfg, ev, cs, cr, a)
            mat = ev.rule_matrix(cand)
            if not mat.any() or mat.all():
                continue
            others = np.zeros_like(mat)
            for r in rules:
                if (r.subject_type, r.resource_type) == (cs, cr) and a in r.actions:
                    others |= ev.rule_matrix(r)
            if not (mat & ~others).any():
                continue
            # no earlier rule may become dead either
            dead = False
            for i, r in enumerate(rules):
                if (r.subject_type, r.resource_type) != (cs, cr) or a not in r.actions:
                    continue
                rest = mat.copy()
                for j, q in enumerate(rules):
                    if j != i and (q.subject_type, q.resource_type) == (cs, cr) and a in q.actions:
                        rest |= ev.rule_matrix(q)
                if not (ev.rule_matrix(r) & ~rest).any():
                    dead = True
                    break
            if dead:
                continue
            rules.append(cand)
            break
        else:
            raise GenerationError(f"no non-vacuous rule found for {(cs, cr, a)} after {MAX_RETRIES} tries")
    rules = canonical_rules(rules)
    au = ev.policy_meaning(rules)
    return GeneratedInstance(cfg, cm, om, rules, frozenset(cfg.actions), au)


def emit_instance(inst: GeneratedInstance, directory: str) -> list:
    """Write the four instance files; returns their paths."""
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {directory}: {exc.strerror}") from None
    paths = [os.path.join(directory, name) for name in
             (serialize.CLASSMODEL_FILE, serialize.OBJECTMODEL_FILE, serialize.ACL_FILE, serialize.POLICY_FILE)]
    serialize.save_class_model(paths[0], inst.class_model)
    serialize.save_object_model(paths[1], inst.object_model)
    serialize.save_acl(paths[2], inst.actions, inst.au)
    serialize.save_policy(paths[3], inst.rules, inst.actions)
    return paths
