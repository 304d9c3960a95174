"""Shared builders for tests: a toy schema, random object models, random rules."""
from __future__ import annotations

import itertools
import random

from hypothesis import strategies as st

from rebac_miner.engine import Evaluator
from rebac_miner.features import CONSTRAINT, SUBJECT, FeatureLimits, generate_features
from rebac_miner.model import (
    BOOLEAN,
    MANY,
    ONE,
    OPTIONAL,
    ClassModel,
    FieldDecl,
    Obj,
    ObjectModel,
    Rule,
    SraTuple,
    satisfies_rule,
)

# Emp -> Proj -> Doc -> Emp gives a cycle; every multiplicity and a Boolean occur.
TOY_SCHEMA = {
    "Dept": [],
    "Emp": [("dept", "Dept", ONE), ("boss", "Emp", OPTIONAL), ("projects", "Proj", MANY),
            ("isAdmin", BOOLEAN, ONE)],
    "Proj": [("dept", "Dept", ONE), ("docs", "Doc", MANY)],
    "Doc": [("owner", "Emp", OPTIONAL), ("secret", BOOLEAN, ONE)],
}


def toy_class_model() -> ClassModel:
    return ClassModel({c: [FieldDecl(*f) for f in fs] for c, fs in TOY_SCHEMA.items()})


def random_object_model(rng: random.Random, n_dept=2, n_emp=4, n_proj=3, n_doc=4) -> ObjectModel:
    cm = toy_class_model()
    depts = [f"dept{i}" for i in range(n_dept)]
    emps = [f"emp{i}" for i in range(n_emp)]
    projs = [f"proj{i}" for i in range(n_proj)]
    docs = [f"doc{i}" for i in range(n_doc)]

    def some(pool):
        return rng.sample(pool, rng.randint(0, min(2, len(pool))))

    objs = [Obj(d, "Dept") for d in depts]
    objs += [Obj(e, "Emp", {"dept": rng.choice(depts), "boss": rng.choice(emps + [None]),
                            "projects": some(projs), "isAdmin": rng.random() < 0.5}) for e in emps]
    objs += [Obj(p, "Proj", {"dept": rng.choice(depts), "docs": some(docs)}) for p in projs]
    objs += [Obj(d, "Doc", {"owner": rng.choice(emps + [None]), "secret": rng.random() < 0.5}) for d in docs]
    return ObjectModel(cm, objs)


@st.composite
def object_models(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    sizes = draw(st.tuples(st.integers(1, 3), st.integers(1, 5), st.integers(1, 4), st.integers(1, 5)))
    return random_object_model(random.Random(seed), *sizes)


def random_rule(rng: random.Random, ev: Evaluator, cs: str, cr: str, max_atoms: int = 3,
                negation: bool = True, actions=("read", "write")) -> Rule:
    feats = [f for f in generate_features(ev, cs, cr, FeatureLimits(), identity=False)]
    sc, rc, con = set(), set(), set()
    for f in rng.sample(feats, min(len(feats), rng.randint(0, max_atoms))):
        body = f.body.negate() if negation and rng.random() < 0.3 else f.body
        {SUBJECT: sc, CONSTRAINT: con}.get(f.kind, rc).add(body)
    acts = rng.sample(list(actions), rng.randint(1, len(actions)))
    return Rule(cs, sc, cr, rc, con, acts)


def brute_meaning(om: ObjectModel, rules, actions=("read", "write")) -> frozenset:
    """Meaning by testing satisfies_rule on every SRA tuple of the object model."""
    out = set()
    for s, r, a in itertools.product(om.objects, om.objects, actions):
        t = SraTuple(s, r, a)
        if any(satisfies_rule(om, t, rule) for rule in rules):
            out.add(t)
    return frozenset(out)


def synthetic_dataset(rng: random.Random, n_feat: int, n_vec: int, p_pos: float = 0.4):
    """A separable dataset over abstract Boolean features ``f{i} = True``.

    Vectors are distinct, so any labeling is separable. One pseudo-subject per
    vector and a single pseudo-resource keep ``pair(row)`` meaningful.
    """
    import numpy as np

    from rebac_miner.features import LabeledDataset, make_feature
    from rebac_miner.model import IN, Condition

    n_vec = min(n_vec, 2 ** n_feat)
    rows = set()
    while len(rows) < n_vec:
        rows.add(tuple(rng.random() < 0.5 for _ in range(n_feat)))
    rows = sorted(rows)
    rng.shuffle(rows)
    bits = np.array(rows, dtype=bool).T.reshape(n_feat, n_vec)
    labels = np.array([rng.random() < p_pos for _ in range(n_vec)], dtype=bool)
    feats = []
    for i in range(n_feat):
        # path length 1-3 varies the WSC so tie-breaking gets exercised
        path = tuple(f"f{i}" if k == 0 else "x" for k in range(rng.randint(1, 3)))
        feats.append(make_feature(SUBJECT, Condition(path, IN, frozenset((True,)))))
    return LabeledDataset(("S", "R", "a"), feats, tuple(f"s{i}" for i in range(n_vec)), ("r",), bits, labels)


def dataset_rule_rows(ds, rule):
    """Rows of a synthetic dataset satisfying every atom of an extracted rule."""
    import numpy as np

    mask = np.ones(len(ds), dtype=bool)
    cols = {f.body: ds.bits[i] for i, f in enumerate(ds.features)}
    for atom in rule.atoms:
        mask &= cols[atom] if atom in cols else ~cols[atom.negate()]
    return mask


# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE: dict = {}


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"acceptance {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = (ok, line)
    print(line)
    return ok
