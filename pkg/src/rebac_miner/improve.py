"""Phase 2: negative-feature elimination, rule merging, and simplification.

Every step works on a :class:`CandidatePolicy`, which keeps the rules, the
authorization matrices, and memoized per-rule meaning matrices.  Rules are
immutable, so "mutating" a rule means replacing it and the memo for the
old rule simply stops being consulted.
"""
from __future__ import annotations

import itertools
import logging
import time
from collections import Counter
from typing import Callable, Iterable, Optional

import numpy as np

from .engine import Evaluator, au_matrices
from .features import CONSTRAINT, RESOURCE, SUBJECT, FeatureLimits, generate_features
from .model import (
    CONTAINS,
    EQUAL,
    ID,
    IN,
    ONE,
    SUBSETEQ,
    SUPSETEQ,
    Condition,
    Constraint,
    Rule,
    canonical_rules,
    constraint_ops,
    sorted_atoms,
    wsc_atomic,
    wsc_policy,
    wsc_rule,
)

log = logging.getLogger(__name__)

DTRM = "dtrm"
DTRM_MINUS = "dtrm-minus"
MODES = (DTRM, DTRM_MINUS)

# passes 1 and 2 search all removable subsets up to this many atoms, greedily beyond
MAX_EXHAUSTIVE_ATOMS = 12


class NegationEliminationExhausted(Exception):
    def __init__(self, rule, atom):
        self.rule = rule
        self.atom = atom
        super().__init__(f"cannot eliminate negative feature {atom} from rule {rule}")


def _side_of(rule: Rule, atom) -> str:
    if isinstance(atom, Constraint):
        return CONSTRAINT
    if atom in rule.subject_condition:
        return SUBJECT
    return RESOURCE


def _with(rule: Rule, remove=(), add=()) -> Rule:
    """Copy of `rule` without atoms `remove` and with ``(side, atom)`` pairs `add`."""
    remove = set(remove)
    sc = {c for c in rule.subject_condition if c not in remove}
    rc = {c for c in rule.resource_condition if c not in remove}
    con = {c for c in rule.constraint if c not in remove}
    for side, atom in add:
        {SUBJECT: sc, RESOURCE: rc, CONSTRAINT: con}[side].add(atom)
    return Rule(rule.subject_type, sc, rule.resource_type, rc, con, rule.actions)


def _atom_order(rule: Rule, atom) -> tuple:
    side = _side_of(rule, atom)
    return ({SUBJECT: 0, RESOURCE: 1, CONSTRAINT: 2}[side], atom.sort_key())


class CandidatePolicy:
    """Rules under construction plus the authorization set they must equal."""

    def __init__(self, ev: Evaluator, au: Iterable, rules: Iterable[Rule] = (), au_mats: dict | None = None):
        self.ev = ev
        self.au = frozenset(au)
        self.au_mats = au_mats if au_mats is not None else au_matrices(ev, self.au)
        self.rules: list = list(rules)
        self._mat: dict = {}
        self._zeros: dict = {}

    def copy(self, rules=None) -> "CandidatePolicy":
        cp = CandidatePolicy(self.ev, self.au, self.rules if rules is None else rules, self.au_mats)
        cp._mat = self._mat
        return cp

    # -- matrices ----------------------------------------------------------

    def matrix(self, rule: Rule) -> np.ndarray:
        m = self._mat.get(rule)
        if m is None:
            m = self.ev.rule_matrix(rule)
            m.setflags(write=False)
            self._mat[rule] = m
        return m

    def au_matrix(self, st: str, rt: str, a: str) -> np.ndarray:
        m = self.au_mats.get((st, rt, a))
        if m is None:
            key = (st, rt)
            m = self._zeros.get(key)
            if m is None:
                m = np.zeros((len(self.ev.instances(st)), len(self.ev.instances(rt))), dtype=bool)
                self._zeros[key] = m
        return m

    def coverage(self, st: str, rt: str, a: str, exclude: Optional[int] = None) -> np.ndarray:
        cov = np.zeros_like(self.au_matrix(st, rt, a))
        for k, r in enumerate(self.rules):
            if k != exclude and r.subject_type == st and r.resource_type == rt and a in r.actions:
                cov |= self.matrix(r)
        return cov

    # -- checks ------------------------------------------------------------

    def valid_matrix(self, rule: Rule, mat: np.ndarray) -> bool:
        for a in rule.actions:
            if (mat & ~self.au_matrix(rule.subject_type, rule.resource_type, a)).any():
                return False
        return True

    def is_valid(self, rule: Rule) -> bool:
        """True iff the rule grants nothing outside AU."""
        return self.valid_matrix(rule, self.matrix(rule))

    def covers_with(self, idx: int, new: Optional[Rule], new_mat: np.ndarray | None = None) -> bool:
        """Does the policy still cover AU if rule `idx` becomes `new` (None: removed)?"""
        old = self.rules[idx]
        if new is not None and new_mat is None:
            new_mat = self.matrix(new)
        for a in old.actions:
            au = self.au_matrix(old.subject_type, old.resource_type, a)
            if not au.any():
                continue
            cov = self.coverage(old.subject_type, old.resource_type, a, exclude=idx)
            if new is not None and a in new.actions:
                cov = cov | new_mat
            if (au & ~cov).any():
                return False
        return True

    def covers_au(self) -> bool:
        for (st, rt, a), au in self.au_mats.items():
            if (au & ~self.coverage(st, rt, a)).any():
                return False
        return True

    def is_consistent(self) -> bool:
        return self.covers_au() and all(self.is_valid(r) for r in self.rules)

    def meaning(self) -> frozenset:
        return self.ev.policy_meaning(self.rules)

    def wsc(self) -> int:
        return wsc_policy(self.rules)

    def canonicalize(self) -> None:
        self.rules = canonical_rules(self.rules)


def is_valid(ev: Evaluator, au, rule: Rule) -> bool:
    """Standalone validity check: meaning(rule) is a subset of AU."""
    return CandidatePolicy(ev, au).is_valid(rule)


# -- negative feature elimination --------------------------------------------------------


class _Catalog:
    """Positive, non-identity features per type pair, for substeps 2 and 5."""

    def __init__(self, ev: Evaluator, limits: FeatureLimits):
        self.ev = ev
        self.limits = limits
        self._cache: dict = {}

    def get(self, st: str, rt: str) -> list:
        key = (st, rt)
        feats = self._cache.get(key)
        if feats is None:
            feats = [f for f in generate_features(self.ev, st, rt, self.limits, identity=False)]
            self._cache[key] = feats
        return feats

    def atom_matrix(self, st: str, rt: str, feat) -> np.ndarray:
        ev = self.ev
        if feat.kind == SUBJECT:
            v = ev.condition_vector(st, feat.body)
            return np.repeat(v[:, None], len(ev.instances(rt)), axis=1)
        if feat.kind == RESOURCE:
            v = ev.condition_vector(rt, feat.body)
            return np.repeat(v[None, :], len(ev.instances(st)), axis=0)
        return ev.constraint_matrix(st, rt, feat.body)


def _try_replace(cp: CandidatePolicy, idx: int, rule: Rule, negf, catalog: _Catalog, size: int):
    st, rt = rule.subject_type, rule.resource_type
    base = _with(rule, remove=[negf])
    base_mat = cp.ev.rule_matrix(base)
    used = {a.positive() for a in rule.atoms}
    feats = [f for f in catalog.get(st, rt) if f.body not in used and f.body != negf.positive()]
    if size == 1:
        candidates = ((f,) for f in feats)
    else:
        combos = list(itertools.combinations(range(len(feats)), size))
        combos.sort(key=lambda c: (sum(feats[i].wsc for i in c), c))
        candidates = (tuple(feats[i] for i in c) for c in combos)
    for group in candidates:
        mat = base_mat
        for f in group:
            mat = mat & catalog.atom_matrix(st, rt, f)
        if not mat.any():
            continue
        new = _with(base, add=[(f.kind, f.body) for f in group])
        if cp.valid_matrix(new, mat) and cp.covers_with(idx, new, mat):
            return new
    return None


def _eliminate_one(cp: CandidatePolicy, idx: int, negf, catalog: _Catalog):
    rule = cp.rules[idx]
    ev = cp.ev
    side = _side_of(rule, negf)
    # (1) drop it
    r1 = _with(rule, remove=[negf])
    if cp.is_valid(r1):
        return r1, 1
    # (2) swap for one positive feature
    r2 = _try_replace(cp, idx, rule, negf, catalog, 1)
    if r2 is not None:
        return r2, 2
    if side in (SUBJECT, RESOURCE):
        cls = rule.subject_type if side == SUBJECT else rule.resource_type
        conds = rule.subject_condition if side == SUBJECT else rule.resource_condition
        # (3) complement of the excluded constants on a multiplicity-one path
        if negf.op == IN and ev.cm.path_multiplicity(cls, negf.path) == ONE:
            same = [c for c in conds if c.neg and c.path == negf.path and c.op == IN]
            excluded = set().union(*(c.val for c in same))
            rest = [v for v in ev.universe(cls, negf.path) if v not in excluded]
            if rest:
                new = _with(rule, remove=same, add=[(side, Condition(negf.path, IN, frozenset(rest)))])
                return new, 3
        # (4) enumerate the covered ids
        mat = cp.matrix(rule)
        if side == SUBJECT:
            hit = np.nonzero(mat.any(axis=1))[0]
        else:
            hit = np.nonzero(mat.any(axis=0))[0]
        ids = ev.instances(cls)
        if len(hit) == 0:
            return None, 4
        new = _with(rule, remove=list(conds), add=[(side, Condition((ID,), IN, frozenset(ids[i] for i in hit)))])
        return new, 4
    # (5) swap for a pair of positive features
    r5 = _try_replace(cp, idx, rule, negf, catalog, 2)
    if r5 is not None:
        return r5, 5
    raise NegationEliminationExhausted(rule, negf)


def _split_by_values(cp: CandidatePolicy, rule: Rule, negf, limits: FeatureLimits) -> list | None:
    """Exact case split of a negated equality between two never-absent paths.

    ``not (s.p = r.q)`` equals the union over values v of ``s.p = v`` and
    ``r.q in U - {v}``, where U is every value r.q takes.  Only values v of
    subjects the rule covers get a case.  None when not applicable or when a
    value set would exceed MCSE.
    """
    if not isinstance(negf, Constraint) or negf.op != EQUAL or not negf.spath or not negf.rpath:
        return None
    ev = cp.ev
    cm = ev.cm
    st, rt = rule.subject_type, rule.resource_type
    if cm.path_multiplicity(st, negf.spath) != ONE or cm.path_multiplicity(rt, negf.rpath) != ONE:
        return None
    mat = cp.matrix(rule)
    svals = ev.nav_values(st, negf.spath)
    cases = sorted_atoms({svals[i] for i in np.nonzero(mat.any(axis=1))[0]})
    runiv = ev.universe(rt, negf.rpath)
    if len(cases) > limits.mcse or len(runiv) - 1 > limits.mcse:
        return None
    base = _with(rule, remove=[negf])
    out = []
    for v in cases:
        rest = frozenset(u for u in runiv if u != v)
        if rest:
            out.append(_with(base, add=[(SUBJECT, Condition(negf.spath, IN, frozenset((v,)))),
                                        (RESOURCE, Condition(negf.rpath, IN, rest))]))
    return out


def _split_by_ids(cp: CandidatePolicy, rule: Rule, negf) -> list:
    """Exact last resort: drop `negf` and enumerate the covered pairs by id.

    Subjects whose covered resources coincide share one rule, so the result
    has one rule per distinct resource set.
    """
    ev = cp.ev
    mat = cp.matrix(rule)
    subs, ress = ev.instances(rule.subject_type), ev.instances(rule.resource_type)
    groups: dict = {}
    for i in np.nonzero(mat.any(axis=1))[0]:
        key = tuple(np.nonzero(mat[i])[0])
        groups.setdefault(key, []).append(subs[i])
    base = _with(rule, remove=[negf])
    out = []
    for cols, sids in sorted(groups.items(), key=lambda kv: kv[1]):
        out.append(_with(base, add=[(SUBJECT, Condition((ID,), IN, frozenset(sids))),
                                    (RESOURCE, Condition((ID,), IN, frozenset(ress[j] for j in cols)))]))
    return out


def eliminate_negative_features(cp: CandidatePolicy, limits: FeatureLimits | None = None,
                                catalog: _Catalog | None = None, strict: bool = False) -> Counter:
    """Remove every negated atom from every rule, in place.

    Returns a histogram of which substep (1-5) eliminated each feature.
    When all five fail, a negated equality of two single-valued paths is split
    into one rule per value (key ``"cases"``); otherwise the covered pairs are
    enumerated by id (key ``"split"``), or with `strict` NegationEliminationExhausted
    is raised.
    """
    catalog = catalog or _Catalog(cp.ev, limits or FeatureLimits())
    hist: Counter = Counter()
    idx = 0
    while idx < len(cp.rules):
        rule = cp.rules[idx]
        negs = sorted(rule.negated_atoms(), key=lambda a: _atom_order(rule, a))
        if not negs:
            idx += 1
            continue
        try:
            new, step = _eliminate_one(cp, idx, negs[0], catalog)
        except NegationEliminationExhausted:
            cases = _split_by_values(cp, rule, negs[0], catalog.limits)
            if cases is not None:
                cp.rules[idx:idx + 1] = cases
                hist["cases"] += 1
                continue
            if strict:
                raise
            log.warning("negation elimination exhausted for %s; enumerating ids", rule)
            cp.rules[idx:idx + 1] = _split_by_ids(cp, rule, negs[0])
            hist["split"] += 1
            continue
        hist[step] += 1
        if new is None:
            del cp.rules[idx]
        else:
            cp.rules[idx] = new
    return hist


# -- merging ----------------------------------------------------------------------------------


def lub_conditions(c1: Iterable[Condition], c2: Iterable[Condition]) -> frozenset:
    """Least upper bound of two conditions; negated atoms are ignored."""
    p1 = [c for c in c1 if not c.neg]
    p2 = [c for c in c2 if not c.neg]
    out = set()
    for a in p1:
        if a.op != IN:
            continue
        for b in p2:
            if b.op == IN and b.path == a.path:
                out.add(Condition(a.path, IN, a.val | b.val))
    contains2 = {c for c in p2 if c.op == CONTAINS}
    out |= {c for c in p1 if c.op == CONTAINS and c in contains2}
    return frozenset(out)


def merge_pair(r1: Rule, r2: Rule) -> Rule:
    return Rule(r1.subject_type, lub_conditions(r1.subject_condition, r2.subject_condition),
                r1.resource_type, lub_conditions(r1.resource_condition, r2.resource_condition),
                r1.constraint, r1.actions | r2.actions)


def mergeable(r1: Rule, r2: Rule) -> bool:
    return (r1.subject_type == r2.subject_type and r1.resource_type == r2.resource_type
            and r1.constraint == r2.constraint)


def merge_rules(cp: CandidatePolicy) -> int:
    """Merge rule pairs to a fixpoint, in place; returns the number of merges."""
    merges = 0
    while True:
        cp.canonicalize()
        done = False
        for i, j in itertools.combinations(range(len(cp.rules)), 2):
            r1, r2 = cp.rules[i], cp.rules[j]
            if not mergeable(r1, r2):
                continue
            merged = merge_pair(r1, r2)
            if cp.is_valid(merged):
                cp.rules = [r for k, r in enumerate(cp.rules) if k not in (i, j)] + [merged]
                merges += 1
                done = True
                break
        if not done:
            return merges


# -- simplification -------------------------------------------------------------------------------


def _best_removal(cp: CandidatePolicy, rule: Rule, atoms: list) -> Rule:
    """The valid rule obtained by removing a subset of `atoms` with least WSC."""
    if not atoms:
        return rule
    if len(atoms) > MAX_EXHAUSTIVE_ATOMS:
        cur = rule
        for atom in sorted(atoms, key=lambda a: (-wsc_atomic(a), a.sort_key())):
            cand = _with(cur, remove=[atom])
            if cp.valid_matrix(cand, cp.ev.rule_matrix(cand)):
                cur = cand
        return cur
    base = wsc_rule(rule)
    subsets = []
    for k in range(len(atoms) + 1):
        for combo in itertools.combinations(range(len(atoms)), k):
            saved = sum(wsc_atomic(atoms[i]) for i in combo)
            surviving = tuple(atoms[i].sort_key() for i in range(len(atoms)) if i not in combo)
            subsets.append((base - saved, surviving, combo))
    subsets.sort(key=lambda t: (t[0], t[1]))
    for _, _, combo in subsets:
        if not combo:
            return rule
        cand = _with(rule, remove=[atoms[i] for i in combo])
        if cp.valid_matrix(cand, cp.ev.rule_matrix(cand)):
            return cand
    return rule


def pass_remove_conditions(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    changed = False
    for i, rule in enumerate(cp.rules):
        atoms = sorted(list(rule.subject_condition) + list(rule.resource_condition), key=lambda a: _atom_order(rule, a))
        new = _best_removal(cp, rule, atoms)
        if new != rule:
            cp.rules[i] = new
            changed = True
    return changed


def pass_remove_constraints(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    changed = False
    for i, rule in enumerate(cp.rules):
        atoms = sorted(rule.constraint, key=Constraint.sort_key)
        new = _best_removal(cp, rule, atoms)
        if new != rule:
            cp.rules[i] = new
            changed = True
    return changed


def _drop_action(cp: CandidatePolicy, i: int, a: str) -> None:
    rule = cp.rules[i]
    rest = rule.actions - {a}
    cp.rules[i] = None if not rest else Rule(rule.subject_type, rule.subject_condition, rule.resource_type,
                                             rule.resource_condition, rule.constraint, rest)


def pass_overlapping_actions(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    """Drop action a from a rule when a syntactically weaker rule grants a."""
    changed = False
    for i in range(len(cp.rules)):
        for a in sorted(cp.rules[i].actions if cp.rules[i] else ()):
            rule = cp.rules[i]
            if rule is None:
                break
            for j, other in enumerate(cp.rules):
                if j == i or other is None or a not in other.actions:
                    continue
                if (other.subject_type == rule.subject_type and other.resource_type == rule.resource_type
                        and other.subject_condition <= rule.subject_condition
                        and other.resource_condition <= rule.resource_condition
                        and other.constraint <= rule.constraint):
                    _drop_action(cp, i, a)
                    changed = True
                    break
    cp.rules = [r for r in cp.rules if r is not None]
    return changed


def pass_redundant_actions(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    """Drop action a from a rule when other rules already cover its tuples for a."""
    changed = False
    for i in range(len(cp.rules)):
        for a in sorted(cp.rules[i].actions if cp.rules[i] else ()):
            rule = cp.rules[i]
            if rule is None:
                break
            mine = cp.matrix(rule)
            cov = np.zeros_like(mine)
            for j, other in enumerate(cp.rules):
                if (j != i and other is not None and a in other.actions
                        and other.subject_type == rule.subject_type and other.resource_type == rule.resource_type):
                    cov |= cp.matrix(other)
            if not (mine & ~cov).any():
                _drop_action(cp, i, a)
                changed = True
    cp.rules = [r for r in cp.rules if r is not None]
    return changed


def _singleton(c: Condition):
    if c.op == IN and len(c.val) == 1:
        return next(iter(c.val))
    return None


def pass_constant_propagation(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    """``p = c`` and ``p = p'`` become ``p' = c`` (and the mirrored case)."""
    changed = False
    for i, rule in enumerate(cp.rules):
        done = True
        while done:
            done = False
            for con in sorted(rule.constraint, key=Constraint.sort_key):
                if con.op != EQUAL or (con.neg and mode != DTRM_MINUS):
                    continue
                new = None
                for c in sorted(rule.subject_condition, key=Condition.sort_key):
                    v = _singleton(c)
                    if not c.neg and v is not None and c.path == con.spath and con.rpath:
                        new = _with(rule, remove=[con],
                                    add=[(RESOURCE, Condition(con.rpath, IN, frozenset((v,)), con.neg))])
                        break
                if new is None:
                    for c in sorted(rule.resource_condition, key=Condition.sort_key):
                        v = _singleton(c)
                        if not c.neg and v is not None and c.path == con.rpath and con.spath:
                            new = _with(rule, remove=[con],
                                        add=[(SUBJECT, Condition(con.spath, IN, frozenset((v,)), con.neg))])
                            break
                if new is not None and cp.is_valid(new) and cp.covers_with(i, new):
                    rule = new
                    cp.rules[i] = new
                    changed = done = True
                    break
    return changed


def _path_cycles(cm, cls: str, path: tuple, allow_empty: bool) -> list:
    """Shortened paths obtained by cutting one class-to-same-class cycle."""
    types = [cls] + [fd.type for fd in cm.path_fields(cls, path)]
    out = set()
    for i in range(len(types)):
        for j in range(i + 1, len(types)):
            if types[i] == types[j] and types[i] in cm.classes:
                cut = path[:i] + path[j:]
                if cut or allow_empty:
                    out.add(cut)
    return sorted(out, key=lambda p: (len(p), p))


def _recast_condition(cm, cls: str, c: Condition, path: tuple):
    many = cm.is_many(cls, path)
    if many:
        vals = list(c.values)
        if len(vals) != 1:
            return None
        return Condition(path, CONTAINS, vals[0], c.neg)
    return Condition(path, IN, c.values, c.neg)


_MANY_MANY = {IN: SUBSETEQ, CONTAINS: SUPSETEQ, SUBSETEQ: SUBSETEQ, SUPSETEQ: SUPSETEQ}


def _recast_constraint(cm, st: str, rt: str, c: Constraint, spath: tuple, rpath: tuple):
    ops = constraint_ops(cm, st, spath, rt, rpath)
    if c.op in ops:
        return Constraint(spath, c.op, rpath, c.neg)
    if len(ops) == 1:
        return Constraint(spath, ops[0], rpath, c.neg)
    op = _MANY_MANY.get(c.op)
    if op is None:
        return None
    return Constraint(spath, op, rpath, c.neg)


def pass_remove_cycles(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    cm = cp.ev.cm
    changed = False
    for i in range(len(cp.rules)):
        progress = True
        while progress:
            progress = False
            rule = cp.rules[i]
            for atom in sorted(rule.atoms, key=lambda a: _atom_order(rule, a)):
                side = _side_of(rule, atom)
                options = []
                if side == CONSTRAINT:
                    for sp in _path_cycles(cm, rule.subject_type, atom.spath, True):
                        options.append(_recast_constraint(cm, rule.subject_type, rule.resource_type, atom, sp, atom.rpath))
                    for rp in _path_cycles(cm, rule.resource_type, atom.rpath, True):
                        options.append(_recast_constraint(cm, rule.subject_type, rule.resource_type, atom, atom.spath, rp))
                else:
                    cls = rule.subject_type if side == SUBJECT else rule.resource_type
                    for p in _path_cycles(cm, cls, atom.path, False):
                        options.append(_recast_condition(cm, cls, atom, p))
                for new_atom in options:
                    if new_atom is None:
                        continue
                    new = _with(rule, remove=[atom], add=[(side, new_atom)])
                    if new != rule and cp.is_valid(new) and cp.covers_with(i, new):
                        cp.rules[i] = new
                        changed = progress = True
                        break
                if progress:
                    break
    return changed


def _constant(values: list):
    """The single atomic all values equal, or None."""
    if not values:
        return None
    first = values[0]
    if first is None or isinstance(first, frozenset):
        return None
    for v in values[1:]:
        if v != first or isinstance(v, frozenset):
            return None
    return first


def pass_constant_constraints(cp: CandidatePolicy, mode: str = DTRM) -> bool:
    """Constraint side constant over the covered objects becomes a condition."""
    ev = cp.ev
    cm = ev.cm
    changed = False
    for i in range(len(cp.rules)):
        progress = True
        while progress:
            progress = False
            rule = cp.rules[i]
            st, rt = rule.subject_type, rule.resource_type
            mat = cp.matrix(rule)
            subj_rows = np.nonzero(mat.any(axis=1))[0]
            res_cols = np.nonzero(mat.any(axis=0))[0]
            for con in sorted(rule.constraint, key=Constraint.sort_key):
                if con.neg and mode != DTRM_MINUS:
                    continue
                new_atom = None
                if con.spath and con.rpath and not cm.is_many(st, con.spath) and con.op in (EQUAL, IN):
                    svals = ev.nav_values(st, con.spath)
                    c = _constant([svals[k] for k in subj_rows])
                    if c is not None:
                        op = IN if con.op == EQUAL else CONTAINS
                        val = frozenset((c,)) if op == IN else c
                        new_atom = (RESOURCE, Condition(con.rpath, op, val, con.neg))
                if new_atom is None and con.spath and con.rpath and not cm.is_many(rt, con.rpath) \
                        and con.op in (EQUAL, CONTAINS):
                    rvals = ev.nav_values(rt, con.rpath)
                    c = _constant([rvals[k] for k in res_cols])
                    if c is not None:
                        op = IN if con.op == EQUAL else CONTAINS
                        val = frozenset((c,)) if op == IN else c
                        new_atom = (SUBJECT, Condition(con.spath, op, val, con.neg))
                if new_atom is None:
                    continue
                new = _with(rule, remove=[con], add=[new_atom])
                if cp.is_valid(new) and cp.covers_with(i, new):
                    cp.rules[i] = new
                    changed = progress = True
                    break
    return changed


SIMPLIFY_PASSES = (
    ("remove_conditions", pass_remove_conditions),
    ("remove_constraints", pass_remove_constraints),
    ("overlapping_actions", pass_overlapping_actions),
    ("redundant_actions", pass_redundant_actions),
    ("constant_propagation", pass_constant_propagation),
    ("remove_cycles", pass_remove_cycles),
    ("constant_constraints", pass_constant_constraints),
)


Observer = Callable[[str, list], None]


def simplify_rules(cp: CandidatePolicy, mode: str = DTRM, observer: Optional[Observer] = None) -> bool:
    """One round of the seven passes in order; True if anything changed."""
    changed = False
    for name, fn in SIMPLIFY_PASSES:
        if fn(cp, mode):
            changed = True
        cp.canonicalize()
        if observer is not None:
            observer(name, list(cp.rules))
    return changed


def improve(cp: CandidatePolicy, mode: str = DTRM, limits: FeatureLimits | None = None,
            observer: Optional[Observer] = None, timings: dict | None = None,
            eliminate: bool = True, strict: bool = False) -> dict:
    """Run Phase 2 in place: (DTRM) negation elimination, then merge+simplify to a fixpoint."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    timings = timings if timings is not None else {}
    stats: dict = {"negation_histogram": {k: 0 for k in ("1", "2", "3", "4", "5", "cases", "split")},
                   "merges": 0, "rounds": 0}
    cp.canonicalize()
    if mode == DTRM and eliminate:
        t0 = time.perf_counter()
        hist = eliminate_negative_features(cp, limits, strict=strict)
        for k, v in hist.items():
            stats["negation_histogram"][str(k)] += v
        cp.canonicalize()
        timings["negation_elimination"] = timings.get("negation_elimination", 0.0) + time.perf_counter() - t0
        if observer is not None:
            observer("negation_elimination", list(cp.rules))
    stats["after_negation_elimination"] = {"rules": len(cp.rules), "wsc": cp.wsc()}
    while True:
        before = list(cp.rules)
        t0 = time.perf_counter()
        stats["merges"] += merge_rules(cp)
        timings["merge"] = timings.get("merge", 0.0) + time.perf_counter() - t0
        if observer is not None:
            observer("merge", list(cp.rules))
        t0 = time.perf_counter()
        simplify_rules(cp, mode, observer)
        timings["simplify"] = timings.get("simplify", 0.0) + time.perf_counter() - t0
        stats["rounds"] += 1
        if cp.rules == before:
            break
    return stats
