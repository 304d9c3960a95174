"""Vectorized evaluation of atomics and rules over whole object populations.

A condition on class C evaluates to a Boolean vector over the (sorted)
instances of C; a constraint for ``(Cs, Cr)`` evaluates to a Boolean matrix
with one row per subject and one column per resource.  Results are memoized
per atomic; the object model is immutable so the caches never go stale.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .model import (
    CONTAINS,
    EQUAL,
    IN,
    SUBSETEQ,
    SUPSETEQ,
    Condition,
    Constraint,
    ObjectModel,
    Rule,
    SraTuple,
    as_path,
    nav,
    sorted_atoms,
)


class Evaluator:
    def __init__(self, om: ObjectModel):
        self.om = om
        self.cm = om.class_model
        self._index: dict = {}
        self._nav: dict = {}
        self._universe: dict = {}
        self._cond: dict = {}
        self._con: dict = {}

    def instances(self, cls: str) -> tuple:
        return self.om.of_type(cls)

    def index(self, cls: str) -> dict:
        idx = self._index.get(cls)
        if idx is None:
            idx = {oid: i for i, oid in enumerate(self.instances(cls))}
            self._index[cls] = idx
        return idx

    def nav_values(self, cls: str, path) -> list:
        """nav(o, path) for every instance o of `cls`, in instance order."""
        key = (cls, as_path(path))
        vals = self._nav.get(key)
        if vals is None:
            vals = [nav(self.om, o, key[1]) for o in self.instances(cls)]
            self._nav[key] = vals
        return vals

    def universe(self, cls: str, path) -> list:
        """Sorted atomics reachable via `path` from some instance of `cls`."""
        key = (cls, as_path(path))
        u = self._universe.get(key)
        if u is None:
            seen: set = set()
            for v in self.nav_values(cls, key[1]):
                if v is None:
                    continue
                if isinstance(v, frozenset):
                    seen |= v
                else:
                    seen.add(v)
            u = sorted_atoms(seen)
            self._universe[key] = u
        return u

    # -- atomics ------------------------------------------------------------

    def condition_vector(self, cls: str, cond: Condition) -> np.ndarray:
        key = (cls, cond)
        vec = self._cond.get(key)
        if vec is None:
            if cond.neg:
                vec = ~self.condition_vector(cls, cond.positive())
            else:
                vals = self.nav_values(cls, cond.path)
                if cond.op == IN:
                    val = cond.val
                    vec = np.fromiter(
                        (v is not None and not isinstance(v, frozenset) and v in val for v in vals),
                        dtype=bool, count=len(vals))
                else:
                    c = cond.val
                    vec = np.fromiter((isinstance(v, frozenset) and c in v for v in vals),
                                      dtype=bool, count=len(vals))
            vec.setflags(write=False)
            self._cond[key] = vec
        return vec

    def constraint_matrix(self, cs: str, cr: str, con: Constraint) -> np.ndarray:
        key = (cs, cr, con)
        mat = self._con.get(key)
        if mat is None:
            if con.neg:
                mat = ~self.constraint_matrix(cs, cr, con.positive())
            else:
                mat = self._positive_constraint(cs, cr, con)
            mat.setflags(write=False)
            self._con[key] = mat
        return mat

    def _positive_constraint(self, cs: str, cr: str, con: Constraint) -> np.ndarray:
        svals = self.nav_values(cs, con.spath)
        rvals = self.nav_values(cr, con.rpath)
        codes: dict = {}
        for side in (svals, rvals):
            for v in side:
                if v is None:
                    continue
                for a in (v if isinstance(v, frozenset) else (v,)):
                    codes.setdefault(a, len(codes))
        width = max(len(codes), 1)

        def single(vals):
            return np.fromiter((-1 if v is None or isinstance(v, frozenset) else codes[v] for v in vals),
                               dtype=np.int64, count=len(vals))

        def incidence(vals):
            m = np.zeros((len(vals), width), dtype=bool)
            for i, v in enumerate(vals):
                if isinstance(v, frozenset):
                    for a in v:
                        m[i, codes[a]] = True
            return m

        ns, nr = len(svals), len(rvals)
        if ns == 0 or nr == 0:
            return np.zeros((ns, nr), dtype=bool)
        op = con.op
        if op == EQUAL:
            sc, rc = single(svals), single(rvals)
            return (sc[:, None] == rc[None, :]) & (sc[:, None] >= 0)
        if op == IN:
            sc = single(svals)
            rinc = incidence(rvals)
            ok = sc >= 0
            out = rinc[:, np.where(ok, sc, 0)].T
            return out & ok[:, None]
        if op == CONTAINS:
            rc = single(rvals)
            sinc = incidence(svals)
            ok = rc >= 0
            out = sinc[:, np.where(ok, rc, 0)]
            return out & ok[None, :]
        sinc = incidence(svals).astype(np.float32)
        rinc = incidence(rvals).astype(np.float32)
        if op == SUPSETEQ:
            # |R \ S| == 0
            return ((1.0 - sinc) @ rinc.T) == 0
        if op == SUBSETEQ:
            return (sinc @ (1.0 - rinc).T) == 0
        raise ValueError(f"bad constraint operator {op!r}")

    # -- rules --------------------------------------------------------------

    def subject_vector(self, rule: Rule) -> np.ndarray:
        vec = np.ones(len(self.instances(rule.subject_type)), dtype=bool)
        for c in rule.subject_condition:
            vec &= self.condition_vector(rule.subject_type, c)
        return vec

    def resource_vector(self, rule: Rule) -> np.ndarray:
        vec = np.ones(len(self.instances(rule.resource_type)), dtype=bool)
        for c in rule.resource_condition:
            vec &= self.condition_vector(rule.resource_type, c)
        return vec

    def rule_matrix(self, rule: Rule) -> np.ndarray:
        """Subject x resource pairs satisfying the rule's conditions and constraint."""
        mat = np.outer(self.subject_vector(rule), self.resource_vector(rule))
        for c in rule.constraint:
            mat &= self.constraint_matrix(rule.subject_type, rule.resource_type, c)
        return mat

    def rule_meaning(self, rule: Rule, actions: Iterable[str] | None = None) -> frozenset:
        acts = rule.actions if actions is None else rule.actions & frozenset(actions)
        mat = self.rule_matrix(rule)
        subs = self.instances(rule.subject_type)
        ress = self.instances(rule.resource_type)
        out = set()
        for i, j in zip(*np.nonzero(mat)):
            for a in acts:
                out.add(SraTuple(subs[i], ress[j], a))
        return frozenset(out)

    def policy_meaning(self, rules: Iterable[Rule], actions: Iterable[str] | None = None) -> frozenset:
        out: set = set()
        for r in rules:
            out |= self.rule_meaning(r, actions)
        return frozenset(out)


def au_matrices(ev: Evaluator, au: Iterable) -> dict:
    """Group an authorization set into ``{(Cs, Cr, a): subject x resource matrix}``."""
    om = ev.om
    out: dict = {}
    for s, r, a in au:
        cs, cr = om.type_of(s), om.type_of(r)
        key = (cs, cr, a)
        mat = out.get(key)
        if mat is None:
            mat = np.zeros((len(ev.instances(cs)), len(ev.instances(cr))), dtype=bool)
            out[key] = mat
        mat[ev.index(cs)[s], ev.index(cr)[r]] = True
    return out
