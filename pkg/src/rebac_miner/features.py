"""Candidate features, labeled datasets, and the two catalog reductions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .engine import Evaluator
from .model import (
    BOOLEAN,
    CONTAINS,
    ID,
    IN,
    ONE,
    ClassModel,
    Condition,
    Constraint,
    constraint_ops,
    format_condition,
    format_constraint,
    wsc_atomic,
)

SUBJECT = "subjectCondition"
RESOURCE = "resourceCondition"
CONSTRAINT = "constraint"
_KIND_ORDER = {SUBJECT: 0, RESOURCE: 1, CONSTRAINT: 2}


@dataclass(frozen=True)
class FeatureLimits:
    """Path-length and constant-set limits (MSPL, MRPL, MTPL, MCSE).

    `sped` / `rped` widen the subject / resource path caps used for
    constraint paths; both default to 0.
    """

    mspl: int = 2
    mrpl: int = 2
    mtpl: int = 4
    mcse: int = 5
    sped: int = 0
    rped: int = 0

    def __post_init__(self):
        for name in ("mspl", "mrpl", "mtpl", "mcse", "sped", "rped"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.mtpl < 1:
            raise ValueError("mtpl must be >= 1")


@dataclass(frozen=True)
class Feature:
    kind: str
    body: Union[Condition, Constraint]
    wsc: int
    identity: bool = False

    def sort_key(self) -> tuple:
        return (self.identity, self.wsc, _KIND_ORDER[self.kind], self.body.sort_key())

    def __str__(self):
        side = {SUBJECT: "subject.", RESOURCE: "resource.", CONSTRAINT: ""}[self.kind]
        if self.kind == CONSTRAINT:
            return format_constraint(self.body)
        return format_condition(self.body, side)


def make_feature(kind: str, body, identity: bool = False) -> Feature:
    return Feature(kind, body, wsc_atomic(body), identity)


def enumerate_paths(cm: ClassModel, cls: str, max_len: int) -> list:
    """Non-empty paths from `cls` of length <= max_len, in sorted order.

    Only reference fields are traversed; Boolean fields end a path. The
    implicit ``id`` field is not used (a reference path already denotes ids).
    """
    out = []

    def walk(cur: str, prefix: tuple):
        if len(prefix) == max_len:
            return
        for fd in cm.fields(cur):
            p = prefix + (fd.name,)
            out.append(p)
            if fd.type != BOOLEAN:
                walk(fd.type, p)

    if max_len > 0:
        walk(cls, ())
    return sorted(out)


def condition_features(ev: Evaluator, cls: str, kind: str, max_len: int, limits: FeatureLimits) -> list:
    cm = ev.cm
    if limits.mcse < 1:
        return []
    feats = []
    for path in enumerate_paths(cm, cls, max_len):
        many = cm.is_many(cls, path)
        boolean_one = cm.path_type(cls, path) == BOOLEAN and cm.path_multiplicity(cls, path) == ONE
        for v in ev.universe(cls, path):
            if boolean_one and v is not True:
                # p = False is the False branch of p = True
                continue
            body = Condition(path, CONTAINS, v) if many else Condition(path, IN, frozenset((v,)))
            feats.append(make_feature(kind, body))
    return feats


def identity_features(ev: Evaluator, cs: str, cr: str) -> list:
    feats = [make_feature(SUBJECT, Condition((ID,), IN, frozenset((s,))), identity=True)
             for s in ev.instances(cs)]
    feats += [make_feature(RESOURCE, Condition((ID,), IN, frozenset((r,))), identity=True)
              for r in ev.instances(cr)]
    return feats


def constraint_features(ev: Evaluator, cs: str, cr: str, limits: FeatureLimits) -> list:
    cm = ev.cm
    spaths = [()] + enumerate_paths(cm, cs, limits.mspl + limits.sped)
    rpaths = [()] + enumerate_paths(cm, cr, limits.mrpl + limits.rped)
    feats = []
    for sp in spaths:
        stype = cm.path_type(cs, sp)
        for rp in rpaths:
            if len(sp) + len(rp) > limits.mtpl:
                continue
            if not sp and not rp and cs != cr:
                continue
            if cm.path_type(cr, rp) != stype:
                continue
            for op in constraint_ops(cm, cs, sp, cr, rp):
                feats.append(make_feature(CONSTRAINT, Constraint(sp, op, rp)))
    return feats


def generate_features(ev: Evaluator, cs: str, cr: str, limits: FeatureLimits,
                      identity: bool = True) -> list:
    """The feature catalog for subject type `cs` and resource type `cr`.

    Condition constants are the values actually reachable on each path in
    the object model, one singleton feature per value.  With `identity`,
    ``subject.id = s`` / ``resource.id = r`` features are appended; they sort
    after every other feature and the tree learner only falls back on them.
    """
    feats = condition_features(ev, cs, SUBJECT, limits.mspl, limits)
    feats += condition_features(ev, cr, RESOURCE, limits.mrpl, limits)
    feats += constraint_features(ev, cs, cr, limits)
    if identity:
        feats += identity_features(ev, cs, cr)
    return sorted(set(feats), key=Feature.sort_key)


def enumerate_triples(au: Iterable, om) -> list:
    """Distinct ``(subject type, resource type, action)`` in AU, sorted."""
    return sorted({(om.type_of(s), om.type_of(r), a) for s, r, a in au})


@dataclass
class LabeledDataset:
    """Feature vectors for one ``(Cs, Cr, a)`` triple.

    Row ``i * len(resources) + j`` is the pair (subjects[i], resources[j]).
    `bits` is stored feature-major: ``bits[f]`` is feature f's column.
    """

    triple: tuple
    features: list
    subjects: tuple
    resources: tuple
    bits: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    @property
    def wsc(self) -> np.ndarray:
        return np.array([f.wsc for f in self.features], dtype=np.int64)

    @property
    def identity(self) -> np.ndarray:
        return np.array([f.identity for f in self.features], dtype=bool)

    def pair(self, row: int) -> tuple:
        nr = len(self.resources)
        return self.subjects[row // nr], self.resources[row % nr]

    def vectors(self):
        """Yields ``(subject, resource, bits, label)`` per row."""
        for row in range(len(self.labels)):
            s, r = self.pair(row)
            yield s, r, self.bits[:, row], bool(self.labels[row])

    def select(self, keep: np.ndarray) -> "LabeledDataset":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.nonzero(keep)[0]
        return LabeledDataset(self.triple, [self.features[i] for i in keep], self.subjects,
                              self.resources, self.bits[keep], self.labels, dict(self.meta))


def feature_column(ev: Evaluator, cs: str, cr: str, f: Feature) -> np.ndarray:
    """Feature `f` over all subject x resource pairs, flattened row-major."""
    ns, nr = len(ev.instances(cs)), len(ev.instances(cr))
    if f.kind == SUBJECT:
        return np.repeat(ev.condition_vector(cs, f.body), nr)
    if f.kind == RESOURCE:
        return np.tile(ev.condition_vector(cr, f.body), ns)
    return ev.constraint_matrix(cs, cr, f.body).ravel()


def build_dataset(ev: Evaluator, au_matrix: np.ndarray | None, triple: tuple, features: list) -> LabeledDataset:
    cs, cr, _ = triple
    subjects, resources = ev.instances(cs), ev.instances(cr)
    n = len(subjects) * len(resources)
    bits = np.empty((len(features), n), dtype=bool)
    for i, f in enumerate(features):
        bits[i] = feature_column(ev, cs, cr, f)
    if au_matrix is None:
        labels = np.zeros(n, dtype=bool)
    else:
        labels = np.asarray(au_matrix, dtype=bool).ravel().copy()
    return LabeledDataset(tuple(triple), list(features), subjects, resources, bits, labels)


def drop_constant_features(ds: LabeledDataset) -> LabeledDataset:
    if len(ds) == 0:
        return ds
    keep = ds.bits.any(axis=1) & ~ds.bits.all(axis=1)
    return ds.select(keep)


def _row_groups(bits: np.ndarray) -> np.ndarray:
    """Group id per row (vector), equal ids for identical bit rows."""
    if bits.shape[0] == 0:
        return np.zeros(bits.shape[1], dtype=np.int64)
    packed = np.packbits(bits.T, axis=1)
    _, inverse = np.unique(packed, axis=0, return_inverse=True)
    return inverse.ravel()


def conflicting_rows(bits: np.ndarray, labels: np.ndarray) -> tuple | None:
    """A (positive row, negative row) pair with identical bits, or None."""
    if len(labels) == 0:
        return None
    groups = _row_groups(bits)
    ng = groups.max() + 1
    pos = np.bincount(groups, weights=labels, minlength=ng)
    tot = np.bincount(groups, minlength=ng)
    mixed = np.nonzero((pos > 0) & (pos < tot))[0]
    if len(mixed) == 0:
        return None
    g = mixed[0]
    rows = np.nonzero(groups == g)[0]
    p = rows[labels[rows]][0]
    q = rows[~labels[rows]][0]
    return int(p), int(q)


def collapse_equivalent_features(ds: LabeledDataset) -> LabeledDataset:
    """Within each class of features equal on all positive vectors, keep the
    ones of least WSC (all of them when several tie) and drop the rest.

    Identity features count as costlier than any other feature here.  If
    collapsing would leave some positive and negative vector
    indistinguishable, the dataset is returned unchanged.
    """
    pos = ds.labels
    if not pos.any() or len(ds.features) <= 1:
        return ds
    order = sorted(range(len(ds.features)), key=lambda i: ds.features[i].sort_key())
    patterns = np.packbits(ds.bits[:, pos], axis=1)
    best: dict = {}
    keep = []
    for i in order:
        key = patterns[i].tobytes()
        f = ds.features[i]
        rank = (f.identity, f.wsc)
        if key not in best:
            best[key] = rank
        if rank == best[key]:
            keep.append(i)
    keep = sorted(keep)
    if len(keep) == len(ds.features):
        return ds
    reduced = ds.select(np.array(keep, dtype=np.int64))
    if conflicting_rows(reduced.bits, reduced.labels) is not None and \
            conflicting_rows(ds.bits, ds.labels) is None:
        out = LabeledDataset(ds.triple, ds.features, ds.subjects, ds.resources, ds.bits, ds.labels, dict(ds.meta))
        out.meta["equivalence_collapse_skipped"] = True
        return out
    return reduced
