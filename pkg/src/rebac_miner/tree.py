"""Unpruned binary CART over Boolean features, and PERMIT-path rule extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .features import CONSTRAINT, RESOURCE, SUBJECT, LabeledDataset, conflicting_rows
from .model import BOOLEAN, IN, ONE, Condition, Rule

GINI = "gini"
ENTROPY = "entropy"
CRITERIA = (GINI, ENTROPY)

# scores closer than this are ties, decided by feature WSC then index
TIE_EPS = 1e-12


class UnseparableSubset(Exception):
    """Two vectors share every feature bit but carry different labels."""

    def __init__(self, triple, positive_pair, negative_pair):
        self.triple = triple
        self.positive_pair = positive_pair
        self.negative_pair = negative_pair
        super().__init__(
            f"{triple}: no feature separates {positive_pair} (permitted) from {negative_pair} (denied); "
            "raise the path-length limits"
        )


@dataclass
class Leaf:
    permit: bool
    size: int = 0


@dataclass
class Node:
    feature: int
    false: "TreeNode"
    true: "TreeNode"
    size: int = 0


TreeNode = Union[Leaf, Node]


@dataclass(frozen=True)
class SplitScore:
    impurity: float
    feature_wsc: int
    feature_index: int

    def key(self) -> tuple:
        return (self.impurity, self.feature_wsc, self.feature_index)


def gini_impurity(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def entropy_impurity(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return float(h)


def _binary_impurity(pos: np.ndarray, n: np.ndarray, criterion: str) -> np.ndarray:
    """Vectorized impurity of child sets with `pos` positives out of `n`."""
    n = n.astype(np.float64)
    pos = pos.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, pos / n, 0.0)
        q = 1.0 - p
        if criterion == GINI:
            imp = 1.0 - p * p - q * q
        elif criterion == ENTROPY:
            imp = -(np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
                    + np.where(q > 0, q * np.log2(np.where(q > 0, q, 1.0)), 0.0))
        else:
            raise ValueError(f"unknown criterion {criterion!r}")
    return np.where(n > 0, imp, 0.0)


def _split_scores(n1, p1, m, npos, criterion):
    n0 = m - n1
    p0 = npos - p1
    return (n1 / m) * _binary_impurity(p1, n1, criterion) + (n0 / m) * _binary_impurity(p0, n0, criterion)


def score_split(ds: LabeledDataset, rows: np.ndarray, feature: int, criterion: str = GINI) -> SplitScore:
    """Weighted child impurity of splitting `rows` on `feature`."""
    rows = np.asarray(rows)
    col = ds.bits[feature, rows]
    y = ds.labels[rows]
    m = len(rows)
    n1 = np.array([col.sum()])
    p1 = np.array([(col & y).sum()])
    score = _split_scores(n1, p1, m, y.sum(), criterion)[0]
    return SplitScore(float(score), ds.features[feature].wsc, feature)


class _Scorer:
    """Per-dataset split scoring: counts via one mat-vec per node."""

    def __init__(self, ds: LabeledDataset):
        self.ds = ds
        self.fbits = ds.bits.astype(np.float32)
        self.wsc = ds.wsc
        self.identity = ds.identity

    def choose(self, mask: np.ndarray, criterion: str) -> int:
        ds = self.ds
        m = int(mask.sum())
        ymask = mask & ds.labels
        npos = int(ymask.sum())
        n1 = self.fbits @ mask.astype(np.float32)
        p1 = self.fbits @ ymask.astype(np.float32)
        splitting = (n1 > 0) & (n1 < m)
        if not splitting.any():
            rows = np.nonzero(mask)[0]
            pair = conflicting_rows(ds.bits[:, rows], ds.labels[rows])
            p, q = (rows[pair[0]], rows[pair[1]]) if pair else (rows[0], rows[-1])
            raise UnseparableSubset(ds.triple, ds.pair(p), ds.pair(q))
        scores = _split_scores(n1.astype(np.float64), p1.astype(np.float64), m, npos, criterion)
        cand = splitting & ~self.identity
        if not cand.any():
            cand = splitting
        return _argmin(scores, self.wsc, cand)


def _argmin(scores: np.ndarray, wsc: np.ndarray, cand: np.ndarray) -> int:
    idx = np.nonzero(cand)[0]
    best = scores[idx].min()
    tied = idx[scores[idx] <= best + TIE_EPS]
    order = np.lexsort((tied, wsc[tied]))
    return int(tied[order[0]])


def choose_split(ds: LabeledDataset, rows, criterion: str = GINI) -> int:
    """Best feature for splitting `rows`: (impurity, WSC, index) argmin.

    Only features that actually split the rows are candidates, and the
    ``id`` features are considered only when no other feature splits.
    """
    mask = np.zeros(len(ds), dtype=bool)
    mask[np.asarray(rows)] = True
    return _Scorer(ds).choose(mask, criterion)


def build_tree(ds: LabeledDataset, criterion: str = GINI) -> TreeNode:
    """Grow a tree until every leaf is label-homogeneous (no pruning)."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    n = len(ds)
    if n == 0:
        return Leaf(False, 0)
    scorer = None
    root = None
    # explicit stack of (rows mask, parent node, branch); depth is bounded only by |features|
    stack: list = [(np.ones(n, dtype=bool), None, None)]
    while stack:
        mask, parent, branch = stack.pop()
        size = int(mask.sum())
        npos = int((mask & ds.labels).sum())
        if npos == 0 or npos == size:
            node: TreeNode = Leaf(npos > 0, size)
        else:
            if scorer is None:
                scorer = _Scorer(ds)
            f = scorer.choose(mask, criterion)
            col = ds.bits[f]
            node = Node(f, None, None, size)
            stack.append((mask & col, node, "true"))
            stack.append((mask & ~col, node, "false"))
        if parent is None:
            root = node
        else:
            setattr(parent, branch, node)
    return root


def classify(tree: TreeNode, bits) -> bool:
    node = tree
    while isinstance(node, Node):
        node = node.true if bits[node.feature] else node.false
    return node.permit


def predict(tree: TreeNode, ds: LabeledDataset) -> np.ndarray:
    return np.array([classify(tree, ds.bits[:, i]) for i in range(len(ds))], dtype=bool)


def permit_paths(tree: TreeNode) -> list:
    """Each root-to-PERMIT path as a list of ``(feature index, outcome)``."""
    out = []
    stack = [(tree, [])]
    while stack:
        node, path = stack.pop()
        if isinstance(node, Leaf):
            if node.permit:
                out.append(path)
            continue
        stack.append((node.true, path + [(node.feature, True)]))
        stack.append((node.false, path + [(node.feature, False)]))
    return out


def _false_branch_atom(feature, cm, cls):
    body = feature.body
    if (cm is not None and feature.kind in (SUBJECT, RESOURCE) and body.op == IN
            and body.val == frozenset((True,))
            and cm.path_type(cls, body.path) == BOOLEAN
            and cm.path_multiplicity(cls, body.path) == ONE):
        return Condition(body.path, IN, frozenset((False,)))
    return body.negate()


def extract_rules(tree: TreeNode, ds: LabeledDataset, cm=None) -> list:
    """One rule per root-to-PERMIT path; False edges yield negated atoms.

    With a class model, the False edge of a test ``p = True`` on a Boolean
    path of multiplicity one yields the positive condition ``p = False``.
    """
    cs, cr, action = ds.triple
    rules = []
    for path in permit_paths(tree):
        sc, rc, con = set(), set(), set()
        for fi, outcome in path:
            feat = ds.features[fi]
            cls = cs if feat.kind == SUBJECT else cr
            atom = feat.body if outcome else _false_branch_atom(feat, cm, cls)
            {SUBJECT: sc, RESOURCE: rc, CONSTRAINT: con}[feat.kind].add(atom)
        rules.append(Rule(cs, sc, cr, rc, con, {action}))
    return rules


def tree_to_text(tree: TreeNode, ds: LabeledDataset) -> str:
    lines = [f"# tree for {ds.triple}"]

    def walk(node, depth, label):
        pad = "  " * depth
        if isinstance(node, Leaf):
            lines.append(f"{pad}{label}{'PERMIT' if node.permit else 'DENY'} ({node.size})")
            return
        lines.append(f"{pad}{label}[{ds.features[node.feature]}] ({node.size})")
        walk(node.true, depth + 1, "T: ")
        walk(node.false, depth + 1, "F: ")

    walk(tree, 0, "")
    return "\n".join(lines) + "\n"


def tree_to_dot(tree: TreeNode, ds: LabeledDataset) -> str:
    lines = ["digraph tree {", "  node [shape=box];"]
    counter = [0]

    def walk(node) -> str:
        name = f"n{counter[0]}"
        counter[0] += 1
        if isinstance(node, Leaf):
            label = "PERMIT" if node.permit else "DENY"
            lines.append(f'  {name} [label="{label} ({node.size})", style=filled];')
            return name
        text = str(ds.features[node.feature]).replace('"', '\\"')
        lines.append(f'  {name} [label="{text}"];')
        t = walk(node.true)
        f = walk(node.false)
        lines.append(f'  {name} -> {t} [label="True"];')
        lines.append(f'  {name} -> {f} [label="False"];')
        return name

    walk(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_depth(tree: TreeNode) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(tree_depth(tree.true), tree_depth(tree.false))


def tree_features_on_paths(tree: TreeNode) -> list:
    """Feature index sequences along every root-to-leaf path."""
    out = []
    stack: list = [(tree, [])]
    while stack:
        node, path = stack.pop()
        if isinstance(node, Leaf):
            out.append(path)
        else:
            stack.append((node.true, path + [node.feature]))
            stack.append((node.false, path + [node.feature]))
    return out
