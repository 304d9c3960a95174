"""Semantic and syntactic policy similarity, plus the reference simplification."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .engine import Evaluator
from .features import FeatureLimits
from .improve import DTRM, DTRM_MINUS, CandidatePolicy, Observer, improve
from .model import Condition, Rule, canonical_rules, wsc_policy

log = logging.getLogger(__name__)


def jaccard(s1, s2) -> float:
    """Jaccard index of two sets; non-set arguments compare as single values."""
    if not isinstance(s1, (set, frozenset)) or not isinstance(s2, (set, frozenset)):
        return 1.0 if s1 == s2 else 0.0
    union = len(s1 | s2)
    if union == 0:
        return 1.0
    return len(s1 & s2) / union


def atomic_condition_similarity(a: Condition, b: Condition) -> float:
    if a.path != b.path:
        return 0.0
    return (jaccard(a.neg, b.neg) + jaccard(a.path, b.path) + jaccard(a.values, b.values)) / 3.0


def condition_similarity(s1: Iterable[Condition], s2: Iterable[Condition]) -> float:
    s1, s2 = list(s1), list(s2)
    paths = {c.path for c in s1} | {c.path for c in s2}
    if not paths:
        return 1.0
    total = sum(atomic_condition_similarity(a, b) for a in s1 for b in s2)
    val = total / len(paths)
    if val > 1.0:
        log.debug("condition similarity %.6f clamped to 1", val)
        val = 1.0
    return max(0.0, val)


def rule_similarity(r1: Rule, r2: Rule) -> float:
    parts = (
        jaccard(r1.subject_type, r2.subject_type),
        condition_similarity(r1.subject_condition, r2.subject_condition),
        jaccard(r1.resource_type, r2.resource_type),
        condition_similarity(r1.resource_condition, r2.resource_condition),
        jaccard(r1.constraint, r2.constraint),
        jaccard(r1.actions, r2.actions),
    )
    return sum(parts) / 6.0


def best_matches(mined: list, reference: list) -> list:
    """``(mined index, reference index, score)`` for each mined rule's best match."""
    out = []
    for i, r in enumerate(mined):
        best_j, best = -1, -1.0
        for j, q in enumerate(reference):
            s = rule_similarity(r, q)
            if s > best:
                best_j, best = j, s
        out.append((i, best_j, best))
    return out


def policy_syntactic_similarity(mined: Iterable[Rule], reference: Iterable[Rule]) -> float:
    """Mean over mined rules of the best rule similarity against the reference."""
    mined, reference = list(mined), list(reference)
    if not mined and not reference:
        return 1.0
    if not mined or not reference:
        return 0.0
    return sum(s for _, _, s in best_matches(mined, reference)) / len(mined)


def semantic_similarity(ev: Evaluator, p1: Iterable[Rule], p2: Iterable[Rule]) -> float:
    return jaccard(ev.policy_meaning(p1), ev.policy_meaning(p2))


def simplify_reference(ev: Evaluator, rules: Iterable[Rule], au: Optional[Iterable] = None,
                       mode: Optional[str] = None, limits: FeatureLimits | None = None,
                       observer: Optional[Observer] = None) -> list:
    """Apply merging and the simplification passes to a reference policy.

    `au` defaults to the policy's own meaning.  The mode defaults to the
    negation-aware variant when any rule contains a negated atom.
    """
    rules = canonical_rules(rules)
    if au is None:
        au = ev.policy_meaning(rules)
    if mode is None:
        mode = DTRM_MINUS if any(r.negated_atoms() for r in rules) else DTRM
    cp = CandidatePolicy(ev, au, rules)
    improve(cp, mode, limits, observer, eliminate=False)
    return canonical_rules(cp.rules)


@dataclass
class SimilarityReport:
    semantic: float
    syntactic: float
    wsc_mined: int
    wsc_reference: int
    per_rule: list = field(default_factory=list)

    @property
    def wsc_ratio(self) -> float:
        return self.wsc_mined / self.wsc_reference if self.wsc_reference else float("inf")

    def to_json(self) -> dict:
        return {
            "semantic": self.semantic,
            "syntactic": self.syntactic,
            "wscMined": self.wsc_mined,
            "wscReference": self.wsc_reference,
            "wscRatio": self.wsc_ratio if self.wsc_reference else None,
            "perRuleBestMatch": [{"mined": i, "reference": j, "score": s} for i, j, s in self.per_rule],
        }

    def to_text(self) -> str:
        rows = [("semantic", f"{self.semantic:.6f}"), ("syntactic", f"{self.syntactic:.6f}"),
                ("wsc mined", str(self.wsc_mined)), ("wsc reference", str(self.wsc_reference))]
        if self.wsc_reference:
            rows.append(("wsc ratio", f"{self.wsc_ratio:.4f}"))
        width = max(len(k) for k, _ in rows)
        lines = [f"{k.ljust(width)}  {v}" for k, v in rows]
        if self.per_rule:
            lines.append("")
            lines.append(f"{'mined':>5}  {'ref':>5}  score")
            lines += [f"{i:>5}  {j:>5}  {s:.6f}" for i, j, s in self.per_rule]
        return "\n".join(lines) + "\n"


def compare_policies(ev: Evaluator, mined: Iterable[Rule], reference: Iterable[Rule]) -> SimilarityReport:
    mined, reference = canonical_rules(mined), canonical_rules(reference)
    return SimilarityReport(
        semantic=semantic_similarity(ev, mined, reference),
        syntactic=policy_syntactic_similarity(mined, reference),
        wsc_mined=wsc_policy(mined),
        wsc_reference=wsc_policy(reference),
        per_rule=best_matches(mined, reference),
    )
