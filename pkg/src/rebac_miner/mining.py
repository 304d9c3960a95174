"""End-to-end mining: Phase 1 per ``(Cs, Cr, a)`` triple, then Phase 2."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .engine import Evaluator, au_matrices
from .features import (
    FeatureLimits,
    build_dataset,
    collapse_equivalent_features,
    drop_constant_features,
    enumerate_triples,
    generate_features,
)
from .improve import DTRM, MODES, CandidatePolicy, Observer, improve
from .model import ObjectModel, SraTuple, canonical_rules, wsc_policy
from .tree import CRITERIA, GINI, build_tree, extract_rules, tree_depth, tree_to_dot, tree_to_text

log = logging.getLogger(__name__)

PHASE1_STAGES = ("dataset", "tree", "extraction")
PHASE2_STAGES = ("negation_elimination", "merge", "simplify")


@dataclass
class TripleResult:
    triple: tuple
    rules: list
    n_vectors: int
    n_features: int
    n_features_reduced: int
    collapse_skipped: bool
    depth: int
    timings: dict
    tree: object = None
    dataset: object = None


@dataclass
class MiningResult:
    rules: list
    report: dict
    timings: dict
    triples: list = field(default_factory=list)

    @property
    def wsc(self) -> int:
        return self.report["final"]["wsc"]


def _mine_triple(ev: Evaluator, au_mats: dict, triple: tuple, limits: FeatureLimits, criterion: str,
                 keep: bool) -> TripleResult:
    cs, cr, _ = triple
    t = {}
    t0 = time.perf_counter()
    feats = generate_features(ev, cs, cr, limits)
    ds = build_dataset(ev, au_mats.get(triple), triple, feats)
    n_feat = len(ds.features)
    ds = collapse_equivalent_features(drop_constant_features(ds))
    t1 = time.perf_counter()
    tree = build_tree(ds, criterion)
    t2 = time.perf_counter()
    rules = extract_rules(tree, ds, ev.cm)
    t3 = time.perf_counter()
    t["dataset"], t["tree"], t["extraction"] = t1 - t0, t2 - t1, t3 - t2
    return TripleResult(triple, rules, len(ds), n_feat, len(ds.features),
                        bool(ds.meta.get("equivalence_collapse_skipped")), tree_depth(tree), t,
                        tree if keep else None, ds if keep else None)


def dump_trees(results: Iterable[TripleResult], directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for res in results:
        if res.tree is None:
            continue
        stem = "__".join(res.triple)
        with open(os.path.join(directory, stem + ".txt"), "w", encoding="utf-8") as fh:
            fh.write(tree_to_text(res.tree, res.dataset))
        with open(os.path.join(directory, stem + ".dot"), "w", encoding="utf-8") as fh:
            fh.write(tree_to_dot(res.tree, res.dataset))


def mine_policy(om: ObjectModel, au: Iterable, limits: FeatureLimits | None = None, criterion: str = GINI,
                mode: str = DTRM, threads: int = 1, observer: Optional[Observer] = None,
                keep_trees: bool = False, strict: bool = False) -> MiningResult:
    """Mine a policy whose meaning equals `au` over `om`.

    Raises UnseparableSubset; with `strict`, also NegationEliminationExhausted
    instead of falling back to id enumeration.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    limits = limits or FeatureLimits()
    au = frozenset(SraTuple(*t) for t in au)
    t_start = time.perf_counter()
    ev = Evaluator(om)
    au_mats = au_matrices(ev, au)
    triples = enumerate_triples(au, om)

    def work(triple):
        return _mine_triple(ev, au_mats, triple, limits, criterion, keep_trees)

    if threads == 1 or len(triples) <= 1:
        results = [work(t) for t in triples]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, triples))
    t_phase1 = time.perf_counter()

    timings = {s: sum(r.timings[s] for r in results) for s in PHASE1_STAGES}
    phase1_rules = canonical_rules(r for res in results for r in res.rules)
    cp = CandidatePolicy(ev, au, phase1_rules, au_mats)
    phase1 = {"rules": len(cp.rules), "wsc": cp.wsc(),
              "negative_features": sum(len(r.negated_atoms()) for r in cp.rules)}
    stage_log: list = []

    def observe(stage, rules):
        stage_log.append({"stage": stage, "rules": len(rules), "wsc": wsc_policy(rules)})
        if observer is not None:
            observer(stage, rules)

    stats = improve(cp, mode, limits, observe, timings, strict=strict)
    t_end = time.perf_counter()
    timings["phase1"] = t_phase1 - t_start
    timings["phase2"] = t_end - t_phase1
    timings["total"] = t_end - t_start

    rules = canonical_rules(cp.rules)
    report = {
        "mode": mode,
        "criterion": criterion,
        "limits": {k: getattr(limits, k) for k in ("mspl", "mrpl", "mtpl", "mcse", "sped", "rped")},
        "au_size": len(au),
        "triples": [
            {"triple": list(r.triple), "vectors": r.n_vectors, "features": r.n_features,
             "features_reduced": r.n_features_reduced, "tree_depth": r.depth, "rules": len(r.rules),
             "equivalence_collapse_skipped": r.collapse_skipped}
            for r in results
        ],
        "feature_vectors": sum(r.n_vectors for r in results),
        "phase1": phase1,
        "negation_elimination": {"histogram": stats["negation_histogram"],
                                 **stats["after_negation_elimination"]},
        "merges": stats["merges"],
        "rounds": stats["rounds"],
        "stages": stage_log,
        "final": {"rules": len(rules), "wsc": wsc_policy(rules),
                  "negative_features": sum(len(r.negated_atoms()) for r in rules)},
    }
    log.info("mined %d rules (WSC %d) in %.3fs", len(rules), report["final"]["wsc"], timings["total"])
    return MiningResult(rules, report, timings, results)


def phase1_fraction(timings: dict) -> float:
    p1 = sum(timings.get(s, 0.0) for s in PHASE1_STAGES)
    p2 = sum(timings.get(s, 0.0) for s in PHASE2_STAGES)
    total = p1 + p2
    return p1 / total if total > 0 else 1.0
