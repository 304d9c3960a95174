"""Mining relationship-based access control policies from ACLs and object data."""
from .engine import Evaluator, au_matrices
from .features import FeatureLimits, LabeledDataset, build_dataset, generate_features
from .improve import DTRM, DTRM_MINUS, CandidatePolicy, NegationEliminationExhausted, improve
from .metrics import (
    SimilarityReport,
    compare_policies,
    jaccard,
    policy_syntactic_similarity,
    rule_similarity,
    semantic_similarity,
    simplify_reference,
)
from .mining import MiningResult, mine_policy
from .model import (
    ClassModel,
    Condition,
    Constraint,
    FieldDecl,
    Obj,
    ObjectModel,
    PolicyError,
    Rule,
    SraTuple,
    nav,
    policy_meaning,
    rule_meaning,
    wsc_policy,
    wsc_rule,
)
from .tree import UnseparableSubset, build_tree, extract_rules

__all__ = [
    "CandidatePolicy", "ClassModel", "Condition", "Constraint", "DTRM", "DTRM_MINUS", "Evaluator",
    "FeatureLimits", "FieldDecl", "LabeledDataset", "MiningResult", "NegationEliminationExhausted", "Obj",
    "ObjectModel", "PolicyError", "Rule", "SimilarityReport", "SraTuple", "UnseparableSubset", "au_matrices",
    "build_dataset", "build_tree", "compare_policies", "extract_rules", "generate_features", "improve",
    "jaccard", "mine_policy", "nav", "policy_meaning", "policy_syntactic_similarity", "rule_meaning",
    "rule_similarity", "semantic_similarity", "simplify_reference", "wsc_policy", "wsc_rule",
]
