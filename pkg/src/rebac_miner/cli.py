"""Command-line interface: ``rebac-miner {mine,evaluate,compare,generate,stats}``.

Exit codes: 0 success, 1 inconsistent result, 2 bad input, 3 mining failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import serialize
from .engine import Evaluator
from .features import FeatureLimits, enumerate_triples
from .improve import DTRM, MODES, NegationEliminationExhausted
from .metrics import compare_policies, jaccard, simplify_reference
from .mining import dump_trees, mine_policy
from .model import PolicyError
from .synthgen import GenConfig, GenerationError, emit_instance, generate
from .tree import CRITERIA, GINI, UnseparableSubset

EXIT_OK = 0
EXIT_INCONSISTENT = 1
EXIT_INPUT = 2
EXIT_ALGORITHM = 3

LOG_ENV = "REBAC_MINER_LOG"

log = logging.getLogger("rebac_miner")


class InputError(Exception):
    pass


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _mining_args(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=MODES, default=DTRM)
    p.add_argument("--criterion", choices=CRITERIA, default=GINI)
    d = FeatureLimits()
    p.add_argument("--mspl", type=int, default=d.mspl, help="max subject path length")
    p.add_argument("--mrpl", type=int, default=d.mrpl, help="max resource path length")
    p.add_argument("--mtpl", type=int, default=d.mtpl, help="max total constraint path length")
    p.add_argument("--mcse", type=int, default=d.mcse, help="max condition set elements")
    p.add_argument("--sped", type=int, default=d.sped, help=argparse.SUPPRESS)
    p.add_argument("--rped", type=int, default=d.rped, help=argparse.SUPPRESS)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dump-trees", metavar="DIR", default=None)
    p.add_argument("--strict", action="store_true",
                   help="fail instead of enumerating ids when negation elimination is exhausted")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rebac-miner", description="Mine ReBAC policies from ACLs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine a policy from an ACL instance")
    p.add_argument("--instance", required=True, metavar="DIR",
                   help="directory with classmodel.json, objectmodel.json, acl.json")
    p.add_argument("--out", required=True, metavar="DIR")
    _mining_args(p)

    p = sub.add_parser("evaluate", help="round trip: reference rules -> AU -> mine -> compare")
    p.add_argument("--instance", required=True, metavar="DIR",
                   help="directory with classmodel.json, objectmodel.json, reference_policy.json")
    p.add_argument("--out", required=True, metavar="DIR")
    _mining_args(p)

    p = sub.add_parser("compare", help="similarity of two policies over one instance")
    p.add_argument("policy_a")
    p.add_argument("policy_b")
    p.add_argument("--instance", required=True, metavar="DIR")
    p.add_argument("--out", metavar="FILE", default=None, help="also write the report as JSON")
    p.add_argument("--json", action="store_true", help="print JSON instead of the text table")

    p = sub.add_parser("generate", help="write a seeded synthetic instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--rules", type=int, default=5)
    p.add_argument("--subject-classes", type=int, default=1)
    p.add_argument("--resource-classes", type=int, default=2)
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("stats", help="instance size statistics")
    p.add_argument("--instance", required=True, metavar="DIR")
    return ap


def _limits(args) -> FeatureLimits:
    try:
        return FeatureLimits(args.mspl, args.mrpl, args.mtpl, args.mcse, args.sped, args.rped)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load(directory: str, need: tuple) -> dict:
    if not os.path.isdir(directory):
        raise InputError(f"{directory}: not a directory")
    inst = serialize.load_instance(directory)
    for key, fname in (("au", serialize.ACL_FILE), ("rules", serialize.POLICY_FILE)):
        if key in need and key not in inst:
            raise InputError(f"{os.path.join(directory, fname)}: file not found")
    return inst


def _write_outputs(out: str, files: dict) -> None:
    os.makedirs(out, exist_ok=True)
    for name, data in files.items():
        serialize.save_json(os.path.join(out, name), data)


def _mine(args, om, au):
    if args.threads < 1:
        raise InputError("--threads must be >= 1")
    res = mine_policy(om, au, _limits(args), args.criterion, args.mode, args.threads,
                      keep_trees=bool(args.dump_trees), strict=args.strict)
    if args.dump_trees:
        dump_trees(res.triples, args.dump_trees)
    return res


def cmd_mine(args) -> int:
    inst = _load(args.instance, ("au",))
    om, au, actions = inst["object_model"], inst["au"], inst["actions"]
    res = _mine(args, om, au)
    ev = Evaluator(om)
    sem = jaccard(ev.policy_meaning(res.rules), frozenset(au))
    report = dict(res.report, semantic_similarity=sem)
    _write_outputs(args.out, {
        "mined_policy.json": serialize.policy_to_json(res.rules, actions),
        "report.json": report,
        "timings.json": res.timings,
    })
    print(f"rules: {len(res.rules)}  wsc: {res.wsc}  semantic similarity: {sem:.6f}")
    return EXIT_OK if sem == 1.0 else EXIT_INCONSISTENT


def cmd_evaluate(args) -> int:
    inst = _load(args.instance, ("rules",))
    om, ref = inst["object_model"], inst["rules"]
    ev = Evaluator(om)
    au = ev.policy_meaning(ref)
    res = _mine(args, om, au)
    simplified = simplify_reference(ev, ref, au)
    rep = compare_policies(ev, res.rules, simplified)
    actions = inst["policy_actions"]
    _write_outputs(args.out, {
        "mined_policy.json": serialize.policy_to_json(res.rules, actions),
        "simplified_reference.json": serialize.policy_to_json(simplified, actions),
        "evaluation.json": {"similarity": rep.to_json(), "mining": res.report},
        "timings.json": res.timings,
    })
    sys.stdout.write(rep.to_text())
    return EXIT_OK if rep.semantic == 1.0 else EXIT_INCONSISTENT


def cmd_compare(args) -> int:
    inst = _load(args.instance, ())
    cm, om = inst["class_model"], inst["object_model"]
    a, _ = serialize.load_policy(args.policy_a, cm)
    b, _ = serialize.load_policy(args.policy_b, cm)
    rep = compare_policies(Evaluator(om), a, b)
    if args.out:
        serialize.save_json(args.out, rep.to_json())
    if args.json:
        sys.stdout.write(serialize.dumps(rep.to_json()))
    else:
        sys.stdout.write(rep.to_text())
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        cfg = GenConfig(seed=args.seed, n=args.n, rules=args.rules,
                        subject_classes=args.subject_classes, resource_classes=args.resource_classes)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    inst = generate(cfg)
    emit_instance(inst, args.out)
    print(f"wrote {args.out}: {len(inst.object_model)} objects, {len(inst.rules)} rules, {len(inst.au)} authorizations")
    return EXIT_OK


def instance_stats(om, au) -> dict:
    """#obj, #field (declared fields plus id, summed over objects), #FV per triple."""
    cm = om.class_model
    n_field = sum(len(cm.fields(o.type)) + 1 for o in om.objects.values())
    triples = []
    for cs, cr, a in enumerate_triples(au, om):
        triples.append({"triple": [cs, cr, a], "fv": len(om.of_type(cs)) * len(om.of_type(cr))})
    return {"objects": len(om), "fields": n_field, "triples": triples,
            "total_fv": sum(t["fv"] for t in triples)}


def cmd_stats(args) -> int:
    inst = _load(args.instance, ())
    om = inst["object_model"]
    if "au" in inst:
        au = inst["au"]
    elif "rules" in inst:
        au = Evaluator(om).policy_meaning(inst["rules"])
    else:
        au = frozenset()
    sys.stdout.write(serialize.dumps(instance_stats(om, au)))
    return EXIT_OK


COMMANDS = {"mine": cmd_mine, "evaluate": cmd_evaluate, "compare": cmd_compare,
            "generate": cmd_generate, "stats": cmd_stats}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, PolicyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (UnseparableSubset, NegationEliminationExhausted, GenerationError) as exc:
        print(f"mining failed: {exc}", file=sys.stderr)
        return EXIT_ALGORITHM
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
