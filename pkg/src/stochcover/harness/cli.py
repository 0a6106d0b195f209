"""Command-line entry point: ``stochcover <command> ...``.

Exit codes: 0 success, 1 a verification or reproduction check failed,
2 bad configuration, unreadable input, or an instance outside the budget.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..accounting import LEMMAS, build_ledger, verify_all
from ..errors import BudgetExceeded, ConfigError, ReproductionMismatch, StochCoverError
from ..greedy import Selector, greedy_policy
from ..instance import DEFAULT_BUDGET
from ..optimal import optimal_policy
from ..policy import expected_cost_exact, expected_cost_mc, materialize_tree
from ..serialization import instance_to_dict, load_instances
from .experiment import ExperimentConfig, exit_code, rows_to_csv, run_experiment
from .generators import KINDS, GeneratorConfig, corpus, gen_instance
from .repro import reproduce_appendix_b, reproduce_figure_example

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="cap on enumerated realizations / lattice size")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    return p


def _selector_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--selector", choices=("exact", "adversarial"), default="exact")
    p.add_argument("--alpha", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="stochcover", description="Adaptive greedy for stochastic submodular cover.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate instances")
    g.add_argument("--kind", choices=KINDS, default="coverage")
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--m", type=int, default=6)
    g.add_argument("--density", type=float, default=0.3)
    g.add_argument("--real", action="store_true", help="non-integer weights or gains")
    g.add_argument("--corpus", type=int, default=None, metavar="COUNT", help="mixed-family corpus instead of one instance")

    s = sub.add_parser("solve", parents=[common], help="expected cost of greedy or optimal policy")
    s.add_argument("instance", type=Path)
    s.add_argument("--policy", choices=("greedy", "optimal"), default="greedy")
    _selector_args(s)
    s.add_argument("--emit-tree", type=Path, default=None)

    e = sub.add_parser("eval", parents=[common], help="exact and Monte Carlo expected cost")
    e.add_argument("instance", type=Path)
    e.add_argument("--policy", choices=("greedy", "optimal"), default="greedy")
    _selector_args(e)
    e.add_argument("--trials", type=int, default=10_000)

    v = sub.add_parser("verify", parents=[common], help="check the accounting lemmas by enumeration")
    v.add_argument("instance", type=Path, nargs="?")
    v.add_argument("--corpus", type=int, default=None, metavar="COUNT")
    v.add_argument("--lemmas", default="all", help="'all' or comma list such as L1,L3,T1")
    v.add_argument("--alpha", type=float, default=1.0)

    r = sub.add_parser("repro", parents=[common], help="rebuild a worked example")
    r.add_argument("which", choices=("figure-example", "appendix-b"))

    rep = sub.add_parser("report", parents=[common], help="run an experiment config")
    rep.add_argument("config", type=Path)
    return parser


def _selector(args) -> Selector:
    if args.selector == "exact":
        if args.alpha != 1.0:
            raise ConfigError("--alpha requires --selector adversarial")
        return Selector.exact()
    return Selector.adversarial(args.alpha)


def _single(path) -> object:
    insts = load_instances(path)
    if len(insts) != 1:
        raise ConfigError(f"{path} holds {len(insts)} instances; expected one")
    return insts[0]


def _policy(inst, args):
    if args.policy == "optimal":
        return optimal_policy(inst, args.budget)
    return greedy_policy(inst, _selector(args))


def _emit(args, payload, csv_text: str = None) -> None:
    text = csv_text if (args.format == "csv" and csv_text is not None) else json.dumps(payload, indent=2, default=str)
    if args.out:
        args.out.write_text(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def cmd_gen(args) -> int:
    if args.corpus is not None:
        payload = [instance_to_dict(i) for i in corpus(args.corpus, args.seed)]
    else:
        cfg = GeneratorConfig(args.kind, args.n, args.k, args.m, density=args.density, integer=not args.real, seed=args.seed)
        payload = instance_to_dict(gen_instance(cfg))
    _emit(args, payload)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _single(args.instance)
    tree = materialize_tree(inst, _policy(inst, args))
    if args.emit_tree:
        args.emit_tree.write_text(json.dumps(tree.to_dict(), indent=2))
    _emit(args, {"policy": args.policy, "expected_cost": expected_cost_exact(inst, tree), "nodes": len(tree.nodes)})
    return EXIT_OK


def cmd_eval(args) -> int:
    inst = _single(args.instance)
    tree = materialize_tree(inst, _policy(inst, args))
    mean, stderr = expected_cost_mc(inst, None, args.trials, args.seed, tree=tree)
    exact = expected_cost_exact(inst, tree)
    _emit(args, {"policy": args.policy, "exact": exact, "mc_mean": mean, "mc_stderr": stderr, "trials": args.trials})
    return EXIT_OK


def _parse_lemmas(text: str) -> list:
    if text == "all":
        return list(LEMMAS)
    out = [w.strip().upper() for w in text.split(",") if w.strip()]
    bad = [w for w in out if w not in LEMMAS]
    if bad:
        raise ConfigError(f"unknown lemmas {bad}; choose from {', '.join(LEMMAS)}")
    return out


def cmd_verify(args) -> int:
    lemmas = _parse_lemmas(args.lemmas)
    if (args.instance is None) == (args.corpus is None):
        raise ConfigError("give exactly one of an instance file or --corpus COUNT")
    insts = corpus(args.corpus, args.seed) if args.corpus is not None else load_instances(args.instance)
    selector = Selector.exact() if args.alpha == 1.0 else Selector.adversarial(args.alpha)
    totals = {w: {"instances": 0, "failed_instances": 0, "checks": 0, "failed_checks": 0, "skipped_degenerate": 0} for w in lemmas}
    per_instance = []
    for idx, inst in enumerate(insts):
        reports = verify_all(build_ledger(inst, selector, args.budget), lemmas, args.tolerance)
        per_instance.append({"index": idx, **{w: r.summary() for w, r in reports.items()}})
        for w, r in reports.items():
            t = totals[w]
            t["instances"] += 1
            t["failed_instances"] += not r.passed
            t["checks"] += len(r.checks)
            t["failed_checks"] += len(r.failures)
            t["skipped_degenerate"] += r.skipped
    passed = all(t["failed_instances"] == 0 for t in totals.values())
    payload = {"alpha": args.alpha, "tolerance": args.tolerance, "passed": passed, "totals": totals, "instances": per_instance}
    _emit(args, payload)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_repro(args) -> int:
    fn = reproduce_figure_example if args.which == "figure-example" else reproduce_appendix_b
    try:
        payload = fn()
    except ReproductionMismatch as exc:
        print(f"reproduction mismatch: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(args, payload)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    report = run_experiment(cfg)
    _emit(args, report, rows_to_csv(report["rows"]))
    return exit_code(report)


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "repro": cmd_repro,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BudgetExceeded, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StochCoverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
