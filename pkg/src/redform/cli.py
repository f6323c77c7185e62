"""Command-line interface.

Machine-readable JSON goes to stdout, human logs to stderr. Exit status:
0 success, 1 verified-negative result (e.g. infeasible reduced form),
2 usage or validation error, 3 internal fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

from . import bruteforce, geometry, optimizer, sampling, vvcg
from .errors import CapExceeded, SolverFault, ValidationError
from .model import Instance, ReducedForm, load_instance
from .rational import parse_rational, rat_str

logger = logging.getLogger("redform")

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_FAULT = 3


def _read_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle, parse_float=Fraction)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _load_instance_file(path: str) -> Instance:
    return load_instance(_read_json(path))


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, default=str)
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
        logger.info("wrote %s", out)
    else:
        print(text)


def _budgets_for(inst: Instance, flag: bool):
    if not flag:
        return None
    if inst.budgets is None:
        raise ValidationError("--budgets given but the instance has no budgets")
    return inst.budgets


def cmd_check_rf(args) -> int:
    inst = _load_instance_file(args.instance)
    rf = ReducedForm.from_json(inst, _read_json(args.rf))
    verdict = geometry.separation_oracle(rf, inst)
    _emit(verdict.to_json(), args.out)
    return EXIT_OK if verdict.feasible else EXIT_NEGATIVE


def cmd_decompose(args) -> int:
    inst = _load_instance_file(args.instance)
    rf = ReducedForm.from_json(inst, _read_json(args.rf))
    verdict = geometry.separation_oracle(rf, inst)
    if not verdict.feasible:
        _emit(verdict.to_json(), args.out)
        return EXIT_NEGATIVE
    decomposition = geometry.decompose(rf, inst)
    recombined = vvcg.reduced_form_of(decomposition, inst)
    if recombined.entries != rf.entries:
        raise SolverFault("recombination check failed before emitting")
    doc = {
        "feasible": True,
        "components": [
            {
                "prob": rat_str(prob),
                "weights": [rat_str(x) for x in rule.weights],
                "virtual": [rat_str(x) for x in rule.virtual],
                "perturbed": rule.perturbed,
            }
            for prob, rule in decomposition.components
        ],
    }
    _emit(doc, args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    inst = _load_instance_file(args.instance)
    mech = optimizer.run_pipeline(
        inst,
        epsilon=parse_rational(args.epsilon),
        delta=None if args.delta is None else parse_rational(args.delta),
        budgets=_budgets_for(inst, args.budgets),
        seed=args.seed,
        exact=True if args.exact else None,
        k=args.k,
        k_prime=args.k_prime,
        exact_cap=args.max_enum,
    )
    _emit(optimizer.mechanism_to_json(mech, inst), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = _load_instance_file(args.instance)
    mech = optimizer.mechanism_from_json(_read_json(args.mechanism), inst)
    report = optimizer.simulate(mech, inst, trials=args.trials, seed=args.seed)
    doc = {"trials": report["trials"], "seed": args.seed}
    if args.trials:
        doc.update({
            "revenue_mean": rat_str(report["revenue_mean"]),
            "revenue_mean_dec": report["revenue_mean_dec"],
            "per_bidder_mean_payment": [
                rat_str(p) for p in report["per_bidder_mean_payment"]
            ],
            "award_frequency": [
                [rat_str(f) for f in row] for row in report["award_frequency"]
            ],
        })
    _emit(doc, args.out)
    return EXIT_OK


def cmd_proxy(args) -> int:
    inst = _load_instance_file(args.instance)
    proxy = sampling.build_proxy(
        inst,
        epsilon=None if args.epsilon is None else parse_rational(args.epsilon),
        k=args.k, k_prime=args.k_prime, seed=args.seed,
    )
    _emit(sampling.proxy_to_json(proxy), args.out)
    return EXIT_OK


def cmd_brute_force(args) -> int:
    inst = _load_instance_file(args.instance)
    if args.bf_command == "membership":
        rf = ReducedForm.from_json(inst, _read_json(args.rf))
        result = bruteforce.membership_lp(rf, inst, cap=args.max_enum)
        doc = {"feasible": result.feasible}
        if result.feasible:
            doc["weights"] = {k: rat_str(v) for k, v in sorted(result.weights.items())}
        _emit(doc, args.out)
        return EXIT_OK if result.feasible else EXIT_NEGATIVE
    if args.bf_command == "optimize":
        budgets = _budgets_for(inst, args.budgets)
        res = bruteforce.optimal_per_profile_lp(inst, budgets=budgets, cap=args.max_enum)
        doc = {
            "revenue": rat_str(res.revenue),
            "revenue_dec": float(res.revenue),
            "revenue_raw": rat_str(res.revenue * inst.scale),
            "prices": {
                f"{i},{a}": rat_str(p) for (i, a), p in sorted(res.prices.items())
            },
            "rf": [rat_str(x) for x in res.reduced_form.entries],
        }
        _emit(doc, args.out)
        return EXIT_OK
    raise ValidationError(f"unknown brute-force subcommand {args.bf_command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redform",
        description="Revenue-optimal multi-item auctions via feasible reduced forms",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logs on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rf_file=False):
        p.add_argument("instance", help="instance JSON file")
        if rf_file:
            p.add_argument("rf", help="reduced-form JSON file")
        p.add_argument("--out", help="write JSON here instead of stdout")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-enum", type=int, default=10**6,
                       help="enumeration/profile budget for exact paths")

    p = sub.add_parser("check-rf", help="is this reduced form implementable?")
    common(p, rf_file=True)
    p.set_defaults(fn=cmd_check_rf)

    p = sub.add_parser("decompose", help="write a feasible reduced form as a "
                                         "mixture of simple virtual VCG rules")
    common(p, rf_file=True)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("optimize", help="compute a revenue-optimal mechanism")
    common(p)
    p.add_argument("--epsilon", required=True, help="revenue slack target")
    p.add_argument("--delta", help="override truthfulness relaxation (default epsilon/2m)")
    p.add_argument("--budgets", action="store_true",
                   help="enforce the instance's per-bidder budgets")
    p.add_argument("--exact", action="store_true", help="force exact feasibility mode")
    p.add_argument("--k", type=int, help="direct proxy samples (sampling mode)")
    p.add_argument("--k-prime", type=int, help="conditioned proxy samples per type")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("simulate", help="Monte Carlo run of a mechanism file")
    common(p)
    p.add_argument("mechanism", help="mechanism JSON file")
    p.add_argument("--trials", type=int, required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("proxy", help="dump a sampled proxy distribution")
    common(p)
    p.add_argument("--epsilon", help="accuracy target for parameter heuristics")
    p.add_argument("--k", type=int)
    p.add_argument("--k-prime", type=int)
    p.set_defaults(fn=cmd_proxy)

    p = sub.add_parser("brute-force", help="ground-truth oracles")
    bf = p.add_subparsers(dest="bf_command", required=True)
    pm = bf.add_parser("membership", help="hull membership by explicit LP")
    common(pm, rf_file=True)
    pm.set_defaults(fn=cmd_brute_force)
    po = bf.add_parser("optimize", help="optimal revenue by per-profile LP")
    common(po)
    po.add_argument("--budgets", action="store_true")
    po.set_defaults(fn=cmd_brute_force)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (ValidationError, CapExceeded) as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except SolverFault as exc:
        logger.error("internal fault: %s", exc)
        return EXIT_FAULT
    except Exception as exc:  # noqa: BLE001 - surface as fault status
        logger.error("unexpected fault: %s", exc)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
