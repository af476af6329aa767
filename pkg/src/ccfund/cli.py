"""Command-line entry point.

Subcommands: ``gen`` (sample instances), ``fixture`` (print a constructed
fixture with its certificate), ``solve-pstar`` (optimal subset), ``play``
(heuristic play-out), ``best-response`` (exact discretized best response),
``experiment`` (Monte-Carlo runs to CSV), and ``verify`` (run a fixture's
certificate checks). Exit codes: 0 success, 1 verification failure, 2 usage
error, 3 numeric or solver error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import io
from .bestresponse import (
    best_response_bruteforce,
    best_response_exact,
    demonstrate_nonexistence,
    knapsack_form_oracle,
    make_view,
)
from .errors import SolverError
from .generators import (
    build_appendix_b,
    build_example1,
    build_example2,
    build_procedure1,
    build_theorem2_witness,
    sample_instance,
)
from .harness import run_experiment, worker_count
from .heuristics import HEURISTIC_NAMES, Assignment, Heuristic, PlayOrder, play
from .model import evaluate
from .refunds import LINEAR_ADDITIVE_TAG, PPR_TAG, scheme_from_tag, thresholds
from .welfare import solve_pstar_bruteforce, solve_pstar_dp, welfare_of

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

FIXTURE_NAMES = ("procedure1", "example1", "example2", "theorem2", "appendixB")


def _echo(kind: str, resolved: dict) -> None:
    print(f"# {kind}: {io.dumps_canonical(resolved)}", file=sys.stderr)


def _scheme_from_args(args):
    slope = getattr(args, "linear_slope", None)
    if args.refund == LINEAR_ADDITIVE_TAG and slope is None:
        slope = 0.1
    return scheme_from_tag(args.refund, slope)


# -- subcommand handlers -------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = io.load_sampler_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    _echo("gen", {"config": io.sampler_config_to_jsonable(cfg), "count": args.count})
    os.makedirs(args.out, exist_ok=True)
    for k in range(args.count):
        instance, solution = sample_instance(cfg, seed=(cfg.seed, k))
        io.save_instance(os.path.join(args.out, f"instance_{k:05d}.json"), instance)
        with open(
            os.path.join(args.out, f"instance_{k:05d}.solution.json"), "w", encoding="utf-8"
        ) as fh:
            fh.write(io.dumps_canonical(io.solution_to_jsonable(solution)) + "\n")
    print(f"wrote {args.count} instances to {args.out}", file=sys.stderr)
    return EXIT_OK


def _fixture_payload(name: str, scheme) -> dict:
    if name == "procedure1":
        instance, cert = build_procedure1(scheme)
        return {
            "instance": io.instance_to_jsonable(instance),
            "certificate": {
                "threshold_11": cert.threshold_11,
                "threshold_21": cert.threshold_21,
                "theta_21": cert.theta_21,
                "theta_22": cert.theta_22,
                "target_2": cert.target_2,
                "on_path_utility": cert.on_path_utility,
                "deviation_utility": cert.deviation_utility,
                "pstar": list(cert.pstar),
                "all_pass": cert.all_pass,
            },
        }
    if name == "example1":
        instance = build_example1()
        solution = solve_pstar_bruteforce(instance)
        return {
            "instance": io.instance_to_jsonable(instance),
            "certificate": {
                "constrained_optimum": list(solution.subset),
                "welfare_first": welfare_of(instance, (0,)),
                "welfare_second": welfare_of(instance, (1,)),
            },
        }
    if name == "example2":
        instance = build_example2(scheme)
        report = demonstrate_nonexistence(instance, (0.1, 0.01, 0.001))
        return {
            "instance": io.instance_to_jsonable(instance),
            "certificate": {
                "epsilons": list(report.epsilons),
                "deviation_utilities": list(report.deviation_utilities),
                "funded_utility": report.funded_utility,
                "limit_utility": report.limit_utility,
                "gap": report.gap,
                "strictly_increasing": report.strictly_increasing,
                "sup_attained": report.sup_attained,
            },
        }
    if name == "theorem2":
        instance, cert = build_theorem2_witness(scheme)
        return {
            "instance": io.instance_to_jsonable(instance),
            "certificate": {
                "budget_surplus": cert.budget_surplus,
                "poor_block_budget": cert.poor_block_budget,
                "min_target": cert.min_target,
                "subset_feasible_all": cert.subset_feasible_all,
                "rich_block_threshold_capacity": cert.rich_block_threshold_capacity,
                "rich_block_required": cert.rich_block_required,
                "all_pass": cert.all_pass,
            },
        }
    if name == "appendixB":
        instance, report = build_appendix_b()
        return {
            "instance": io.instance_to_jsonable(instance),
            "report": {
                "threshold_11": report.threshold_11,
                "threshold_21": report.threshold_21,
                "remainder_after_11": report.remainder_after_11,
                "split_consistent": report.split_consistent,
                "pstar": list(report.pstar),
                "welfare_first": report.welfare_first,
                "welfare_second": report.welfare_second,
                "expected_findings_hold": report.expected_findings_hold,
            },
        }
    raise ValueError(f"unknown fixture {name!r}")


def cmd_fixture(args) -> int:
    scheme = _scheme_from_args(args)
    _echo("fixture", {"name": args.name, "refund": scheme.tag})
    print(io.dumps_canonical(_fixture_payload(args.name, scheme)))
    return EXIT_OK


def cmd_solve_pstar(args) -> int:
    instance = io.load_instance(args.instance)
    _echo(
        "solve-pstar",
        {"instance": args.instance, "resolution": args.resolution, "objective": args.objective},
    )
    if args.method == "bruteforce":
        solution = solve_pstar_bruteforce(instance, objective=args.objective)
    else:
        solution = solve_pstar_dp(instance, resolution=args.resolution, objective=args.objective)
    print(io.dumps_canonical(io.solution_to_jsonable(solution)))
    return EXIT_OK


def cmd_best_response(args) -> int:
    instance = io.load_instance(args.instance)
    profile = io.load_profile(args.others)
    _echo(
        "best-response",
        {"instance": args.instance, "agent": args.agent, "delta": args.delta,
         "method": args.method},
    )
    view = make_view(instance, profile, args.agent)
    if args.method == "bruteforce":
        response = best_response_bruteforce(view, args.delta)
    elif args.method == "knapsack":
        response = knapsack_form_oracle(view, args.delta)
    else:
        response = best_response_exact(view, args.delta)
    print(io.dumps_canonical(io.response_to_jsonable(response)))
    return EXIT_OK


def cmd_play(args) -> int:
    instance = io.load_instance(args.instance)
    if args.assignment is not None:
        with open(args.assignment, "r", encoding="utf-8") as fh:
            names = json.load(fh)
        assignment = Assignment(tuple(Heuristic(name) for name in names))
    else:
        assignment = Assignment.uniform(Heuristic(args.heuristic), instance.n_agents)
    _echo(
        "play",
        {
            "instance": args.instance,
            "heuristics": [h.value for h in assignment.heuristics],
            "order": args.order,
            "seed": args.seed,
        },
    )
    solution = solve_pstar_bruteforce(instance)
    thr = thresholds(instance)
    order = PlayOrder(args.order, seed=args.seed)
    profile = play(instance, assignment, solution.subset, thr, order)
    outcome = evaluate(instance, profile)
    payload = {
        "contributions": [[float(v) for v in row] for row in profile.contributions],
        "funded": [bool(z) for z in outcome.funded],
        "totals": [float(t) for t in outcome.totals],
        "agent_utilities": [float(u) for u in outcome.agent_utilities],
        "social_welfare": outcome.social_welfare,
        "pstar": list(solution.subset),
    }
    print(io.dumps_canonical(payload))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = io.load_experiment_config(args.config)
    _echo(
        "experiment",
        {
            "config": io.experiment_config_to_jsonable(cfg),
            "full_scale": args.full_scale,
            "workers": worker_count(),
        },
    )
    report = run_experiment(cfg, full_scale=args.full_scale)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_csv_text())
    if args.emit_series is not None:
        written = report.write_series(args.emit_series)
        print(f"wrote {len(written)} series files to {args.emit_series}", file=sys.stderr)
    print(f"wrote report to {args.out} (seed {report.seed})", file=sys.stderr)
    return EXIT_OK


# -- verification --------------------------------------------------------------


def _check(lines: list[tuple[bool, str]], ok: bool, text: str) -> None:
    lines.append((bool(ok), text))


def _verify_procedure1(scheme) -> list[tuple[bool, str]]:
    lines: list[tuple[bool, str]] = []
    instance, cert = build_procedure1(scheme)
    _check(
        lines,
        cert.pstar_is_first and cert.pstar_unique,
        f"optimal subset is uniquely the first project: pstar={cert.pstar}, "
        f"unique={cert.pstar_unique}",
    )
    _check(lines, cert.subset_feasible, "both agents afford their thresholds on the optimum")
    _check(
        lines,
        cert.budget_deficit,
        f"budget deficit holds: pool={float(instance.budgets.sum()):.6g} < "
        f"targets={float(instance.targets.sum()):.6g}",
    )
    _check(
        lines,
        cert.deviation_profitable,
        f"deviation pays: {cert.deviation_utility:.6g} > {cert.on_path_utility:.6g}",
    )
    return lines


def _verify_example1() -> list[tuple[bool, str]]:
    lines: list[tuple[bool, str]] = []
    instance = build_example1()
    solution = solve_pstar_bruteforce(instance)
    _check(
        lines,
        solution.subset == (1,),
        f"only the second project is affordable: constrained optimum={solution.subset}",
    )
    w_first = welfare_of(instance, (0,))
    w_second = welfare_of(instance, (1,))
    _check(
        lines,
        w_first > w_second,
        f"unconstrained welfare prefers the first project: {w_first:.6g} > {w_second:.6g}",
    )
    view = make_view(instance, np.zeros_like(instance.valuations), 0)
    response = best_response_exact(view, 0.01)
    _check(
        lines,
        bool(response.funded[1]) and abs(response.utility - 1.0) <= 1e-9,
        f"the budgeted agent funds the second project for utility "
        f"{response.utility:.6g}",
    )
    _check(
        lines,
        float(instance.budgets[1]) == 0.0,
        "the high-value agent has no budget to contribute",
    )
    return lines


def _verify_example2(scheme) -> list[tuple[bool, str]]:
    lines: list[tuple[bool, str]] = []
    instance = build_example2(scheme)
    report = demonstrate_nonexistence(instance, (0.1, 0.01, 0.001))
    utilities = ", ".join(f"{u:.6g}" for u in report.deviation_utilities)
    _check(
        lines,
        report.strictly_increasing,
        f"deviation utilities rise as the shaved amount shrinks: {utilities}",
    )
    _check(
        lines,
        report.all_exceed_funded,
        f"every deviation beats completing the funding ({report.funded_utility:.6g})",
    )
    _check(
        lines,
        report.gap > 0 and not report.sup_attained,
        f"supremum {report.limit_utility:.6g} is not attained (gap {report.gap:.6g})",
    )
    return lines


def _verify_theorem2(scheme) -> list[tuple[bool, str]]:
    lines: list[tuple[bool, str]] = []
    instance, cert = build_theorem2_witness(scheme)
    _check(lines, cert.budget_surplus, "the pooled budget covers every target")
    _check(
        lines,
        cert.poor_block_below_min_target,
        f"the poor block ({cert.poor_block_budget:.6g}) cannot fund even the cheapest "
        f"project ({cert.min_target:.6g})",
    )
    _check(lines, not cert.subset_feasible_all, "threshold feasibility fails for the full set")
    _check(
        lines,
        cert.forces_above_threshold,
        f"funding everything forces the rich block past its thresholds "
        f"({cert.rich_block_threshold_capacity:.6g} < {cert.rich_block_required:.6g})",
    )
    return lines


def _verify_appendix_b() -> list[tuple[bool, str]]:
    lines: list[tuple[bool, str]] = []
    _, report = build_appendix_b()
    _check(
        lines,
        report.threshold_11_rounds_to_9_91,
        f"first threshold {report.threshold_11:.6g} rounds to the expected 9.91",
    )
    _check(
        lines,
        report.threshold_21_is_0_99,
        f"second threshold formula gives the expected 0.99 ({report.threshold_21:.6g})",
    )
    _check(
        lines,
        not report.split_consistent,
        f"expected inconsistency confirmed: carried 0.99 vs remainder "
        f"{report.remainder_after_11:.6g} (documented, not repaired)",
    )
    _check(
        lines,
        report.pstar == (0,) and report.welfare_values_match,
        f"optimum and welfare values match: {report.welfare_first:.6g}, "
        f"{report.welfare_second:.6g}",
    )
    _check(lines, report.budget_deficit, "the fixture's budgets run a deficit")
    return lines


def cmd_verify(args) -> int:
    scheme = _scheme_from_args(args)
    _echo("verify", {"fixture": args.name, "refund": scheme.tag})
    if args.name == "procedure1":
        lines = _verify_procedure1(scheme)
    elif args.name == "example1":
        lines = _verify_example1()
    elif args.name == "example2":
        lines = _verify_example2(scheme)
    elif args.name == "theorem2":
        lines = _verify_theorem2(scheme)
    elif args.name == "appendixB":
        lines = _verify_appendix_b()
    else:
        raise ValueError(f"unknown fixture {args.name!r}")
    ok = True
    for passed, text in lines:
        print(f"[{'PASS' if passed else 'FAIL'}] {text}")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccfund",
        description="Combinatorial civic crowdfunding: solvers, play-outs and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="sample instances to a directory")
    gen.add_argument("--config", required=True, help="sampler config JSON")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen.set_defaults(func=cmd_gen)

    fixture = sub.add_parser("fixture", help="print a constructed fixture as JSON")
    fixture.add_argument("--name", required=True, choices=FIXTURE_NAMES)
    fixture.add_argument("--refund", choices=(PPR_TAG, LINEAR_ADDITIVE_TAG), default=PPR_TAG)
    fixture.add_argument("--linear-slope", type=float, default=None)
    fixture.set_defaults(func=cmd_fixture)

    solve = sub.add_parser("solve-pstar", help="welfare-optimal subset")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--resolution", type=float, default=0.01)
    solve.add_argument("--objective", choices=("welfare", "valuation"), default="welfare")
    solve.add_argument("--method", choices=("dp", "bruteforce"), default="dp")
    solve.set_defaults(func=cmd_solve_pstar)

    br = sub.add_parser("best-response", help="exact discretized best response")
    br.add_argument("--instance", required=True)
    br.add_argument("--agent", type=int, required=True)
    br.add_argument("--others", required=True, help="profile JSON; the agent's row is ignored")
    br.add_argument("--delta", type=float, default=0.01)
    br.add_argument("--method", choices=("exact", "bruteforce", "knapsack"), default="exact")
    br.set_defaults(func=cmd_best_response)

    play_cmd = sub.add_parser("play", help="heuristic play-out")
    play_cmd.add_argument("--instance", required=True)
    group = play_cmd.add_mutually_exclusive_group(required=True)
    group.add_argument("--heuristic", choices=HEURISTIC_NAMES)
    group.add_argument("--assignment", help="JSON list with one heuristic name per agent")
    play_cmd.add_argument("--order", choices=("ascending", "random"), default="ascending")
    play_cmd.add_argument("--seed", type=int, default=0)
    play_cmd.set_defaults(func=cmd_play)

    exp = sub.add_parser("experiment", help="Monte-Carlo experiment to CSV")
    exp.add_argument("--config", required=True, help="experiment config JSON")
    exp.add_argument("--out", required=True, help="CSV report path")
    exp.add_argument("--full-scale", action="store_true")
    exp.add_argument("--emit-series", default=None, help="directory for plot-ready JSON")
    exp.set_defaults(func=cmd_experiment)

    verify = sub.add_parser("verify", help="run a fixture's certificate checks")
    verify.add_argument("name", choices=FIXTURE_NAMES)
    verify.add_argument("--refund", choices=(PPR_TAG, LINEAR_ADDITIVE_TAG), default=PPR_TAG)
    verify.add_argument("--linear-slope", type=float, default=None)
    verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SolverError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
