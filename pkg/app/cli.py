"""
Command-line entry point ``marketgraph``.

Every command reads one instance (a path, or ``-`` for stdin), runs a single
library operation and emits rows as CSV or JSON lines. Exit codes: 0 on
success, 1 when a verification fails, 2 on bad input.
"""

import argparse
import csv
import json
import logging
import math
import sys
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import yaml

from app.core.exception import AppException, MarketInputError, VerificationError
from app.core.logger import set_console_level, setup_logger
from app.services import bundling, delivery, disruption, inhouse, mechanism, platform_fees, shgb, swsh
from app.services.delivery_flow import optimal_welfare_single_minded, optimal_welfare_structured
from app.utils.params import load_params
from app.utils.rational import format_rat, to_rat
from app.workbench.generators import GENERATORS, generate
from app.workbench.instances import InstanceFile, dump_instance, load_instance, save_instance
from app.workbench.oracles import ORACLE_KINDS, oracle
from app.workbench.suite import run_suite

params = load_params()
cli_params = params.get("cli_params", {})

log_file_path = cli_params.get("log_file_path", "cli.log")
default_format = cli_params.get("default_format", "csv")
default_suite = cli_params.get("default_suite", "config/acceptance.yaml")

logger = setup_logger("CLI", log_file_path)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2


def _cell(value: Any) -> Any:
    if isinstance(value, Fraction):
        return format_rat(value)
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (frozenset, set)):
        return [_cell(v) for v in sorted(value)]
    if isinstance(value, (list, tuple)):
        return [_cell(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _cell(v) for k, v in value.items()}
    return value


def _flat(value: Any) -> str:
    """CSV rendering: nested lists become ``a;b`` and pairs become ``a:b``."""
    if isinstance(value, list):
        return ";".join(":".join(str(x) for x in v) if isinstance(v, list) else str(v) for v in value)
    if value is None:
        return ""
    return str(value)


def emit(rows: Iterable[Mapping[str, Any]], fmt: str, out=None) -> None:
    """Write rows to ``out`` (stdout by default); the first row fixes the CSV header."""
    out = out or sys.stdout
    rows = [{k: _cell(v) for k, v in row.items()} for row in rows]
    if fmt == "json-lines":
        for row in rows:
            out.write(json.dumps(row) + "\n")
        return
    if not rows:
        return
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _flat(v) for k, v in row.items()})


def _read_instance(path: str, kind: str) -> InstanceFile:
    instance = load_instance(sys.stdin if path == "-" else path)
    if instance.kind != kind:
        raise MarketInputError(f"expected a {kind} instance, got {instance.kind}")
    return instance


def _read_yaml(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as file:
            return yaml.safe_load(file)
    except FileNotFoundError:
        raise MarketInputError(f"file not found: {path}")
    except yaml.YAMLError as e:
        raise MarketInputError(f"malformed YAML in {path}: {e}")


def _int_list(text: Optional[str]) -> List[int]:
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise MarketInputError(f"expected comma-separated integers, got {text!r}")


def _options(pairs: Optional[Sequence[str]]) -> Dict[str, str]:
    options = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise MarketInputError(f"expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        options[key.strip()] = value.strip()
    return options


def _edge_file(path: str) -> List[tuple]:
    data = _read_yaml(path)
    if isinstance(data, dict):
        data = data.get("edges", [])
    try:
        return [(int(b), int(s)) for b, s in data or []]
    except (TypeError, ValueError):
        raise MarketInputError(f"{path}: expected a list of [buyer, seller] pairs")


def _triples(data: Any, where: str) -> List[tuple]:
    try:
        return [(int(b), int(s), int(d)) for b, s, d in data or []]
    except (TypeError, ValueError):
        raise MarketInputError(f"{where}: expected a list of [buyer, store, courier] triples")


def _violations(problems) -> List[Dict[str, Any]]:
    return [{"condition": v.condition, "at": v.index, "detail": v.detail} for v in problems]


# ---- fees -------------------------------------------------------------------

def cmd_fees_eq(args) -> int:
    market = _read_instance(args.instance, "bipartite").market
    P = platform_fees.find_pure_equilibrium(market, args.alpha)
    report = platform_fees.platform_revenue_and_poa(market, args.alpha, P)
    emit([{"alpha": to_rat(args.alpha), "on_platform": P, "revenue": report.revenue,
           "welfare": report.welfare, "poa": report.poa}], args.format)
    return EXIT_OK


def cmd_fees_verify(args) -> int:
    market = _read_instance(args.instance, "bipartite").market
    problems = platform_fees.verify_platform_equilibrium(market, args.alpha, _int_list(args.P))
    emit(_violations(problems), args.format)
    if problems:
        raise VerificationError(f"{len(problems)} equilibrium condition(s) violated")
    return EXIT_OK


def cmd_fees_sweep(args) -> int:
    market = _read_instance(args.instance, "bipartite").market
    emit([{"alpha": alpha, "on_platform": P} for alpha, P in platform_fees.sweep_alpha(market)], args.format)
    return EXIT_OK


def cmd_fees_audit(args) -> int:
    market = _read_instance(args.instance, "bipartite").market
    result = platform_fees.best_response_audit(market, args.alpha, args.max_iters)
    emit([{"converged": result.converged, "profile": result.profile, "cycle_length": len(result.cycle),
           "iterations": result.iterations}], args.format)
    return EXIT_OK


def cmd_fees_poa(args) -> int:
    market = _read_instance(args.instance, "bipartite").market
    P = _int_list(args.P) if args.P is not None else platform_fees.find_pure_equilibrium(market, args.alpha)
    report = platform_fees.platform_revenue_and_poa(market, args.alpha, P)
    emit([{"alpha": to_rat(args.alpha), "on_platform": frozenset(P), "revenue": report.revenue,
           "welfare": report.welfare, "optimal_welfare": report.optimal_welfare, "poa": report.poa}], args.format)
    return EXIT_OK


def cmd_fees_grid(args) -> int:
    market = _read_instance(args.instance, "bipartite").market
    rows = platform_fees.optimal_fee_grid(market, args.alphas.split(","))
    emit([{"alpha": r.alpha, "on_platform": r.on_platform, "revenue": r.revenue, "poa": r.poa,
           "equilibria": r.equilibria} for r in rows], args.format)
    return EXIT_OK


# ---- disrupt ----------------------------------------------------------------

def _edge_row(world, E_p, revenue) -> Dict[str, Any]:
    return {"edges": sorted(E_p), "revenue": revenue, "prm": disruption.prm_ratio(world, E_p)}


def cmd_disrupt_eval(args) -> int:
    world = _read_instance(args.instance, "bipartite").market
    outcome = disruption.platform_revenue(world, _edge_file(args.edges))
    emit([{"revenue": outcome.revenue, "welfare": outcome.welfare,
           "transacting": sorted(outcome.transacting), "prices": outcome.prices}], args.format)
    return EXIT_OK


def cmd_disrupt_greedy(args) -> int:
    world = _read_instance(args.instance, "bipartite").market
    E_p = _edge_file(args.edges) if args.edges else disruption.candidate_pairs(world)
    edges, revenue = disruption.greedy_welfare_to_revenue(world, E_p)
    emit([_edge_row(world, edges, revenue)], args.format)
    return EXIT_OK


def _solver(solve):
    def run(args) -> int:
        world = _read_instance(args.instance, "bipartite").market
        edges, revenue = solve(world)
        emit([_edge_row(world, edges, revenue)], args.format)
        return EXIT_OK
    return run


def cmd_disrupt_pair(args) -> int:
    world = _read_instance(args.instance, "bipartite").market
    edges, revenue = disruption.single_pair_max_revenue(world, args.buyer, args.seller)
    emit([_edge_row(world, edges, revenue)], args.format)
    return EXIT_OK


def cmd_disrupt_brute(args) -> int:
    world = _read_instance(args.instance, "bipartite").market
    result = disruption.brute_force_platform_edges(world, args.restricted, args.max_pairs)
    emit([{"edges": sorted(E), "revenue": result.revenue, "welfare": result.welfare,
           "evaluated": result.evaluated} for E in result.optima], args.format)
    return EXIT_OK


# ---- delivery ---------------------------------------------------------------

def cmd_delivery_opt(args) -> int:
    market = _read_instance(args.instance, "three_sided").market
    if args.with_tips:
        state, allocation = delivery.efficient_with_tip_equilibrium(market)
        emit([{"allocation": sorted(allocation), "welfare": market.welfare(allocation),
               "prices": state.prices, "tips": state.tips}], args.format)
        return EXIT_OK
    if market.cost_structure in ("store_split", "buyer_split"):
        allocation, welfare = optimal_welfare_structured(market)
    else:
        allocation, welfare = optimal_welfare_single_minded(market)
    emit([{"allocation": sorted(allocation), "welfare": welfare}], args.format)
    return EXIT_OK


def cmd_delivery_check_alloc(args) -> int:
    market = _read_instance(args.instance, "three_sided").market
    x = _triples(_read_yaml(args.alloc), args.alloc)
    state = delivery.check_equilibrium_allocation(market, x)
    if state is None:
        raise VerificationError(f"allocation {sorted(x)} is not supported by a with-tip equilibrium")
    emit([{"allocation": sorted(x), "welfare": market.welfare(x), "prices": state.prices,
           "compensation": state.compensation, "tips": state.tips}], args.format)
    return EXIT_OK


def cmd_delivery_verify(args) -> int:
    market = _read_instance(args.instance, "three_sided").market
    data = _read_yaml(args.eq)
    if not isinstance(data, dict):
        raise MarketInputError(f"{args.eq}: expected a mapping with prices, compensation and allocation")
    try:
        prices = [to_rat(str(p)) for p in data["prices"]]
        compensation = tuple(tuple(to_rat(str(w)) for w in row) for row in data["compensation"])
        tips = None
        if args.with_tips:
            tips = tuple(tuple(to_rat(str(t)) for t in row) for row in data["tips"])
    except KeyError as e:
        raise MarketInputError(f"{args.eq}: missing field {e}")
    problems = delivery.verify_equilibrium(market, prices, compensation, _triples(data.get("allocation"), args.eq), tips)
    emit(_violations(problems), args.format)
    if problems:
        raise VerificationError(f"{len(problems)} equilibrium condition(s) violated")
    return EXIT_OK


def cmd_delivery_profit(args) -> int:
    market = _read_instance(args.instance, "three_sided").market
    plan = delivery.without_tip_profit_max(market)
    emit([{"allocation": sorted(plan.allocation), "profit": plan.profit, "prices": plan.prices,
           "epsilon": plan.epsilon}], args.format)
    return EXIT_OK


def cmd_delivery_brute(args) -> int:
    market = _read_instance(args.instance, "three_sided").market
    report = delivery.brute_force_3sided(market, args.mode, args.max_cells)
    emit([{"mode": report.mode, "value": report.value,
           "allocation": sorted(report.allocation) if report.allocation is not None else None,
           "evaluated": report.evaluated, "certified": report.certified}], args.format)
    return EXIT_OK


# ---- bundle -----------------------------------------------------------------

def cmd_bundle_rev(args) -> int:
    rows = []
    for mu in args.mu:
        for sigma in args.sigma:
            rev, price = bundling.monopoly_rev(mu, sigma)
            rows.append({"mu": mu, "sigma": sigma, "rev": rev, "price": price,
                         "d_rev_d_mu": bundling.rev_gradient_mu(mu, sigma)})
    emit(rows, args.format)
    return EXIT_OK


def cmd_bundle_optimal(args) -> int:
    market = _read_instance(args.instance, "bundling").market
    window = bundling.complete_info_optimal_bundle(market)
    emit([{"start": window.start, "stop": window.stop, "qualities": list(window.qualities),
           "revenue": window.revenue, "payment": window.payment, "profit": window.profit}], args.format)
    return EXIT_OK


def _prior(text: str) -> bundling.UniformPrior:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise MarketInputError(f"--prior expects lo,hi; got {text!r}")
    return bundling.UniformPrior(lo, hi)


def cmd_bundle_mechanism(args) -> int:
    prior = _prior(args.prior)
    rule, profit = mechanism.surrogate_threshold_mechanism(prior, args.sigma, args.n)
    mean, stderr = mechanism.monte_carlo_profit(rule, prior, args.sigma, args.n, args.trials, args.seed)
    emit([{"threshold": rule.threshold, "payment": rule.payment(prior.lo), "surrogate_profit": profit,
           "sampled_profit": mean, "stderr": stderr}], args.format)
    return EXIT_OK


def cmd_bundle_inhouse(args) -> int:
    plans = inhouse.inhouse_strategies(args.n, args.nl, args.mul, args.muh, args.sigma, args.cap)
    best = inhouse.two_quality_inhouse(args.n, args.nl, args.mul, args.muh, args.sigma, args.cap)
    emit([{"price": p.posted_price, "m": p.produce_count, "quality": p.produce_quality,
           "revenue": p.revenue, "profit": p.profit, "best": p == best} for p in plans], args.format)
    return EXIT_OK


# ---- workbench --------------------------------------------------------------

def cmd_generate(args) -> int:
    instance = generate(args.id, _options(args.param))
    if args.out:
        save_instance(instance, args.out)
    else:
        sys.stdout.write(dump_instance(instance))
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance = load_instance(sys.stdin if args.instance == "-" else args.instance)
    report = oracle(args.kind, instance, _options(args.limit))
    emit([{"kind": report.kind, "optimum": report.optimum, "optimal_structure": o, "evaluated": report.evaluated}
          for o in report.optima] or [{"kind": report.kind, "optimum": report.optimum,
                                        "optimal_structure": None, "evaluated": report.evaluated}], args.format)
    return EXIT_OK


def cmd_suite(args) -> int:
    rows = run_suite(args.config)
    emit([row.as_dict() for row in rows], args.format)
    failed = [row.criterion for row in rows if not row.passed]
    if failed:
        logger.warning(f"{len(failed)} criteria failed: {', '.join(failed)}")
        return EXIT_VERIFY
    return EXIT_OK


def _instance_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("instance", nargs="?", default="-", help="instance file, or - for stdin")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marketgraph", description="Equilibria and mechanisms for platform markets.")
    parser.add_argument("--format", choices=("csv", "json-lines"), default=default_format)
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors to the console")
    groups = parser.add_subparsers(dest="group", required=True)

    fees = groups.add_parser("fees", help="platform fees and seller participation").add_subparsers(dest="cmd", required=True)
    p = fees.add_parser("eq")
    _instance_arg(p)
    p.add_argument("--alpha", required=True)
    p.set_defaults(func=cmd_fees_eq)
    p = fees.add_parser("verify")
    _instance_arg(p)
    p.add_argument("--alpha", required=True)
    p.add_argument("--P", default="", help="comma-separated on-platform sellers")
    p.set_defaults(func=cmd_fees_verify)
    p = fees.add_parser("sweep")
    _instance_arg(p)
    p.set_defaults(func=cmd_fees_sweep)
    p = fees.add_parser("audit")
    _instance_arg(p)
    p.add_argument("--alpha", required=True)
    p.add_argument("--max-iters", type=int, default=platform_fees.audit_max_iters)
    p.set_defaults(func=cmd_fees_audit)
    p = fees.add_parser("poa")
    _instance_arg(p)
    p.add_argument("--alpha", required=True)
    p.add_argument("--P", default=None, help="on-platform sellers; defaults to the computed equilibrium")
    p.set_defaults(func=cmd_fees_poa)
    p = fees.add_parser("grid")
    _instance_arg(p)
    p.add_argument("--alphas", required=True, help="comma-separated fees, e.g. 1/10,1/2")
    p.set_defaults(func=cmd_fees_grid)

    disrupt = groups.add_parser("disrupt", help="revenue-maximizing platform edges").add_subparsers(dest="cmd", required=True)
    p = disrupt.add_parser("eval")
    _instance_arg(p)
    p.add_argument("--edges", required=True, help="YAML list of [buyer, seller] pairs")
    p.set_defaults(func=cmd_disrupt_eval)
    p = disrupt.add_parser("greedy")
    _instance_arg(p)
    p.add_argument("--edges", default=None, help="candidate pairs; defaults to every missing pair")
    p.set_defaults(func=cmd_disrupt_greedy)
    for name, solve in (("swsh", swsh.swsh_optimal), ("shgb", shgb.shgb_optimal), ("extract", disruption.homogeneous_extract)):
        p = disrupt.add_parser(name)
        _instance_arg(p)
        p.set_defaults(func=_solver(solve))
    p = disrupt.add_parser("pair")
    _instance_arg(p)
    p.add_argument("--buyer", type=int, required=True)
    p.add_argument("--seller", type=int, required=True)
    p.set_defaults(func=cmd_disrupt_pair)
    p = disrupt.add_parser("brute")
    _instance_arg(p)
    p.add_argument("--max-pairs", type=int, default=None)
    p.add_argument("--restricted", action="store_true", help="at most one platform edge per node")
    p.set_defaults(func=cmd_disrupt_brute)

    deliv = groups.add_parser("delivery", help="three-sided delivery markets").add_subparsers(dest="cmd", required=True)
    p = deliv.add_parser("opt")
    _instance_arg(p)
    p.add_argument("--with-tips", action="store_true", help="also certify an efficient with-tip equilibrium")
    p.set_defaults(func=cmd_delivery_opt)
    p = deliv.add_parser("check-alloc")
    _instance_arg(p)
    p.add_argument("--alloc", required=True, help="YAML list of [buyer, store, courier] triples")
    p.set_defaults(func=cmd_delivery_check_alloc)
    p = deliv.add_parser("verify")
    _instance_arg(p)
    p.add_argument("--eq", required=True, help="YAML with prices, compensation, allocation and optional tips")
    p.add_argument("--with-tips", action="store_true")
    p.set_defaults(func=cmd_delivery_verify)
    p = deliv.add_parser("profit")
    _instance_arg(p)
    p.set_defaults(func=cmd_delivery_profit)
    p = deliv.add_parser("brute")
    _instance_arg(p)
    p.add_argument("--mode", choices=delivery.BRUTE_FORCE_MODES, default="opt_welfare")
    p.add_argument("--max-cells", type=int, default=None)
    p.set_defaults(func=cmd_delivery_brute)

    bundle = groups.add_parser("bundle", help="bundling and procurement").add_subparsers(dest="cmd", required=True)
    p = bundle.add_parser("rev")
    p.add_argument("--mu", type=float, nargs="+", required=True)
    p.add_argument("--sigma", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_bundle_rev)
    p = bundle.add_parser("optimal")
    _instance_arg(p)
    p.set_defaults(func=cmd_bundle_optimal)
    p = bundle.add_parser("mechanism")
    p.add_argument("--prior", required=True, help="uniform prior bounds lo,hi")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=mechanism.monte_carlo_trials)
    p.add_argument("--seed", type=int, default=None, help="overrides MARKETGRAPH_SEED")
    p.set_defaults(func=cmd_bundle_mechanism)
    p = bundle.add_parser("inhouse")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nl", type=int, required=True)
    p.add_argument("--mul", type=float, required=True)
    p.add_argument("--muh", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--cap", type=int, default=0)
    p.set_defaults(func=cmd_bundle_inhouse)

    p = groups.add_parser("generate", help="write a named instance")
    p.add_argument("id", choices=sorted(GENERATORS))
    p.add_argument("--param", action="append", help="generator parameter key=value")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = groups.add_parser("oracle", help="exhaustive search on a small instance")
    p.add_argument("kind", choices=ORACLE_KINDS)
    _instance_arg(p)
    p.add_argument("--limit", action="append", help="oracle option key=value")
    p.set_defaults(func=cmd_oracle)

    suite = groups.add_parser("suite", help="acceptance criteria").add_subparsers(dest="cmd", required=True)
    p = suite.add_parser("run")
    p.add_argument("config", nargs="?", default=default_suite)
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        set_console_level(logging.WARNING)
    try:
        return args.func(args)
    except VerificationError as e:
        print(f"verification failed: {e.reason}", file=sys.stderr)
        return EXIT_VERIFY
    except MarketInputError as e:
        print(f"input error: {e.reason}", file=sys.stderr)
        return EXIT_INPUT
    except AppException as e:
        logger.error(f"{args.group} failed: {e}")
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
