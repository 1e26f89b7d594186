"""Acceptance suite: run (instance, operation, expected value) criteria and report pass/fail rows."""

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Union

import yaml

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.services import bundling, delivery, disruption, inhouse, platform_fees
from app.utils.params import load_params
from app.utils.rational import format_rat, to_rat
from app.workbench import properties
from app.workbench.generators import generate
from app.workbench.instances import InstanceFile, load_instance

params = load_params()
workbench_params = params.get("workbench_params", {})

log_file_path = workbench_params.get("log_file_path", "workbench.log")
suite_workers = int(workbench_params.get("suite_workers", 4))

logger = setup_logger("Suite", log_file_path)


@dataclass(frozen=True)
class SuiteRow:
    criterion: str
    op: str
    instance: str
    expected: str
    actual: str
    passed: bool
    message: str = ""

    def as_dict(self) -> Dict[str, Any]:
        return {
            "criterion": self.criterion,
            "op": self.op,
            "instance": self.instance,
            "expected": self.expected,
            "actual": self.actual,
            "status": "pass" if self.passed else "fail",
            "message": self.message,
        }


def _edges(raw) -> List[tuple]:
    return [tuple(int(v) for v in e) for e in raw or []]


def _platform_eq_count(instance, args):
    return len(platform_fees.enumerate_pure_equilibria(instance.market, args.get("alpha", "1/2")))


def _audit_cycles(instance, args):
    result = platform_fees.best_response_audit(instance.market, args.get("alpha", "1/2"))
    return bool(result.cycle)


def _fee_verifies(instance, args):
    return not platform_fees.verify_platform_equilibrium(instance.market, args["alpha"], args.get("P", []))


def _fee_poa(instance, args):
    return platform_fees.platform_revenue_and_poa(instance.market, args["alpha"], args.get("P", [])).poa


def _fee_revenue(instance, args):
    return platform_fees.platform_revenue_and_poa(instance.market, args["alpha"], args.get("P", [])).revenue


def _edge_revenue(instance, args):
    return disruption.revenue_value(instance.market, _edges(args.get("E_p")))


def _brute_force_revenue(instance, args):
    return disruption.brute_force_platform_edges(instance.market, bool(args.get("restricted", False))).revenue


def _greedy_revenue(instance, args):
    E_p = args.get("E_p")
    if E_p is None:
        E_p = disruption.candidate_pairs(instance.market)
    return disruption.greedy_welfare_to_revenue(instance.market, _edges(E_p))[1]


def _three_sided(mode: str):
    def run(instance, args):
        return delivery.brute_force_3sided(instance.market, mode).value
    return run


def _tip_certifies(instance, args):
    return delivery.check_equilibrium_allocation(instance.market, _edges(args["x"])) is not None


def _monopoly_rev(instance, args):
    return bundling.monopoly_rev(float(args["mu"]), float(args["sigma"]))[0]


def _alpha_zero(instance, args):
    return bundling.alpha_zero()


def _optimal_bundle(instance, args):
    return list(bundling.complete_info_optimal_bundle(instance.market).qualities)


def _inhouse_profit(instance, args):
    quality = args.get("quality")
    return inhouse.inhouse_profit(
        int(args["n"]), int(args["n_low"]), float(args["mu_low"]), float(args["mu_high"]),
        float(args["sigma"]), args["price"], int(args.get("m", 0)),
        None if quality is None else float(quality),
    ).profit


def _complementarity(instance, args):
    return list(inhouse.complementarity(
        int(args["n_low"]), int(args["m"]), float(args["mu_low"]), float(args["mu_high"]), float(args["sigma"])
    ))


def _property(check: Callable[..., properties.PropertyReport]):
    def run(instance, args):
        report = check(**dict(args))
        if not report.passed:
            logger.warning(f"{report.name}: {report.failures[0]}")
        return report.passed
    return run


OPERATIONS: Dict[str, Callable[[Optional[InstanceFile], Mapping[str, Any]], Any]] = {
    "platform_eq_count": _platform_eq_count,
    "audit_cycles": _audit_cycles,
    "fee_verifies": _fee_verifies,
    "fee_poa": _fee_poa,
    "fee_revenue": _fee_revenue,
    "edge_revenue": _edge_revenue,
    "brute_force_revenue": _brute_force_revenue,
    "greedy_revenue": _greedy_revenue,
    "opt_welfare": _three_sided("opt_welfare"),
    "best_with_tip": _three_sided("best_with_tip"),
    "best_without_tip": _three_sided("best_without_tip"),
    "tip_certifies": _tip_certifies,
    "monopoly_rev": _monopoly_rev,
    "alpha_zero": _alpha_zero,
    "optimal_bundle": _optimal_bundle,
    "inhouse_profit": _inhouse_profit,
    "complementarity": _complementarity,
    "poa_property": _property(properties.poa_bound),
    "swsh_property": _property(properties.swsh_oracle),
    "shgb_property": _property(properties.shgb_oracle),
    "alignment_property": _property(properties.homogeneous_alignment),
    "flow_property": _property(properties.flow_equilibria),
    "contiguity_property": _property(properties.bundle_contiguity),
    "gradient_property": _property(properties.rev_gradient_grid),
}


def _render(value: Any) -> str:
    if isinstance(value, Fraction):
        return format_rat(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _matches(actual: Any, expected: Any, tolerance: Optional[float]) -> bool:
    if isinstance(expected, (list, tuple)):
        return (
            isinstance(actual, (list, tuple))
            and len(actual) == len(expected)
            and all(_matches(a, e, tolerance) for a, e in zip(actual, expected))
        )
    if isinstance(expected, bool) or isinstance(actual, bool):
        return bool(actual) == bool(expected)
    if isinstance(actual, Fraction) and tolerance is None:
        return actual == to_rat(str(expected))
    try:
        gap = abs(float(actual) - float(Fraction(str(expected))))
    except (TypeError, ValueError):
        return str(actual) == str(expected)
    return gap <= (tolerance or 0.0)


def _instance(criterion: Mapping[str, Any]) -> Optional[InstanceFile]:
    source = criterion.get("instance")
    if source is None:
        return None
    if isinstance(source, str):
        if Path(source).suffix in (".yaml", ".yml"):
            return load_instance(source)
        return generate(source)
    if "path" in source:
        return load_instance(source["path"])
    if "generator" in source:
        return generate(source["generator"], source.get("params"))
    raise MarketInputError(f"criterion {criterion.get('id')!r}: instance needs 'generator' or 'path'")


def run_criterion(criterion: Mapping[str, Any]) -> SuiteRow:
    """Evaluate one criterion; operation failures become failing rows."""
    name = str(criterion.get("id", ""))
    op = criterion.get("op")
    if op not in OPERATIONS:
        raise MarketInputError(f"criterion {name!r}: unknown op {op!r}")
    instance = _instance(criterion)
    label = instance.name if instance else ""
    expected = criterion.get("expected")
    tolerance = criterion.get("tolerance")
    tolerance = None if tolerance is None else float(tolerance)
    try:
        actual = OPERATIONS[op](instance, criterion.get("args") or {})
    except AppException as e:
        return SuiteRow(name, op, label, _render(expected), "", False, e.reason)
    passed = _matches(actual, expected, tolerance)
    return SuiteRow(name, op, label, _render(expected), _render(actual), passed)


def run_suite(config: Union[Mapping[str, Any], Sequence[Mapping[str, Any]], str, Path]) -> List[SuiteRow]:
    """
    Run every criterion of a suite and return rows sorted by criterion id.

    Args:
        config: A mapping with a ``criteria`` list, the list itself, or a
            path to a YAML file holding either.

    Returns:
        List[SuiteRow]: One row per criterion.

    Raises:
        MarketInputError: On a missing instance, an unknown op or a malformed config.

    Typical usage example:
        rows = run_suite("config/acceptance.yaml")
        failed = [row for row in rows if not row.passed]
    """
    if isinstance(config, (str, Path)):
        if not Path(config).exists():
            raise MarketInputError(f"suite config not found: {config}")
        with open(config, "r", encoding="utf-8") as file:
            config = yaml.safe_load(file) or {}
    criteria = config.get("criteria", []) if isinstance(config, Mapping) else list(config or [])

    # Resolve instances and ops up front so input errors surface before any work.
    for criterion in criteria:
        if criterion.get("op") not in OPERATIONS:
            raise MarketInputError(f"criterion {criterion.get('id')!r}: unknown op {criterion.get('op')!r}")
        _instance(criterion)

    try:
        with ThreadPoolExecutor(max_workers=suite_workers) as pool:
            rows = list(pool.map(run_criterion, criteria))
    except MarketInputError:
        raise
    except Exception as e:
        logger.error(f"Suite run failed: {e}")
        raise AppException(e, sys)

    rows.sort(key=lambda row: row.criterion)
    logger.info(f"Suite: {sum(r.passed for r in rows)}/{len(rows)} criteria passed")
    return rows
