"""Instance files: YAML documents holding one market with exact ``"p/q"`` values."""

import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, TextIO, Union

import yaml

from app.core.exception import AppException, MarketInputError
from app.core.logger import setup_logger
from app.markets.three_sided import ThreeSidedMarket
from app.markets.types import BipartiteMarket
from app.services.bundling import BundlingMarket, UniformPrior
from app.utils.params import load_params
from app.utils.rational import format_rat, to_rat

params = load_params()
workbench_params = params.get("workbench_params", {})

log_file_path = workbench_params.get("log_file_path", "workbench.log")

logger = setup_logger("Instances", log_file_path)

INSTANCE_KINDS = ("bipartite", "three_sided", "bundling")

Market = Union[BipartiteMarket, ThreeSidedMarket, BundlingMarket]


@dataclass(frozen=True)
class InstanceFile:
    """
    A named market plus the generator parameters that produced it.

    Typical usage example:
        instance = load_instance("instances/logn.yaml")
        market = instance.market
    """

    kind: str
    market: Market
    name: str = ""
    description: str = ""
    params: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in INSTANCE_KINDS:
            raise MarketInputError(f"unknown instance kind {self.kind!r}; expected one of {INSTANCE_KINDS}")


def _rat_rows(rows) -> List[List[str]]:
    return [[format_rat(v) for v in row] for row in rows]


def _payload(instance: InstanceFile) -> Dict[str, Any]:
    market = instance.market
    if instance.kind == "bipartite":
        return {
            "n": market.n,
            "m": market.m,
            "goods_class": market.goods_class,
            "values": _rat_rows(market.values),
            "world_edges": [list(e) for e in sorted(market.world_edges)],
        }
    if instance.kind == "three_sided":
        payload = {
            "cost_structure": market.cost_structure,
            "values": _rat_rows(market.values),
            "costs": [_rat_rows(c) for c in market.costs],
        }
        if market.courier_store is not None:
            payload["courier_store"] = list(market.courier_store)
        return payload
    payload = {
        "qualities": [float(mu) for mu in market.qualities],
        "sigma": float(market.sigma),
        "capacity": market.capacity,
    }
    if market.prior is not None:
        payload["prior"] = {"lo": market.prior.lo, "hi": market.prior.hi}
    if market.quality_mix is not None:
        n_low, mu_low, mu_high = market.quality_mix
        payload["quality_mix"] = {"n_low": n_low, "mu_low": mu_low, "mu_high": mu_high}
    return payload


def dump_instance(instance: InstanceFile) -> str:
    """Serialize to YAML text; the same instance always yields the same bytes."""
    document = {
        "kind": instance.kind,
        "name": instance.name,
        "description": instance.description,
        "params": {k: str(v) for k, v in sorted(instance.params.items())},
        "market": _payload(instance),
    }
    return yaml.safe_dump(document, sort_keys=False, default_flow_style=None, allow_unicode=True)


def save_instance(instance: InstanceFile, path: Union[str, Path, TextIO]) -> None:
    text = dump_instance(instance)
    if hasattr(path, "write"):
        path.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")
    logger.info(f"Saved {instance.kind} instance {instance.name!r} to {path}")


def _field(mapping: Dict[str, Any], key: str, where: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise MarketInputError(f"missing field '{where}{key}'")
    return mapping[key]


def _rats(rows, where: str):
    try:
        return [[to_rat(str(v)) for v in row] for row in rows]
    except MarketInputError as e:
        raise MarketInputError(f"field '{where}': {e.reason}")
    except TypeError:
        raise MarketInputError(f"field '{where}' must be a list of rows")


def _build_market(kind: str, data: Dict[str, Any]) -> Market:
    if kind == "bipartite":
        values = _rats(_field(data, "values", "market."), "market.values")
        edges = [tuple(e) for e in data.get("world_edges", [])]
        if any(len(e) != 2 for e in edges):
            raise MarketInputError("field 'market.world_edges' must hold [buyer, seller] pairs")
        return BipartiteMarket(
            int(_field(data, "n", "market.")),
            int(_field(data, "m", "market.")),
            values,
            frozenset(edges),
            data.get("goods_class", "general"),
        )

    if kind == "three_sided":
        values = _rats(_field(data, "values", "market."), "market.values")
        costs = [
            _rats(c, f"market.costs[{d}]") for d, c in enumerate(_field(data, "costs", "market."))
        ]
        return ThreeSidedMarket(values, costs, data.get("cost_structure", "general"), data.get("courier_store"))

    prior = data.get("prior")
    mix = data.get("quality_mix")
    return BundlingMarket(
        tuple(float(mu) for mu in _field(data, "qualities", "market.")),
        float(_field(data, "sigma", "market.")),
        UniformPrior(float(prior["lo"]), float(prior["hi"])) if prior else None,
        int(data.get("capacity", 0)),
        (int(mix["n_low"]), float(mix["mu_low"]), float(mix["mu_high"])) if mix else None,
    )


def parse_instance(text: str) -> InstanceFile:
    """
    Parse YAML instance text.

    Raises:
        MarketInputError: On malformed YAML (with its line and column) or a
            schema problem (with the offending field).
    """
    try:
        document = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise MarketInputError(f"malformed instance{where}: {getattr(e, 'problem', e)}")

    if not isinstance(document, dict):
        raise MarketInputError("instance must be a YAML mapping")
    kind = _field(document, "kind", "")
    if kind not in INSTANCE_KINDS:
        raise MarketInputError(f"field 'kind': unknown instance kind {kind!r}")

    try:
        market = _build_market(kind, _field(document, "market", ""))
    except MarketInputError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise MarketInputError(f"field 'market': {e}")
    except Exception as e:
        logger.error(f"Unexpected error while building a {kind} market: {e}")
        raise AppException(e, sys)

    raw_params = document.get("params") or {}
    return InstanceFile(
        kind,
        market,
        str(document.get("name", "")),
        str(document.get("description", "")),
        {str(k): str(v) for k, v in raw_params.items()},
    )


def load_instance(path: Union[str, Path, TextIO]) -> InstanceFile:
    """Load an instance from a path or an open stream."""
    if hasattr(path, "read"):
        return parse_instance(path.read())
    if not Path(path).exists():
        raise MarketInputError(f"instance file not found: {path}")
    return parse_instance(Path(path).read_text(encoding="utf-8"))
