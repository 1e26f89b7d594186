from fractions import Fraction
from pathlib import Path

import pytest
import yaml

from app.core.exception import MarketInputError, OracleLimitError
from app.workbench.generators import generate
from app.workbench.instances import dump_instance, load_instance, parse_instance, save_instance
from app.workbench.oracles import oracle
from app.workbench.suite import run_suite


def test_logn_values():
    market = generate("logn", {"n": 3}).market
    assert [market.buyer_value(i) for i in range(3)] == [Fraction(301, 100), Fraction(3, 2), 1]
    assert market.goods_class == "homogeneous"
    assert not market.world_edges


def test_chain_shape():
    market = generate("chain", {"n": 2}).market
    assert market.values == ((1, 0), (2, 2))


def test_generator_errors():
    with pytest.raises(MarketInputError, match="unknown generator"):
        generate("nope")
    with pytest.raises(MarketInputError):
        generate("logn", {"n": 0})
    with pytest.raises(MarketInputError):
        generate("market-clearing", {"kappa": 2})


@pytest.mark.parametrize("generator_id", ["tip-bad", "conv-tight", "bundle4"])
def test_dump_is_stable(generator_id, tmp_path):
    instance = generate(generator_id)
    path = tmp_path / "instance.yaml"
    save_instance(instance, path)
    loaded = load_instance(path)
    assert loaded.market == instance.market
    assert dump_instance(loaded) == dump_instance(instance)


def test_rationals_parse_exactly():
    text = yaml.safe_dump({
        "kind": "bipartite",
        "market": {"n": 1, "m": 1, "values": [["1/3"]]},
    })
    assert parse_instance(text).market.value(0, 0) == Fraction(1, 3)


def test_schema_errors_name_the_field():
    with pytest.raises(MarketInputError, match="kind"):
        parse_instance("kind: pentagonal\nmarket: {}\n")
    with pytest.raises(MarketInputError, match="market.values"):
        parse_instance("kind: bipartite\nmarket: {n: 1, m: 1}\n")


def test_malformed_yaml_reports_line():
    with pytest.raises(MarketInputError, match="line"):
        parse_instance("kind: bipartite\nmarket: [unclosed\n")


def test_missing_file(tmp_path):
    with pytest.raises(MarketInputError, match="not found"):
        load_instance(tmp_path / "missing.yaml")


def test_platform_oracle_without_equilibria():
    report = oracle("platform_eq_enum", generate("no-pure"), {"alpha": "1/2"})
    assert report.optimum is None
    assert report.optima == ()
    assert report.evaluated == 8


def test_bundle_oracle_is_contiguous():
    report = oracle("bundle_enum", generate("bundle4"))
    assert report.details["contiguous"]
    assert report.optima == ((1, 2, 3),)


def test_three_sided_oracle():
    report = oracle("three_sided_enum", generate("tip-bad"), {"mode": "best_with_tip"})
    assert report.optimum == 3


def test_oracle_kind_mismatch():
    with pytest.raises(MarketInputError, match="needs a bundling instance"):
        oracle("bundle_enum", generate("tip-bad"))
    with pytest.raises(MarketInputError, match="unknown oracle"):
        oracle("everything", generate("tip-bad"))


def test_oracle_size_guard():
    with pytest.raises(OracleLimitError):
        oracle("bundle_enum", generate("bundle4"), {"max_sellers": 2})


def test_empty_suite():
    assert run_suite({"criteria": []}) == []


def test_suite_pass_and_fail():
    criteria = [
        {"id": "b", "instance": "tip-bad", "op": "opt_welfare", "expected": 4},
        {"id": "a", "instance": "tip-bad", "op": "opt_welfare", "expected": 3},
    ]
    rows = run_suite(criteria)
    assert [row.criterion for row in rows] == ["a", "b"]
    assert [row.passed for row in rows] == [True, False]
    assert rows[1].as_dict()["status"] == "fail"


def test_suite_tolerance():
    rows = run_suite([{"id": "r", "op": "monopoly_rev", "args": {"mu": 1.0, "sigma": 4.41}, "expected": 1.0, "tolerance": 0.01}])
    assert rows[0].passed


def test_suite_input_errors(tmp_path):
    with pytest.raises(MarketInputError, match="unknown op"):
        run_suite([{"id": "x", "op": "teleport"}])
    with pytest.raises(MarketInputError, match="not found"):
        run_suite([{"id": "x", "op": "opt_welfare", "instance": {"path": str(tmp_path / "gone.yaml")}}])
    with pytest.raises(MarketInputError, match="not found"):
        run_suite(tmp_path / "suite.yaml")


def test_suite_runs_property_checks():
    criteria = [
        {"id": "g", "op": "gradient_property", "args": {"points": 3}, "expected": True},
        {"id": "s", "op": "swsh_property", "args": {"instances": 3, "max_size": 2}, "expected": True},
        {"id": "c", "op": "contiguity_property", "args": {"instances": 3, "max_n": 4}, "expected": True},
    ]
    rows = run_suite(criteria)
    assert [row.passed for row in rows] == [True, True, True]


def test_acceptance_config_covers_every_criterion():
    path = Path(__file__).resolve().parents[1] / "config" / "acceptance.yaml"
    with open(path, "r", encoding="utf-8") as file:
        criteria = yaml.safe_load(file)["criteria"]
    assert {c["id"][:2] for c in criteria} == {f"{k:02d}" for k in range(1, 15)}
