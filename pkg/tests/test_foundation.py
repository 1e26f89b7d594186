from fractions import Fraction

import pytest

from app.core.exception import AppException, MarketInputError, OracleLimitError
from app.utils.params import get_seed, load_params, resolve_params_path
from app.utils.rational import format_rat, harmonic, to_rat


def test_to_rat_parses_exact_fractions():
    assert to_rat("1/3") == Fraction(1, 3)
    assert to_rat(" 7 ") == Fraction(7)
    assert to_rat(4) == Fraction(4)


@pytest.mark.parametrize("raw", ["1/0", "a/b", "0.5", 0.5, True, None])
def test_to_rat_rejects_inexact_or_malformed(raw):
    with pytest.raises(MarketInputError):
        to_rat(raw)


def test_format_rat_is_canonical():
    assert format_rat(Fraction(6, 2)) == "3"
    assert format_rat(Fraction(-2, 4)) == "-1/2"


def test_harmonic():
    assert harmonic(8) == Fraction(761, 280)


def test_params_sections_present():
    params = load_params()
    for section in ("markets_params", "platform_fees_params", "disruption_params", "delivery_params",
                    "bundling_params", "workbench_params", "cli_params"):
        assert "log_file_path" in params[section]


def test_params_path_override(monkeypatch, tmp_path):
    custom = tmp_path / "params.yaml"
    custom.write_text("markets_params:\n  log_file_path: custom.log\n", encoding="utf-8")
    monkeypatch.setenv("MARKETGRAPH_PARAMS", str(custom))
    assert resolve_params_path() == str(custom)
    assert load_params()["markets_params"]["log_file_path"] == "custom.log"


def test_missing_params_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_params(str(tmp_path / "absent.yaml"))


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("MARKETGRAPH_SEED", "17")
    assert get_seed() == 17
    monkeypatch.setenv("MARKETGRAPH_SEED", "seventeen")
    assert get_seed(3) == 3


def test_exception_keeps_reason():
    error = OracleLimitError("limited to 12 sellers")
    assert isinstance(error, MarketInputError)
    assert isinstance(error, AppException)
    assert error.reason == "limited to 12 sellers"
    assert "limited to 12 sellers" in str(error)
