import json

import pytest
import yaml

from app.cli import main


def _generate(tmp_path, generator_id, *params):
    path = tmp_path / f"{generator_id}.yaml"
    args = ["generate", generator_id, "--out", str(path)]
    for p in params:
        args += ["--param", p]
    assert main(args) == 0
    return str(path)


def test_generate_to_stdout(capsys):
    assert main(["generate", "logn", "--param", "n=2"]) == 0
    document = yaml.safe_load(capsys.readouterr().out)
    assert document["kind"] == "bipartite"
    assert document["market"]["values"][1] == ["1", "1"]


def test_bundle_rev_json_lines(capsys):
    assert main(["--format", "json-lines", "bundle", "rev", "--mu", "1.0", "2.0", "--sigma", "1.0"]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [row["mu"] for row in rows] == [1.0, 2.0]
    assert all(0 < row["d_rev_d_mu"] < 1 for row in rows)


def test_fees_verify_failure_exits_one(tmp_path, capsys):
    path = _generate(tmp_path, "no-pure")
    assert main(["fees", "verify", path, "--alpha", "1/2", "--P="]) == 1
    assert "verification failed" in capsys.readouterr().err


def test_fees_poa_csv(tmp_path, capsys):
    path = _generate(tmp_path, "logn", "n=8", "eps=1/100")
    assert main(["fees", "poa", path, "--alpha", "1", "--P", "0"]) == 0
    header, row = capsys.readouterr().out.splitlines()
    assert header.split(",")[-1] == "poa"
    assert row.endswith("15227/5607")


def test_missing_instance_exits_two(tmp_path, capsys):
    assert main(["fees", "sweep", str(tmp_path / "missing.yaml")]) == 2
    assert "input error" in capsys.readouterr().err


def test_kind_mismatch_exits_two(tmp_path):
    path = _generate(tmp_path, "tip-bad")
    assert main(["fees", "sweep", path]) == 2


def test_delivery_brute(tmp_path, capsys):
    path = _generate(tmp_path, "tip-bad")
    assert main(["--format", "json-lines", "delivery", "brute", path, "--mode", "best_without_tip"]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["value"] == "-1"
    assert row["allocation"] == [[1, 0, 0]]


def test_delivery_check_alloc(tmp_path):
    path = _generate(tmp_path, "market-clearing")
    alloc = tmp_path / "alloc.yaml"
    alloc.write_text("[[0, 0, 0]]\n")
    assert main(["delivery", "check-alloc", path, "--alloc", str(alloc)]) == 1


def test_oracle_command(tmp_path, capsys):
    path = _generate(tmp_path, "bundle4")
    assert main(["--format", "json-lines", "oracle", "bundle_enum", path]) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["optimal_structure"] == [1, 2, 3]


def test_suite_exit_codes(tmp_path):
    passing = tmp_path / "pass.yaml"
    passing.write_text(yaml.safe_dump({"criteria": [
        {"id": "ok", "instance": "tip-bad", "op": "opt_welfare", "expected": 3},
    ]}))
    failing = tmp_path / "fail.yaml"
    failing.write_text(yaml.safe_dump({"criteria": [
        {"id": "off", "instance": "tip-bad", "op": "opt_welfare", "expected": 2},
    ]}))
    assert main(["suite", "run", str(passing)]) == 0
    assert main(["suite", "run", str(failing)]) == 1


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["teleport"])
    assert excinfo.value.code == 2
