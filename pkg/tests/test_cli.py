import csv
import json

import pytest
from click.testing import CliRunner

from main import cli
from Utils.helpers import TOOL_VERSION


@pytest.fixture
def runner():
    return CliRunner()


def _summary(result) -> dict:
    return json.loads(result.stdout.strip().splitlines()[-1])


def _rows(path):
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    return lines[0], list(csv.reader(lines[1:]))


# ---- run ----
def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert TOOL_VERSION in result.output


def test_verify_needs_a_multiple_of_three(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--variant", "verify", "--N", "5", "--out", str(tmp_path / "t.jsonl")])
    assert result.exit_code == 2


def test_honest_verify_run(runner, tmp_path):
    out = tmp_path / "t.jsonl"
    result = runner.invoke(cli, ["run", "--variant", "verify", "--N", "3", "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    summary = _summary(result)
    assert summary["e"] == 0
    assert summary["fidelity"] == pytest.approx(1.0, abs=1e-9)
    header = json.loads(out.read_text(encoding="utf-8").splitlines()[0])
    assert header["seed"] == 1 and header["variant"] == "verify"


def test_same_seed_gives_identical_transcripts(runner, tmp_path):
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for path in paths:
        args = ["run", "--variant", "noverify", "--N", "3", "--angles", "0.4,1.2", "--seed", "42", "--out", str(path)]
        assert runner.invoke(cli, args).exit_code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_always_accept_device_is_reported_as_accepted(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--variant", "verify", "--N", "3", "--device", "always_accept",
                                 "--seed", "2", "--out", str(tmp_path / "t.jsonl")])
    assert result.exit_code == 0
    summary = _summary(result)
    assert summary["e"] == 0
    assert summary["fidelity"] == pytest.approx(0.5)


def test_attack_file_corrupts_a_noverify_run(runner, tmp_path):
    attack = tmp_path / "attack.json"
    attack.write_text(json.dumps({"kind": "pauli_attack", "sites": [0], "paulis": ["Z"]}), encoding="utf-8")
    result = runner.invoke(cli, ["run", "--variant", "noverify", "--N", "3", "--bob", str(attack),
                                 "--seed", "3", "--out", str(tmp_path / "t.jsonl")])
    assert result.exit_code == 0
    assert _summary(result)["fidelity"] < 0.5


def test_bad_attack_file_is_a_config_error(runner, tmp_path):
    attack = tmp_path / "attack.json"
    attack.write_text("{}", encoding="utf-8")
    result = runner.invoke(cli, ["run", "--bob", str(attack), "--seed", "3", "--out", str(tmp_path / "t.jsonl")])
    assert result.exit_code == 2


def test_unparseable_angles(runner):
    assert runner.invoke(cli, ["run", "--variant", "noverify", "--N", "3", "--angles", "a,b"]).exit_code == 2


def test_seed_from_environment(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--variant", "verify", "--N", "3", "--out", str(tmp_path / "t.jsonl")],
                           env={"BLINDSIM_SEED": "11"})
    assert result.exit_code == 0
    assert _summary(result)["seed"] == 11


def test_config_file_with_flag_override(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"variant": "noverify", "N": 2, "seed": 5}), encoding="utf-8")
    result = runner.invoke(cli, ["run", "--config", str(config), "--seed", "6", "--out", str(tmp_path / "t.jsonl")])
    assert result.exit_code == 0
    summary = _summary(result)
    assert summary["variant"] == "noverify"
    assert summary["seed"] == 6


def test_unknown_config_key(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"variant": "noverify", "colour": "blue"}), encoding="utf-8")
    assert runner.invoke(cli, ["run", "--config", str(config)]).exit_code == 2


# ---- bound-sweep ----
def test_bound_sweep_rows(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(cli, ["bound-sweep", "--N", "9", "--d", "1", "--d", "3", "--strategies", "single",
                                 "--trials", "1000", "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    comment, rows = _rows(out)
    assert comment.startswith("# config_hash=") and "seed=3" in comment
    assert rows[0] == ["N", "d", "strategy", "brute_force_p", "mc_estimate", "mc_stderr", "bound"]
    assert len(rows) == 1 + 2 * 27
    d3 = [r for r in rows[1:] if r[1] == "3"]
    assert all(r[6] == "0.666666666667" for r in d3)
    # one flipped position never beats a distance-3 code
    assert all(r[3] == "0" for r in d3)


def test_bound_sweep_is_reproducible(runner, tmp_path):
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for out in outs:
        args = ["bound-sweep", "--N", "6", "--strategies", "pair", "--trials", "1000", "--seed", "8", "--out", str(out)]
        assert runner.invoke(cli, args).exit_code == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_bound_sweep_single_x_value(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    runner.invoke(cli, ["bound-sweep", "--N", "3", "--trials", "1000", "--seed", "1", "--out", str(out)])
    _, rows = _rows(out)
    by_strategy = {r[2]: r for r in rows[1:]}
    assert float(by_strategy["X1"][3]) == pytest.approx(1 / 3)


def test_empty_strategy_set_gives_a_header_only_csv(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    result = runner.invoke(cli, ["bound-sweep", "--N", "3", "--strategies", "none", "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0
    _, rows = _rows(out)
    assert len(rows) == 1


def test_distance_beyond_the_computation_positions(runner, tmp_path):
    result = runner.invoke(cli, ["bound-sweep", "--N", "3", "--d", "3", "--seed", "1",
                                 "--out", str(tmp_path / "sweep.csv")])
    assert result.exit_code == 2


# ---- certify ----
def test_planted_nosignaling_fails_certification(runner, tmp_path):
    out = tmp_path / "certify.json"
    result = runner.invoke(cli, ["certify", "nosignaling", "--planted", "--trials", "10000",
                                 "--seed", "4", "--out", str(out)])
    assert result.exit_code != 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["pass"] is False
    assert {c["check"] for c in document["checks"]} == {"nosignaling", "nosignaling_planted_control"}


def test_honest_nosignaling_certifies(runner, tmp_path):
    out = tmp_path / "certify.json"
    result = runner.invoke(cli, ["certify", "nosignaling", "--trials", "10000", "--seed", "4", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text(encoding="utf-8"))["pass"] is True


@pytest.mark.slow
def test_composition_suite(runner, tmp_path):
    out = tmp_path / "certify.json"
    result = runner.invoke(cli, ["certify", "composition", "--trials", "10", "--seed", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["suite"] == "composition"
    assert all(c["pass"] for c in document["checks"])
