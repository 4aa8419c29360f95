"""Command-line runner: goldens, config precedence, report format, determinism."""

import csv
import json
import math

import pytest

from amnesic import __version__
from amnesic.cli import CSV_COLUMNS, main

COS2 = math.cos(math.pi / 8) ** 2


def run(tmp_path, *argv, environ=None, name="out"):
    path = tmp_path / name
    code = main([*argv, "--out", str(path)], environ=environ or {})
    return code, path


def run_json(tmp_path, *argv, environ=None):
    code, path = run(tmp_path, *argv, environ=environ)
    return code, json.loads(path.read_text())


class TestProtocolCommands:
    def test_commit_complete(self, tmp_path):
        code, rep = run_json(tmp_path, "commit", "--lambda", "8", "--trials", "1000",
                             "--seed", "7")
        assert code == 0
        assert rep["summary"]["acceptance_rate"] == 1.0
        assert rep["summary"]["forced_measurements"] == 0

    def test_rot_match(self, tmp_path):
        code, rep = run_json(tmp_path, "rot", "--lambda", "16", "--ell", "2", "--trials", "1000")
        assert code == 0
        assert rep["summary"]["match_rate"] == 1.0

    def test_flip_bias(self, tmp_path):
        code, rep = run_json(tmp_path, "flip", "--trials", "10000")
        assert code == 0
        assert abs(rep["summary"]["bias"]) < 0.015
        assert rep["summary"]["agreement_rate"] == 1.0

    @pytest.mark.parametrize("b,expected", [(0, "0110"), (1, "1011")])
    def test_ot_wrap_branch(self, tmp_path, b, expected):
        code, rep = run_json(tmp_path, "ot-wrap", "--m0", "0110", "--m1", "1011",
                             "--b", str(b), "--trials", "20")
        assert code == 0
        assert {r["output"] for r in rep["rows"]} == {expected}

    def test_ot_wrap_random_inputs(self, tmp_path):
        code, rep = run_json(tmp_path, "ot-wrap", "--ell", "3", "--trials", "1000")
        assert code == 0
        assert rep["summary"]["correct_rate"] == 1.0
        assert {r["b"] for r in rep["rows"]} == {0, 1}

    def test_stall_holder_is_measured(self, tmp_path):
        code, rep = run_json(tmp_path, "commit", "--adversary", "stall-holder", "--trials", "50")
        assert code == 0
        assert rep["summary"]["forced_measurements"] == 50

    def test_breidbart_flip_reports_double_open(self, tmp_path):
        code, rep = run_json(tmp_path, "flip", "--adversary", "breidbart", "--lambda", "2",
                             "--trials", "2000")
        assert code == 0
        p = COS2**2
        assert rep["summary"]["double_open_predicted"] == pytest.approx(p, abs=1e-12)
        assert abs(rep["summary"]["double_open_rate"] - p) <= 3 * math.sqrt(p * (1 - p) / 2000)


class TestAttack:
    def test_double_open_breidbart(self, tmp_path):
        code, rep = run_json(tmp_path, "attack", "--adversary", "double-open-breidbart",
                             "--lambda", "1")
        assert code == 0
        assert rep["rows"][0]["value"] == pytest.approx(0.8535533906, abs=1e-9)

    def test_double_open_standard(self, tmp_path):
        code, rep = run_json(tmp_path, "attack", "--adversary", "double-open-standard",
                             "--lambda", "1")
        assert code == 0
        assert rep["rows"][0]["value"] == 0.75

    def test_double_open_three(self, tmp_path):
        code, rep = run_json(tmp_path, "attack", "--adversary", "double-open-breidbart",
                             "--lambda", "3")
        assert rep["rows"][0]["value"] == pytest.approx(COS2**3, abs=1e-12)
        assert rep["rows"][0]["passed"] is True

    def test_standard_exact(self, tmp_path):
        code, rep = run_json(tmp_path, "attack", "--adversary", "standard", "--lambda", "4",
                             "--exact")
        assert code == 0
        row = rep["rows"][0]
        assert row["value"] == 0.658203125
        assert row["mode"] == "exact"

    def test_sampled_large_lambda(self, tmp_path):
        code, rep = run_json(tmp_path, "attack", "--adversary", "breidbart", "--lambda", "40",
                             "--trials", "2000")
        assert code == 0
        assert rep["rows"][0]["mode"] == "mc"
        assert rep["rows"][0]["trials"] == 2000

    def test_exact_beyond_cap_is_usage_error(self, tmp_path):
        code, _ = run(tmp_path, "attack", "--adversary", "standard", "--lambda", "40", "--exact")
        assert code == 2


class TestUsage:
    @pytest.mark.parametrize("argv", [
        ["attack", "--adversary", "nobody"],
        ["commit", "--adversary", "nobody"],
        ["commit", "--trials", "0"],
        ["commit", "--lambda", "25"],
        ["ot-wrap", "--m0", "01", "--m1", "1"],
        ["ot-wrap", "--m0", "01"],
        ["ot-wrap", "--m0", "0a", "--m1", "01"],
        ["commit", "--lam", "4"],
        ["nosuch"],
    ])
    def test_rejected(self, tmp_path, argv, capsys):
        assert main([*argv, "--out", str(tmp_path / "x")], environ={}) == 2

    def test_bad_env_value(self, tmp_path):
        code, _ = run(tmp_path, "commit", environ={"AMNESIC_TRIALS": "many"})
        assert code == 2

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out


class TestConfig:
    def test_env_overrides_default(self, tmp_path):
        _, rep = run_json(tmp_path, "commit", environ={"AMNESIC_LAMBDA": "3",
                                                       "AMNESIC_TRIALS": "5"})
        assert rep["config"]["lambda"] == 3
        assert rep["summary"]["trials"] == 5

    def test_flag_overrides_env(self, tmp_path):
        _, rep = run_json(tmp_path, "commit", "--lambda", "4", "--trials", "6",
                          environ={"AMNESIC_LAMBDA": "3", "AMNESIC_TRIALS": "5"})
        assert rep["config"]["lambda"] == 4
        assert rep["summary"]["trials"] == 6

    def test_env_format_and_seed(self, tmp_path):
        code, path = run(tmp_path, "commit", "--trials", "3",
                         environ={"AMNESIC_FORMAT": "csv", "AMNESIC_SEED": "11"})
        assert code == 0
        assert path.read_text().startswith("# schema=1")
        assert '"seed": 11' in path.read_text().splitlines()[0]

    def test_report_header(self, tmp_path):
        _, rep = run_json(tmp_path, "rot", "--trials", "4", "--seed", "3")
        assert rep["schema"] == 1
        assert rep["version"] == __version__
        assert rep["seed"] == 3
        assert rep["config"]["seed"] == 3 and rep["config"]["ell"] == 1
        assert all(len(r["transcript_sha256"]) == 64 for r in rep["rows"])


class TestCsv:
    @pytest.mark.parametrize("argv", [
        ["commit", "--trials", "3"],
        ["rot", "--trials", "3"],
        ["flip", "--trials", "3"],
        ["ot-wrap", "--trials", "3"],
        ["attack", "--adversary", "standard", "--lambda", "2", "--exact"],
    ])
    def test_column_order(self, tmp_path, argv):
        code, path = run(tmp_path, *argv, "--format", "csv")
        assert code == 0
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# schema=1 version=")
        rows = list(csv.reader(lines[1:]))
        assert rows[0] == CSV_COLUMNS[argv[0]]
        assert all(len(r) == len(rows[0]) for r in rows)


class TestDeterminism:
    @pytest.mark.parametrize("command", ["commit", "rot", "flip", "ot-wrap"])
    def test_same_seed_same_bytes(self, tmp_path, command):
        _, a = run(tmp_path, command, "--trials", "40", "--seed", "5", name="a")
        _, b = run(tmp_path, command, "--trials", "40", "--seed", "5", name="b")
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_transcripts(self, tmp_path):
        _, a = run_json(tmp_path, "commit", "--trials", "10", "--seed", "1")
        _, b = run_json(tmp_path, "commit", "--trials", "10", "--seed", "2")
        assert a["summary"]["transcripts_sha256"] != b["summary"]["transcripts_sha256"]

    def test_workers_do_not_change_results(self, tmp_path):
        _, one = run_json(tmp_path, "rot", "--trials", "30", "--seed", "9", "--workers", "1")
        _, two = run_json(tmp_path, "rot", "--trials", "30", "--seed", "9", "--workers", "2")
        assert one["rows"] == two["rows"]
        assert one["summary"] == two["summary"]

    def test_verify_suite_deterministic(self, tmp_path):
        code_a, a = run(tmp_path, "verify", "lhl", "--seed", "2", name="a")
        code_b, b = run(tmp_path, "verify", "lhl", "--seed", "2", name="b")
        assert code_a == code_b == 0
        assert a.read_bytes() == b.read_bytes()
        assert json.loads(a.read_text())["summary"]["suites"] == {"lhl": True}


class TestVerify:
    def test_binding_suite(self, tmp_path):
        code, rep = run_json(tmp_path, "verify", "binding")
        assert code == 0
        names = {r["name"] for r in rep["rows"]}
        assert {"breidbart-exact", "decay-lambda-6"} <= names

    def test_moe_table(self, tmp_path):
        code, rep = run_json(tmp_path, "verify", "moe")
        assert code == 0
        table = rep["summary"]["tables"]["moe"]
        assert [r["lambda"] for r in table] == [1, 2, 3, 4]
        for r in table:
            assert r["best"] <= r["bound"] + 1e-9
