"""
コマンドラインのテスト
"""
import json

import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from main import EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, main

ROOT = Path(__file__).parent.parent
FIXTURES = ROOT / "data" / "fixtures"


def fixture(name: str) -> str:
    return str(FIXTURES / name)


class TestEquivCommand:
    """equiv のテスト"""

    def test_teleport_equals_wire(self, capsys):
        assert main(["equiv", fixture("teleport.circ"), fixture("id1.circ")]) == EXIT_OK
        assert capsys.readouterr().out.startswith(("equal", "proportional"))

    def test_different_circuits(self, capsys):
        code = main(["equiv", fixture("cnot.circ"), fixture("swap.circ"), "--oracle", "both"])
        assert code == EXIT_NEGATIVE
        out = capsys.readouterr().out
        assert "different at" in out
        assert "different" in out.splitlines()[-1]

    def test_structured_output(self, capsys):
        code = main(["equiv", fixture("hh.circ"), fixture("id1.circ"), "--format", "structured"])
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["equivalent"] is True

    def test_mbqc_cnot(self):
        assert main(["equiv", fixture("mbqc_cnot.circ"), fixture("cnot.circ"), "--oracle", "tableau"]) == EXIT_OK

    def test_arity_mismatch_is_a_usage_error(self):
        assert main(["equiv", fixture("cnot.circ"), fixture("id1.circ")]) == EXIT_USAGE

    def test_missing_file(self):
        assert main(["equiv", "no_such.circ", fixture("id1.circ")]) == EXIT_USAGE


class TestVerifyCommand:
    """verify のテスト"""

    def test_accepted(self, capsys):
        assert main(["verify", fixture("teleport.deriv")]) == EXIT_OK
        assert "accepted (13 steps)" in capsys.readouterr().out

    def test_rejected(self, capsys):
        assert main(["verify", fixture("teleport_bad.deriv")]) == EXIT_NEGATIVE
        assert "rejected at step 4" in capsys.readouterr().out

    def test_zx_script(self):
        assert main(["verify", fixture("snake_to_wire.zxderiv")]) == EXIT_OK


class TestApplyCommand:
    """apply・translate のテスト"""

    def test_apply_hadamard_expansion(self, capsys):
        assert main(["apply", fixture("hh.circ"), "--rule", "Hcirc", "--fix", "1=2"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "input a\nh a\nrz a 1\nrx a 1\nrz a 1\noutput a"

    def test_apply_with_params(self, tmp_path, capsys):
        path = tmp_path / "rz.circ"
        path.write_text("input a\nrz a 1\nrz a 1\noutput a", encoding="utf-8")
        code = main(["apply", str(path), "--rule", "S6circ", "--param", "alpha=1", "--param", "beta=1"])
        assert code == EXIT_OK
        assert capsys.readouterr().out.strip() == "input a\nrz a 2\noutput a"

    def test_apply_without_match(self):
        assert main(["apply", fixture("cnot.circ"), "--rule", "Hcirc"]) == EXIT_NEGATIVE

    def test_apply_bad_fix(self):
        assert main(["apply", fixture("hh.circ"), "--rule", "Hcirc", "--fix", "1"]) == EXIT_USAGE

    def test_translate(self, capsys):
        assert main(["translate", fixture("cnot.circ")]) == EXIT_OK
        out = capsys.readouterr().out
        assert " Z" in out and " X" in out

    def test_translate_identity(self, capsys):
        """恒等回路は辺1本"""
        assert main(["translate", fixture("id1.circ")]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len([line for line in lines if line.startswith("edge")]) == 1
        assert all(line.split()[2] in ("in", "out") for line in lines if line.startswith("node"))


class TestCliErrors:
    """使い方エラーのテスト"""

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == EXIT_USAGE

    def test_bad_oracle(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["equiv", fixture("cnot.circ"), fixture("cnot.circ"), "--oracle", "magic"])
        assert excinfo.value.code == EXIT_USAGE

    def test_mutations_corpus(self, monkeypatch, capsys):
        monkeypatch.chdir(ROOT)
        assert main(["mutations"]) == EXIT_OK
        assert "20 mutations checked" in capsys.readouterr().out

    def test_small_selftest(self, capsys):
        assert main([
            "selftest", "--max-arity", "1", "--ccirc-max", "1",
            "--translation-samples", "5", "--oracle-pairs", "3", "--seed", "4",
        ]) == EXIT_OK
        out = capsys.readouterr().out
        assert "0 failures" in out
        assert "translation (seed 4): 5 checked, 0 failures" in out
        assert "oracle-agreement (seed 4): 3 checked, 0 failures" in out
