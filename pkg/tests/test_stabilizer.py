"""
安定化子タブローと等価性オラクルのテスト
"""
import numpy as np
import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.circuit import identity_circuit, inline_h, parse_circuit, random_circuit_pair
from app.circuit_rules import random_rewrite
from app.exceptions import ArityError, TableauError
from app.models import VerdictKind
from app.stabilizer import (
    choi_tableau,
    conjugation_table,
    equiv_exact,
    equiv_tableau,
    tableau_canonical,
    tableau_from_strings,
)

TELEPORT = (
    "input a\nprepplus b\nprep0 c\ncnot b c\ncnot a b\n"
    "postplus a\npost0 b\noutput c"
)
CNOT = "input a b\ncnot a b\noutput a b"
SWAP = "input a b\nswap a b\noutput a b"


class TestTableau:
    """タブローの正規形のテスト"""

    def test_from_strings(self):
        tableau = tableau_from_strings(["+ZZ", "-XX"])
        assert tableau.n == 2
        assert tableau.dump() == "+ZZ\n-XX"

    def test_invalid_pauli(self):
        with pytest.raises(TableauError):
            tableau_from_strings(["+XQ"])

    def test_length_mismatch(self):
        with pytest.raises(TableauError):
            tableau_from_strings(["+X", "+ZZ"])

    def test_canonical_order(self):
        """X 成分の列が先に来る"""
        assert tableau_canonical(tableau_from_strings(["+ZZ", "+XX"])).dump() == "+XX\n+ZZ"

    def test_canonical_is_independent_of_generators(self):
        first = tableau_canonical(tableau_from_strings(["+XX", "+ZZ"]))
        second = tableau_canonical(tableau_from_strings(["+XX", "-YY"]))
        assert first == second

    def test_dependent_rows_dropped(self):
        """XX·ZZ = −YY なので3本目は従属"""
        tableau = tableau_canonical(tableau_from_strings(["+XX", "+ZZ", "-YY"]))
        assert tableau.rows == 2

    def test_minus_identity(self):
        with pytest.raises(TableauError):
            tableau_canonical(tableau_from_strings(["+XX", "+ZZ", "+YY"]))

    def test_anticommuting(self):
        with pytest.raises(TableauError):
            tableau_canonical(tableau_from_strings(["+X", "+Z"]))


class TestChoiTableau:
    """Choi 状態のタブローのテスト"""

    def test_identity_wire(self):
        """1本のワイヤは Bell 状態"""
        assert choi_tableau(identity_circuit(1)).dump() == "+XX\n+ZZ"

    def test_teleport_is_a_wire(self):
        assert choi_tableau(parse_circuit(TELEPORT)) == choi_tableau(identity_circuit(1))

    def test_impossible_postselection_is_zero(self):
        tableau = choi_tableau(parse_circuit("prep0 a\nrx a 2\npost0 a"))
        assert tableau.zero
        assert tableau.dump() == "Zero"

    def test_phase_is_visible(self):
        s = parse_circuit("input a\nrz a 1\noutput a")
        s_dagger = parse_circuit("input a\nrz a 3\noutput a")
        assert choi_tableau(s) != choi_tableau(s_dagger)


class TestEquivalence:
    """2つのオラクルのテスト"""

    @pytest.mark.parametrize("first, second, expected", [
        (TELEPORT, "input a\noutput a", True),
        ("input a\nh a\nh a\noutput a", "input a\noutput a", True),
        ("input a\nrz a 2\nrz a 2\noutput a", "input a\noutput a", True),
        (CNOT, SWAP, False),
        (CNOT, "input a b\ncnot b a\noutput a b", False),
        ("input a\nrz a 1\noutput a", "input a\nrx a 1\noutput a", False),
    ])
    def test_oracles_agree(self, first, second, expected):
        c1, c2 = parse_circuit(first), parse_circuit(second)
        assert equiv_tableau(c1, c2) == expected
        assert equiv_exact(c1, c2).equivalent == expected

    def test_exact_reports_witness(self):
        verdict = equiv_exact(parse_circuit(CNOT), parse_circuit(SWAP))
        assert verdict.kind == VerdictKind.DIFFERENT
        assert verdict.witness is not None

    def test_inline_h_keeps_tableau(self):
        circuit = parse_circuit("input a b\nh a\ncnot a b\nh b\noutput a b")
        assert equiv_tableau(circuit, inline_h(circuit))

    def test_both_zero_are_equivalent(self):
        first = parse_circuit("prep0 a\nrx a 2\npost0 a")
        second = parse_circuit("prepplus a\nrz a 2\npostplus a")
        assert equiv_tableau(first, second)
        assert equiv_exact(first, second).kind == VerdictKind.BOTH_ZERO

    def test_oracles_agree_on_random_pairs(self):
        """5本以下・20ゲート以下のランダムな組200個で2つのオラクルの判定が一致する（半分は書き換えた等価な組）"""
        rng = np.random.default_rng(17)
        equivalent = 0
        for _ in range(200):
            first, second = random_circuit_pair(rng, max_wires=5, max_gates=20)
            if rng.integers(0, 2) == 0:
                rewrite = random_rewrite(first, rng)
                if rewrite is not None:
                    second = rewrite[2]
            verdict = equiv_exact(first, second)
            assert equiv_tableau(first, second) == verdict.equivalent
            equivalent += verdict.equivalent
        assert equivalent > 0

    def test_arity_mismatch(self):
        with pytest.raises(ArityError):
            equiv_tableau(identity_circuit(1), identity_circuit(2))


class TestConjugationTable:
    """Clifford ゲートによる Pauli の共役のテスト"""

    def test_hadamard(self):
        table = conjugation_table("h")
        assert table["X"] == "+Z"
        assert table["Y"] == "-Y"
        assert table["Z"] == "+X"

    def test_cnot(self):
        table = conjugation_table("cnot")
        assert table["XI"] == "+XX"
        assert table["IZ"] == "+ZZ"
        assert table["IX"] == "+IX"
        assert table["ZI"] == "+ZI"

    def test_swap(self):
        assert conjugation_table("swap")["XI"] == "+IX"

    def test_phase_gate(self):
        table = conjugation_table("rz", 1)
        assert table["X"] == "+Y"
        assert table["Y"] == "-X"
        assert table["Z"] == "+Z"

    def test_not_unitary(self):
        with pytest.raises(ValueError):
            conjugation_table("prep0")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
