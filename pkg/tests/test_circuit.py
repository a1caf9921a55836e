"""
回路テキスト・DAG・行列意味論のテスト
"""
import numpy as np
import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.circuit import (
    circuit_compose,
    circuit_tensor,
    circuit_to_matrix,
    gate_matrix,
    identity_circuit,
    inline_h,
    parse_circuit,
    print_circuit,
    random_circuit,
    structurally_equal,
)
from app.exact import CliffordScalar, ExactMatrix, mat_identity, mat_mul, mat_proportional, mat_tensor
from app.exceptions import (
    ArityError,
    CircuitSyntaxError,
    DuplicateLabelError,
    LivenessError,
)
from app.models import VerdictKind

TELEPORT = """
input a
prepplus b
prep0 c
cnot b c
cnot a b
postplus a
post0 b
output c
"""

CNOT_MATRIX = ExactMatrix.from_rows([
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
])


class TestParseCircuit:
    """パースと検証のテスト"""

    def test_teleport_shape(self):
        """テレポーテーション回路は 1 入力 1 出力 6 ゲート"""
        circuit = parse_circuit(TELEPORT)
        assert circuit.n_inputs == 1
        assert circuit.n_outputs == 1
        assert len(circuit) == 6

    def test_node_ids_follow_instruction_order(self):
        circuit = parse_circuit("input a\nh a\nh a\noutput a")
        assert circuit.kind(0) == "input"
        assert circuit.gate_nodes() == [1, 2]
        assert circuit.kind(3) == "output"

    def test_comments_and_blank_lines(self):
        circuit = parse_circuit("# 恒等\n\ninput a  # 入力\noutput a\n")
        assert len(circuit) == 0

    def test_phase_is_reduced(self):
        circuit = parse_circuit("input a\nrz a 5\noutput a")
        assert circuit.phase(1) == 1

    def test_unknown_instruction(self):
        with pytest.raises(CircuitSyntaxError) as excinfo:
            parse_circuit("input a\ntoffoli a\noutput a")
        assert excinfo.value.line == 2

    def test_wrong_argument_count(self):
        with pytest.raises(CircuitSyntaxError):
            parse_circuit("input a b\ncnot a\noutput a b")

    def test_cnot_needs_distinct_wires(self):
        with pytest.raises(CircuitSyntaxError):
            parse_circuit("input a\ncnot a a\noutput a")

    def test_bad_phase(self):
        with pytest.raises(CircuitSyntaxError):
            parse_circuit("input a\nrz a half\noutput a")

    def test_use_after_destroy(self):
        with pytest.raises(LivenessError):
            parse_circuit("input a\npost0 a\nh a")

    def test_use_before_create(self):
        with pytest.raises(LivenessError):
            parse_circuit("h a\noutput a")

    def test_dangling_wire(self):
        with pytest.raises(LivenessError):
            parse_circuit("input a\nprep0 b\noutput a")

    def test_duplicate_creation(self):
        with pytest.raises(DuplicateLabelError):
            parse_circuit("input a\nprep0 a\noutput a")

    def test_duplicate_input_line(self):
        with pytest.raises(CircuitSyntaxError):
            parse_circuit("input a\ninput b\noutput a b")

    def test_double_destruction(self):
        with pytest.raises(LivenessError):
            parse_circuit("input a\npost0 a\npost0 a")

    def test_print_identity(self):
        assert print_circuit(identity_circuit(1)) == "input a\noutput a"

    def test_print_round_trip(self):
        """正規ラベルで書き出して読み直すと構造的に等しい"""
        circuit = parse_circuit(TELEPORT)
        assert structurally_equal(parse_circuit(print_circuit(circuit)), circuit)

    def test_print_uses_canonical_labels(self):
        text = print_circuit(parse_circuit("input x y\ncnot y x\noutput y x"))
        assert text == "input a b\ncnot b a\noutput b a"


class TestComposition:
    """直列・並列合成のテスト"""

    def test_compose_arity_mismatch(self):
        with pytest.raises(ArityError):
            circuit_compose(identity_circuit(1), identity_circuit(2))

    def test_cnot_is_self_inverse(self):
        cnot = parse_circuit("input a b\ncnot a b\noutput a b")
        twice = circuit_compose(cnot, cnot)
        assert len(twice) == 2
        verdict = mat_proportional(circuit_to_matrix(twice), mat_identity(2))
        assert verdict.kind == VerdictKind.EQUAL

    def test_compose_with_identity(self):
        circuit = parse_circuit("input a b\ncnot a b\nh b\noutput a b")
        assert structurally_equal(circuit_compose(identity_circuit(2), circuit), circuit)

    def test_prepare_then_postselect(self):
        """⟨0|·|0⟩ は √2·√2 = 2"""
        closed = circuit_compose(parse_circuit("prep0 a\noutput a"), parse_circuit("input a\npost0 a"))
        assert circuit_to_matrix(closed) == ExactMatrix.from_rows([[2]])

    def test_compose_matches_matrix_product(self):
        """直列合成の行列は matrix(g)·matrix(f)（厳密に一致）"""
        rng = np.random.default_rng(31)
        pairs = 0
        while pairs < 200:
            f = random_circuit(rng, max_wires=4, max_gates=10)
            g = random_circuit(rng, max_wires=4, max_gates=10)
            if g.n_inputs != f.n_outputs:
                continue
            pairs += 1
            expected = mat_mul(circuit_to_matrix(g), circuit_to_matrix(f))
            assert circuit_to_matrix(circuit_compose(f, g)) == expected

    def test_tensor_matches_kronecker_product(self):
        """並列合成の行列は matrix(f)⊗matrix(g)（厳密に一致）"""
        rng = np.random.default_rng(37)
        for _ in range(200):
            f = random_circuit(rng, max_wires=4, max_gates=10)
            g = random_circuit(rng, max_wires=4, max_gates=10)
            if f.n_inputs + f.n_outputs + g.n_inputs + g.n_outputs > 12:
                continue
            expected = mat_tensor(circuit_to_matrix(f), circuit_to_matrix(g))
            assert circuit_to_matrix(circuit_tensor(f, g)) == expected

    def test_tensor_renumbers_boundaries(self):
        both = circuit_tensor(identity_circuit(1), parse_circuit("input a\nh a\noutput a"))
        assert both.n_inputs == 2
        assert both.n_outputs == 2
        assert len(both) == 1


class TestCircuitMatrix:
    """行列意味論のテスト"""

    def test_cnot_matrix(self):
        cnot = parse_circuit("input a b\ncnot a b\noutput a b")
        assert circuit_to_matrix(cnot) == CNOT_MATRIX

    def test_zero_preparation(self):
        """|0⟩ = √2·(1, 0)ᵀ"""
        m = circuit_to_matrix(parse_circuit("prep0 a\noutput a"))
        assert (m.rows, m.cols) == (2, 1)
        assert m[0, 0] == CliffordScalar.sqrt2()
        assert m[1, 0].is_zero()

    def test_swap_matrix(self):
        swap = parse_circuit("input a b\nswap a b\noutput a b")
        m = circuit_to_matrix(swap)
        assert m[1, 2] == m[2, 1]
        assert m[1, 1].is_zero()

    def test_gate_labels_follow_wires(self):
        """出力ポートと入力側の producer がそのままラベルになり、順序を入れ替えた配線も正しく縮約される"""
        crossed = parse_circuit("input a b\ncnot b a\nswap a b\ncnot a b\noutput b a")
        reference = parse_circuit("input a b\ncnot b a\ncnot b a\noutput a b")
        assert circuit_to_matrix(crossed) == circuit_to_matrix(reference)

    def test_identity_wire(self):
        assert circuit_to_matrix(identity_circuit(1)) == mat_identity(1)

    def test_hadamard_squares_to_scalar(self):
        """非正規化 H の二乗は 2I"""
        hh = parse_circuit("input a\nh a\nh a\noutput a")
        verdict = mat_proportional(circuit_to_matrix(hh), mat_identity(1))
        assert verdict.kind == VerdictKind.PROPORTIONAL

    def test_teleport_is_identity_up_to_scalar(self):
        verdict = mat_proportional(circuit_to_matrix(parse_circuit(TELEPORT)), mat_identity(1))
        assert verdict.equivalent
        assert verdict.kind != VerdictKind.BOTH_ZERO

    def test_inline_h(self):
        """H = Rz·Rx·Rz（スカラーを除く）"""
        h = parse_circuit("input a\nh a\noutput a")
        inlined = inline_h(h)
        assert len(inlined) == 3
        assert mat_proportional(circuit_to_matrix(inlined), circuit_to_matrix(h)).equivalent

    def test_rz_pi_is_z(self):
        z = ExactMatrix.from_rows([[1, 0], [0, -1]])
        assert mat_proportional(gate_matrix("rz", 2), z).equivalent

    def test_rx_pi_is_x(self):
        x = ExactMatrix.from_rows([[0, 1], [1, 0]])
        assert mat_proportional(gate_matrix("rx", 2), x).equivalent

    def test_impossible_postselection_is_zero(self):
        closed = parse_circuit("prep0 a\nrx a 2\npost0 a")
        assert circuit_to_matrix(closed).is_zero()

    def test_boundary_limit(self):
        cnot = parse_circuit("input a b\ncnot a b\noutput a b")
        with pytest.raises(ArityError):
            circuit_to_matrix(cnot, max_qubits=3)


class TestRandomCircuit:
    """ランダム回路のテスト"""

    def test_seeded_generation_is_reproducible(self):
        first = random_circuit(np.random.default_rng(7))
        second = random_circuit(np.random.default_rng(7))
        assert print_circuit(first) == print_circuit(second)

    def test_generated_circuits_parse_back(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            circuit = random_circuit(rng)
            assert structurally_equal(parse_circuit(print_circuit(circuit)), circuit)
