"""
ZX 図のテスト
"""
import networkx as nx
import numpy as np
import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.circuit import circuit_to_matrix, parse_circuit, random_circuit
from app.exact import mat_identity, mat_proportional
from app.exceptions import NormalizationError, SizeOverflowError, ZxFormatError
from app.models import VerdictKind
from app.zx import (
    SPIDER_KINDS,
    ZxBuilder,
    ZxDiagram,
    circuit_to_zx,
    parse_zx,
    print_zx,
    random_diagram,
    zx_iso,
    zx_normalize,
    zx_to_matrix,
)

WIRE = "node 0 in 0\nnode 1 out 0\nedge 0 1"


class TestZxText:
    """ZX テキスト形式のテスト"""

    def test_parse_wire(self):
        diagram = parse_zx(WIRE)
        assert diagram.n_inputs == 1
        assert diagram.n_outputs == 1
        assert diagram.interior() == []

    def test_parse_phase(self):
        diagram = parse_zx("node 0 in 0\nnode 1 Z phase 5\nnode 2 out 0\nedge 0 1\nedge 1 2")
        assert diagram.phase(1) == 1

    def test_parallel_edges(self):
        diagram = parse_zx("node 0 Z\nnode 1 X\nedge 0 1\nedge 0 1")
        assert diagram.edge_count(0, 1) == 2

    def test_duplicate_vertex(self):
        with pytest.raises(ZxFormatError):
            parse_zx("node 0 Z\nnode 0 X")

    def test_undeclared_vertex(self):
        with pytest.raises(ZxFormatError):
            parse_zx("node 0 Z\nedge 0 1")

    def test_hbox_has_no_phase(self):
        with pytest.raises(ZxFormatError):
            parse_zx("node 0 H phase 1")

    def test_boundary_needs_index(self):
        with pytest.raises(ZxFormatError):
            parse_zx("node 0 in")

    def test_garbage_line(self):
        with pytest.raises(ZxFormatError) as excinfo:
            parse_zx("node 0 Z\nspider 1")
        assert excinfo.value.line == 2

    def test_print_round_trip(self):
        diagram = circuit_to_zx(parse_circuit("input a b\ncnot a b\nrz a 3\noutput a b"))
        assert zx_iso(parse_zx(print_zx(diagram)), diagram)


class TestNormalize:
    """正規化のテスト"""

    def test_self_loops_removed(self):
        diagram = zx_normalize(parse_zx("node 0 Z\nedge 0 0\nedge 0 0"))
        assert diagram.edge_count(0, 0) == 0

    def test_boundary_degree(self):
        with pytest.raises(NormalizationError):
            zx_normalize(parse_zx("node 0 in 0\nnode 1 Z\nnode 2 Z\nedge 0 1\nedge 0 2"))

    def test_hbox_degree(self):
        with pytest.raises(NormalizationError):
            zx_normalize(parse_zx("node 0 in 0\nnode 1 H\nedge 0 1"))

    def test_idempotent_with_injected_self_loops(self):
        """自己ループを足した図の正規化は冪等で、元の図と同型・同じ行列"""
        rng = np.random.default_rng(17)
        for _ in range(500):
            base = random_diagram(rng, self_loops=0)
            graph = nx.MultiGraph(base.graph)
            spiders = sorted(v for v in base.vertices() if base.kind(v) in SPIDER_KINDS)
            if spiders:
                for _ in range(int(rng.integers(1, 4))):
                    vertex = spiders[int(rng.integers(0, len(spiders)))]
                    graph.add_edge(vertex, vertex)
            looped = ZxDiagram(graph)
            once = zx_normalize(looped)
            assert zx_iso(zx_normalize(once), once)
            assert zx_iso(once, base)
            assert zx_to_matrix(once) == zx_to_matrix(base)


class TestZxIso:
    """同型判定のテスト"""

    def test_relabelled_vertices(self):
        first = parse_zx("node 0 in 0\nnode 1 X\nnode 2 out 0\nedge 0 1\nedge 1 2")
        second = parse_zx("node 7 out 0\nnode 3 X\nnode 9 in 0\nedge 9 3\nedge 3 7")
        assert zx_iso(first, second)

    def test_phase_matters(self):
        first = parse_zx("node 0 in 0\nnode 1 X\nnode 2 out 0\nedge 0 1\nedge 1 2")
        second = parse_zx("node 0 in 0\nnode 1 X phase 2\nnode 2 out 0\nedge 0 1\nedge 1 2")
        assert not zx_iso(first, second)

    def test_boundary_index_matters(self):
        """出力番号の入れ替えは同型ではない"""
        builder = ZxBuilder()
        i, o0, o1 = builder.input(0), builder.output(0), builder.output(1)
        z, x = builder.z(), builder.x()
        builder.chain(i, z, o0)
        builder.edge(z, x)
        builder.edge(x, o1)
        first = builder.build()

        builder = ZxBuilder()
        i, o0, o1 = builder.input(0), builder.output(0), builder.output(1)
        z, x = builder.z(), builder.x()
        builder.chain(i, z, o1)
        builder.edge(z, x)
        builder.edge(x, o0)
        assert not zx_iso(first, builder.build())

    def test_multiplicity_matters(self):
        single = parse_zx("node 0 Z\nnode 1 X\nedge 0 1")
        double = parse_zx("node 0 Z\nnode 1 X\nedge 0 1\nedge 0 1")
        assert not zx_iso(single, double)


class TestZxSemantics:
    """回路からの翻訳と行列のテスト"""

    def test_wire_is_identity(self):
        assert zx_to_matrix(parse_zx(WIRE)) == mat_identity(1)

    def test_cnot_image_is_two_spiders(self):
        diagram = circuit_to_zx(parse_circuit("input a b\ncnot a b\noutput a b"))
        kinds = sorted(diagram.kind(v) for v in diagram.interior())
        assert kinds == ["X", "Z"]

    def test_swap_has_no_vertex(self):
        diagram = circuit_to_zx(parse_circuit("input a b\nswap a b\noutput a b"))
        assert diagram.interior() == []

    @pytest.mark.parametrize("text", [
        "input a b\ncnot a b\noutput a b",
        "input a\nh a\nrz a 1\nrx a 3\noutput a",
        "input a\nprepplus b\nprep0 c\ncnot b c\ncnot a b\npostplus a\npost0 b\noutput c",
        "input a b\nswap a b\ncnot b a\noutput a b",
    ])
    def test_translation_preserves_meaning(self, text):
        circuit = parse_circuit(text)
        verdict = mat_proportional(zx_to_matrix(circuit_to_zx(circuit)), circuit_to_matrix(circuit))
        assert verdict.equivalent

    def test_random_circuits_translate_soundly(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            circuit = random_circuit(rng, max_wires=4, max_gates=12)
            verdict = mat_proportional(zx_to_matrix(circuit_to_zx(circuit)), circuit_to_matrix(circuit))
            assert verdict.equivalent

    def test_self_loop_on_plain_spider_is_harmless(self):
        """位相0スパイダーの自己ループは正規化で消え、意味も変わらない"""
        looped = parse_zx("node 0 in 0\nnode 1 Z\nnode 2 out 0\nedge 0 1\nedge 1 2\nedge 1 1")
        plain = parse_zx("node 0 in 0\nnode 1 Z\nnode 2 out 0\nedge 0 1\nedge 1 2")
        assert zx_iso(zx_normalize(looped), plain)

    def test_colour_change_identity(self):
        """H-Z-H は X と比例"""
        with_h = parse_zx(
            "node 0 in 0\nnode 1 H\nnode 2 Z\nnode 3 H\nnode 4 out 0\n"
            "edge 0 1\nedge 1 2\nedge 2 3\nedge 3 4"
        )
        red = parse_zx("node 0 in 0\nnode 1 X\nnode 2 out 0\nedge 0 1\nedge 1 2")
        verdict = mat_proportional(zx_to_matrix(with_h), zx_to_matrix(red))
        assert verdict.kind in (VerdictKind.EQUAL, VerdictKind.PROPORTIONAL)

    def test_rank_limit(self):
        builder = ZxBuilder()
        spider = builder.z()
        for j in range(4):
            builder.edge(spider, builder.output(j))
        with pytest.raises(SizeOverflowError):
            zx_to_matrix(builder.build(), max_rank=3)

    def test_random_diagram_normalizes(self):
        diagram = zx_normalize(random_diagram(np.random.default_rng(3)))
        assert all(diagram.edge_count(v, v) == 0 for v in diagram.interior())

    def test_contraction_order_does_not_matter(self):
        """縮約順序を変えても行列は同じ"""
        rng = np.random.default_rng(5)
        for _ in range(100):
            diagram = circuit_to_zx(random_circuit(rng, max_wires=3, max_gates=6))
            assert zx_to_matrix(diagram, strategy="sequential") == zx_to_matrix(diagram)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            zx_to_matrix(parse_zx(WIRE), strategy="random")
