"""
ZX 図
スパイダー・Hボックス・境界頂点からなる開いた多重グラフと、回路からの翻訳・厳密評価
"""
import logging
import re
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np

from app.circuit import Circuit, random_circuit
from app.contraction import LabeledTensor, contract_network
from app.exact import CliffordScalar, ExactMatrix, object_array
from app.exceptions import NormalizationError, SizeOverflowError, ZxFormatError
from app.models import GateKind, ZxKind

logger = logging.getLogger(__name__)

SPIDER_KINDS = (ZxKind.Z.value, ZxKind.X.value)
BOUNDARY_KINDS = (ZxKind.IN.value, ZxKind.OUT.value)


class ZxDiagram:
    """
    ZX 図（構築後は変更不可）

    頂点属性: kind（Z / X / H / in / out）, phase（mod 4）, index（境界のみ）
    平行辺と自己ループを許す。次数の不変条件は zx_normalize で検査する。
    """

    __slots__ = ("_graph", "_inputs", "_outputs")

    def __init__(self, graph: nx.MultiGraph):
        graph = nx.MultiGraph(graph)
        inputs: Dict[int, int] = {}
        outputs: Dict[int, int] = {}
        for vertex, data in graph.nodes(data=True):
            kind = data.get("kind")
            if kind not in SPIDER_KINDS + BOUNDARY_KINDS + (ZxKind.H.value,):
                raise ZxFormatError(f"vertex {vertex} has unknown kind {kind!r}")
            data["phase"] = data.get("phase", 0) % 4 if kind in SPIDER_KINDS else 0
            data.setdefault("index", None)
            if kind == ZxKind.IN.value:
                if data["index"] in inputs:
                    raise ZxFormatError(f"duplicate input index {data['index']}")
                inputs[data["index"]] = vertex
            elif kind == ZxKind.OUT.value:
                if data["index"] in outputs:
                    raise ZxFormatError(f"duplicate output index {data['index']}")
                outputs[data["index"]] = vertex
        if sorted(inputs) != list(range(len(inputs))):
            raise ZxFormatError(f"input indices are not contiguous: {sorted(inputs)}")
        if sorted(outputs) != list(range(len(outputs))):
            raise ZxFormatError(f"output indices are not contiguous: {sorted(outputs)}")
        self._inputs = [inputs[i] for i in range(len(inputs))]
        self._outputs = [outputs[i] for i in range(len(outputs))]
        self._graph = nx.freeze(graph)

    @property
    def graph(self) -> nx.MultiGraph:
        return self._graph

    @property
    def inputs(self) -> List[int]:
        return list(self._inputs)

    @property
    def outputs(self) -> List[int]:
        return list(self._outputs)

    @property
    def n_inputs(self) -> int:
        return len(self._inputs)

    @property
    def n_outputs(self) -> int:
        return len(self._outputs)

    def vertices(self) -> List[int]:
        return sorted(self._graph.nodes)

    def interior(self) -> List[int]:
        return sorted(v for v, d in self._graph.nodes(data=True) if d["kind"] not in BOUNDARY_KINDS)

    def kind(self, vertex: int) -> str:
        return self._graph.nodes[vertex]["kind"]

    def phase(self, vertex: int) -> int:
        return self._graph.nodes[vertex]["phase"]

    def index(self, vertex: int) -> Optional[int]:
        return self._graph.nodes[vertex]["index"]

    def is_boundary(self, vertex: int) -> bool:
        return self.kind(vertex) in BOUNDARY_KINDS

    def degree(self, vertex: int) -> int:
        """自己ループは2と数える"""
        return self._graph.degree(vertex)

    def edge_count(self, u: int, v: int) -> int:
        return self._graph.number_of_edges(u, v)

    def neighbors(self, vertex: int) -> List[int]:
        return sorted(set(self._graph.neighbors(vertex)))

    def edges(self) -> List[Tuple[int, int]]:
        """無向辺を (小, 大) で整列して返す（平行辺は繰り返す）"""
        return sorted((min(u, v), max(u, v)) for u, v in self._graph.edges())

    def fresh_id(self) -> int:
        return max(self._graph.nodes, default=-1) + 1

    def __len__(self) -> int:
        return self._graph.number_of_nodes()

    def __repr__(self) -> str:
        return f"ZxDiagram({self.n_inputs}->{self.n_outputs}, {len(self.interior())} interior)"

    def __str__(self) -> str:
        return print_zx(self)


class ZxBuilder:
    """ZX 図を順に組み立てる（頂点IDは追加順）"""

    def __init__(self):
        self.graph = nx.MultiGraph()

    def _add(self, kind: str, phase: int = 0, index: Optional[int] = None) -> int:
        vertex = self.graph.number_of_nodes()
        self.graph.add_node(vertex, kind=kind, phase=phase % 4, index=index)
        return vertex

    def input(self, index: int) -> int:
        return self._add(ZxKind.IN.value, index=index)

    def output(self, index: int) -> int:
        return self._add(ZxKind.OUT.value, index=index)

    def z(self, phase: int = 0) -> int:
        return self._add(ZxKind.Z.value, phase)

    def x(self, phase: int = 0) -> int:
        return self._add(ZxKind.X.value, phase)

    def spider(self, colour: str, phase: int = 0) -> int:
        return self._add(colour, phase)

    def hbox(self) -> int:
        return self._add(ZxKind.H.value)

    def edge(self, u: int, v: int, count: int = 1) -> None:
        for _ in range(count):
            self.graph.add_edge(u, v)

    def chain(self, *vertices: int) -> None:
        for u, v in zip(vertices, vertices[1:]):
            self.edge(u, v)

    def build(self) -> ZxDiagram:
        return ZxDiagram(self.graph)


def other_colour(colour: str) -> str:
    return ZxKind.X.value if colour == ZxKind.Z.value else ZxKind.Z.value


# =========================
# テキスト形式
# =========================

_NODE = re.compile(r"node\s+(-?\d+)\s+(Z|X|H|in|out)(?:\s+(-?\d+))?(?:\s+phase\s+(-?\d+))?\s*\Z")
_EDGE = re.compile(r"edge\s+(-?\d+)\s+(-?\d+)\s*\Z")


def parse_zx(text: str) -> ZxDiagram:
    """
    ZX テキスト形式をパースする

      node <id> <Z|X|H|in <idx>|out <idx>> [phase <k>]
      edge <id> <id>    （平行辺は行を繰り返す）
    """
    graph = nx.MultiGraph()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        node = _NODE.match(line)
        if node:
            vertex, kind, index, phase = node.groups()
            vertex = int(vertex)
            if vertex in graph:
                raise ZxFormatError(f"vertex {vertex} declared twice", line_no)
            if kind in BOUNDARY_KINDS:
                if index is None or phase is not None:
                    raise ZxFormatError(f"'{kind}' needs an index and takes no phase", line_no)
                graph.add_node(vertex, kind=kind, phase=0, index=int(index))
            else:
                if index is not None:
                    raise ZxFormatError(f"'{kind}' takes no index", line_no)
                if kind == ZxKind.H.value and phase is not None:
                    raise ZxFormatError("H-boxes carry no phase", line_no)
                graph.add_node(vertex, kind=kind, phase=int(phase or 0) % 4, index=None)
            continue
        edge = _EDGE.match(line)
        if edge:
            u, v = int(edge.group(1)), int(edge.group(2))
            for endpoint in (u, v):
                if endpoint not in graph:
                    raise ZxFormatError(f"edge refers to undeclared vertex {endpoint}", line_no)
            graph.add_edge(u, v)
            continue
        raise ZxFormatError(f"cannot parse '{line}'", line_no)
    try:
        return ZxDiagram(graph)
    except ZxFormatError:
        raise
    except Exception as e:
        raise ZxFormatError(str(e))


def print_zx(diagram: ZxDiagram) -> str:
    lines = []
    for vertex in diagram.vertices():
        kind = diagram.kind(vertex)
        if kind in BOUNDARY_KINDS:
            lines.append(f"node {vertex} {kind} {diagram.index(vertex)}")
        elif kind in SPIDER_KINDS and diagram.phase(vertex):
            lines.append(f"node {vertex} {kind} phase {diagram.phase(vertex)}")
        else:
            lines.append(f"node {vertex} {kind}")
    for u, v in diagram.edges():
        lines.append(f"edge {u} {v}")
    return "\n".join(lines)


# =========================
# 正規化・同型
# =========================

def zx_normalize(diagram: ZxDiagram) -> ZxDiagram:
    """次数の不変条件を検査し、スパイダーの自己ループを取り除く"""
    graph = nx.MultiGraph(diagram.graph)
    for vertex in diagram.vertices():
        kind = diagram.kind(vertex)
        degree = diagram.degree(vertex)
        if kind in BOUNDARY_KINDS and degree != 1:
            raise NormalizationError(f"boundary vertex {vertex} has degree {degree}")
        if kind == ZxKind.H.value and degree != 2:
            raise NormalizationError(f"H-box {vertex} has degree {degree}")
        if kind in SPIDER_KINDS:
            loops = graph.number_of_edges(vertex, vertex)
            if loops:
                logger.debug(f"removing {loops} self-loop(s) on vertex {vertex}")
                graph.remove_edges_from([(vertex, vertex)] * loops)
    return ZxDiagram(graph)


def _vertex_match(a: dict, b: dict) -> bool:
    return a["kind"] == b["kind"] and a["phase"] == b["phase"] and a["index"] == b["index"]


def _multiplicity_match(a: dict, b: dict) -> bool:
    return len(a) == len(b)


def zx_iso(first: ZxDiagram, second: ZxDiagram) -> bool:
    """境界番号・種別・位相・辺の多重度を保つ多重グラフ同型"""
    if (first.n_inputs, first.n_outputs, len(first)) != (second.n_inputs, second.n_outputs, len(second)):
        return False
    if first.graph.number_of_edges() != second.graph.number_of_edges():
        return False
    return nx.is_isomorphic(
        first.graph, second.graph, node_match=_vertex_match, edge_match=_multiplicity_match
    )


# =========================
# 回路からの翻訳
# =========================

_GATE_IMAGE = {
    GateKind.RZ.value: ZxKind.Z.value,
    GateKind.RX.value: ZxKind.X.value,
    GateKind.H.value: ZxKind.H.value,
    GateKind.PREP0.value: ZxKind.X.value,
    GateKind.POST0.value: ZxKind.X.value,
    GateKind.PREPPLUS.value: ZxKind.Z.value,
    GateKind.POSTPLUS.value: ZxKind.Z.value,
}


def circuit_to_zx_with_provenance(circuit: Circuit) -> Tuple[ZxDiagram, Dict[int, Tuple[int, ...]]]:
    """
    ゲートごとの翻訳と、回路ノード → ZX 頂点の対応表

    CNOT は制御側 Z(0) と標的側 X(0) の組、SWAP は配線の交差としてたどる。
    """
    graph = nx.MultiGraph()
    provenance: Dict[int, Tuple[int, ...]] = {}

    def add(kind: str, phase: int = 0, index: Optional[int] = None) -> int:
        vertex = graph.number_of_nodes()
        graph.add_node(vertex, kind=kind, phase=phase % 4, index=index)
        return vertex

    for node in sorted(circuit.graph.nodes):
        kind = circuit.kind(node)
        if kind == GateKind.INPUT.value:
            provenance[node] = (add(ZxKind.IN.value, index=circuit.graph.nodes[node]["index"]),)
        elif kind == GateKind.OUTPUT.value:
            provenance[node] = (add(ZxKind.OUT.value, index=circuit.graph.nodes[node]["index"]),)
        elif kind == GateKind.CNOT.value:
            control = add(ZxKind.Z.value)
            target = add(ZxKind.X.value)
            graph.add_edge(control, target)
            provenance[node] = (control, target)
        elif kind == GateKind.SWAP.value:
            provenance[node] = ()
        else:
            phase = circuit.phase(node) if kind in (GateKind.RZ.value, GateKind.RX.value) else 0
            provenance[node] = (add(_GATE_IMAGE[kind], phase),)

    def endpoint(node: int, port: int) -> int:
        vertices = provenance[node]
        return vertices[port] if len(vertices) == 2 else vertices[0]

    for (src_node, src_port), (dst_node, dst_port) in circuit.segments():
        if circuit.kind(dst_node) == GateKind.SWAP.value:
            continue
        while circuit.kind(src_node) == GateKind.SWAP.value:
            src_node, src_port = circuit.producer(src_node, 1 - src_port)
        graph.add_edge(endpoint(src_node, src_port), endpoint(dst_node, dst_port))

    return ZxDiagram(graph), provenance


def circuit_to_zx(circuit: Circuit) -> ZxDiagram:
    diagram, _ = circuit_to_zx_with_provenance(circuit)
    return diagram


# =========================
# 厳密評価
# =========================

@lru_cache(maxsize=None)
def _hadamard_normalized() -> np.ndarray:
    half = CliffordScalar.inv_sqrt2()
    return object_array([half, half, half, -half], (2, 2))


@lru_cache(maxsize=None)
def spider_tensor(colour: str, legs: int, phase: int) -> np.ndarray:
    """Z: 全0 で 1、全1 で e^{ikπ/2}。X は各脚を正規化 H で挟んだ Z"""
    rotation = CliffordScalar.omega_power(2 * phase)
    if legs == 0:
        return object_array([rotation + 1], ())
    values = [0] * (2 ** legs)
    values[0] = 1
    values[-1] = rotation
    tensor = object_array(values, (2,) * legs)
    if colour == ZxKind.X.value:
        hadamard = _hadamard_normalized()
        for axis in range(legs):
            tensor = np.moveaxis(np.tensordot(hadamard, tensor, axes=([1], [axis])), 0, axis)
    tensor = np.asarray(tensor, dtype=object)
    tensor.flags.writeable = False
    return tensor


@lru_cache(maxsize=None)
def _hbox_tensor() -> np.ndarray:
    return object_array([1, 1, 1, -1], (2, 2))


@lru_cache(maxsize=None)
def _wire_tensor() -> np.ndarray:
    return object_array([1, 0, 0, 1], (2, 2))


def zx_tensors(diagram: ZxDiagram) -> Tuple[List[LabeledTensor], List[Tuple[str, int]]]:
    """頂点ごとのラベル付きテンソルと、開いたラベルの順序（出力…, 入力…）"""
    ends: Dict[int, List[Tuple[str, int]]] = {v: [] for v in diagram.vertices()}
    for number, (u, v) in enumerate(diagram.edges()):
        ends[u].append(("e", number))
        ends[v].append(("e", number))

    tensors: List[LabeledTensor] = []
    for vertex in diagram.vertices():
        kind = diagram.kind(vertex)
        labels = ends[vertex]
        if kind in BOUNDARY_KINDS:
            tensors.append((_wire_tensor(), [("b", vertex)] + labels))
        elif kind == ZxKind.H.value:
            tensors.append((_hbox_tensor(), labels))
        else:
            tensors.append((spider_tensor(kind, len(labels), diagram.phase(vertex)), labels))
    open_order = [("b", v) for v in diagram.outputs] + [("b", v) for v in diagram.inputs]
    return tensors, open_order


def zx_to_matrix(diagram: ZxDiagram, strategy: str = "greedy", max_rank: int = 12) -> ExactMatrix:
    """2^|出力| × 2^|入力| の厳密行列（閉じた図は 1×1）"""
    legs = diagram.n_inputs + diagram.n_outputs
    if legs > max_rank:
        raise SizeOverflowError(f"{legs} boundary legs exceed the limit {max_rank}")
    tensors, open_order = zx_tensors(diagram)
    data = contract_network(tensors, open_order, max_rank, strategy=strategy)
    return ExactMatrix.from_tensor(data, diagram.n_outputs, diagram.n_inputs)


# =========================
# ランダム図
# =========================

def random_diagram(
    rng: np.random.Generator,
    max_wires: int = 3,
    max_gates: int = 8,
    extra_edges: int = 2,
    self_loops: int = 2,
) -> ZxDiagram:
    """ランダム回路の像に、スパイダー間の余分な辺と自己ループを加えた図"""
    graph = nx.MultiGraph(circuit_to_zx(random_circuit(rng, max_wires, max_gates)).graph)
    spiders = sorted(v for v, d in graph.nodes(data=True) if d["kind"] in SPIDER_KINDS)
    if spiders:
        for _ in range(int(rng.integers(0, extra_edges + 1))):
            u, v = (spiders[int(i)] for i in rng.integers(0, len(spiders), size=2))
            if u != v:
                graph.add_edge(u, v)
        for _ in range(int(rng.integers(0, self_loops + 1))):
            vertex = spiders[int(rng.integers(0, len(spiders)))]
            graph.add_edge(vertex, vertex)
    return ZxDiagram(graph)


def diagram_from_edges(
    vertices: Iterable[Tuple[int, str, int, Optional[int]]],
    edges: Iterable[Tuple[int, int]],
) -> ZxDiagram:
    """(id, kind, phase, index) と辺のリストから図を作る"""
    graph = nx.MultiGraph()
    for vertex, kind, phase, index in vertices:
        graph.add_node(vertex, kind=kind, phase=phase, index=index)
    graph.add_edges_from(edges)
    return ZxDiagram(graph)
