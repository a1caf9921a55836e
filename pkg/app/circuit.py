"""
回路 IR
安定化子回路の DAG 表現・テキスト形式のパース/出力・厳密な行列意味論

ノード属性: kind（GateKind の値）, phase（1/4 回転単位、mod 4）, index（入出力のみ）
辺属性: src_port, dst_port（CNOT は 0 = 制御, 1 = 標的）
"""
import logging
import re
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.contraction import LabeledTensor, contract_pair, result_rank, scalar_tensor, transpose_to
from app.exact import CliffordScalar, ExactMatrix, ONE, ZERO, object_array
from app.exceptions import (
    ArityError,
    CircuitSyntaxError,
    DuplicateLabelError,
    LivenessError,
)
from app.models import GateKind

logger = logging.getLogger(__name__)

EXACT_MAX_QUBITS = 12

Port = Tuple[int, int]

# (入力ポート数, 出力ポート数)
PORTS: Dict[str, Tuple[int, int]] = {
    GateKind.INPUT.value: (0, 1),
    GateKind.OUTPUT.value: (1, 0),
    GateKind.CNOT.value: (2, 2),
    GateKind.SWAP.value: (2, 2),
    GateKind.PREP0.value: (0, 1),
    GateKind.PREPPLUS.value: (0, 1),
    GateKind.POST0.value: (1, 0),
    GateKind.POSTPLUS.value: (1, 0),
    GateKind.RZ.value: (1, 1),
    GateKind.RX.value: (1, 1),
    GateKind.H.value: (1, 1),
}

BOUNDARY_KINDS = (GateKind.INPUT.value, GateKind.OUTPUT.value)
PHASED_KINDS = (GateKind.RZ.value, GateKind.RX.value)


class Circuit:
    """
    検証済みの回路 DAG（構築後は変更不可）

    各ゲートの全ポートにちょうど1本の辺があり、入出力番号は 0 から連続し、非巡回であること。
    """

    __slots__ = ("_graph", "_out", "_in", "_inputs", "_outputs")

    def __init__(self, graph: nx.MultiDiGraph):
        graph = nx.MultiDiGraph(graph)
        self._out: Dict[Port, Port] = {}
        self._in: Dict[Port, Port] = {}
        for u, v, data in graph.edges(data=True):
            src = (u, data["src_port"])
            dst = (v, data["dst_port"])
            if src in self._out:
                raise LivenessError(f"port {src} drives two wire segments")
            if dst in self._in:
                raise LivenessError(f"port {dst} is fed by two wire segments")
            self._out[src] = dst
            self._in[dst] = src

        inputs: Dict[int, int] = {}
        outputs: Dict[int, int] = {}
        for node, data in graph.nodes(data=True):
            kind = data.get("kind")
            if kind not in PORTS:
                raise LivenessError(f"node {node} has unknown kind {kind!r}")
            data.setdefault("phase", 0)
            data.setdefault("index", None)
            n_in, n_out = PORTS[kind]
            for port in range(n_in):
                if (node, port) not in self._in:
                    raise LivenessError(f"{kind} node {node} has no wire on input port {port}")
            for port in range(n_out):
                if (node, port) not in self._out:
                    raise LivenessError(f"{kind} node {node} has no wire on output port {port}")
            if kind == GateKind.INPUT.value:
                inputs[data["index"]] = node
            elif kind == GateKind.OUTPUT.value:
                outputs[data["index"]] = node
        for ports, side in ((self._out, 1), (self._in, 0)):
            for node, port in ports:
                kind = graph.nodes[node]["kind"]
                if port >= PORTS[kind][side]:
                    raise LivenessError(f"{kind} node {node} has no port {port}")
        if sorted(inputs) != list(range(len(inputs))):
            raise ArityError(f"input indices are not contiguous: {sorted(inputs)}")
        if sorted(outputs) != list(range(len(outputs))):
            raise ArityError(f"output indices are not contiguous: {sorted(outputs)}")
        if not nx.is_directed_acyclic_graph(graph):
            raise LivenessError("circuit graph contains a cycle")

        self._inputs = [inputs[i] for i in range(len(inputs))]
        self._outputs = [outputs[i] for i in range(len(outputs))]
        self._graph = nx.freeze(graph)

    # --- 参照 ---

    @property
    def graph(self) -> nx.MultiDiGraph:
        return self._graph

    @property
    def n_inputs(self) -> int:
        return len(self._inputs)

    @property
    def n_outputs(self) -> int:
        return len(self._outputs)

    @property
    def input_nodes(self) -> List[int]:
        return list(self._inputs)

    @property
    def output_nodes(self) -> List[int]:
        return list(self._outputs)

    def kind(self, node: int) -> str:
        return self._graph.nodes[node]["kind"]

    def phase(self, node: int) -> int:
        return self._graph.nodes[node]["phase"]

    def gate_nodes(self) -> List[int]:
        return sorted(n for n, d in self._graph.nodes(data=True) if d["kind"] not in BOUNDARY_KINDS)

    def consumer(self, node: int, port: int) -> Port:
        """出力ポートの先 (ノード, 入力ポート)"""
        return self._out[(node, port)]

    def producer(self, node: int, port: int) -> Port:
        """入力ポートの元 (ノード, 出力ポート)"""
        return self._in[(node, port)]

    def segments(self) -> Iterator[Tuple[Port, Port]]:
        """全ワイヤ区間 (生成側ポート, 消費側ポート) を生成側の順に"""
        for src in sorted(self._out):
            yield src, self._out[src]

    def topological_order(self) -> List[int]:
        return list(nx.lexicographical_topological_sort(self._graph))

    def fresh_id(self) -> int:
        return max(self._graph.nodes, default=-1) + 1

    def __len__(self) -> int:
        return len(self.gate_nodes())

    def __repr__(self) -> str:
        return f"Circuit({self.n_inputs}->{self.n_outputs}, {len(self)} gates)"

    def __str__(self) -> str:
        return print_circuit(self)


# =========================
# パース
# =========================

_TOKEN = re.compile(r"\S+")
_LABEL = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_ONE_WIRE = (
    GateKind.PREP0.value,
    GateKind.PREPPLUS.value,
    GateKind.POST0.value,
    GateKind.POSTPLUS.value,
    GateKind.H.value,
)


class _CircuitBuilder:
    """テキスト命令列から DAG を組み立てる"""

    def __init__(self):
        self.graph = nx.MultiDiGraph()
        self.live: Dict[str, Port] = {}
        self.seen: set = set()
        self.inputs_declared = False
        self.outputs_declared = False

    def add_node(self, kind: str, phase: int = 0, index: Optional[int] = None) -> int:
        node = self.graph.number_of_nodes()
        self.graph.add_node(node, kind=kind, phase=phase % 4, index=index)
        return node

    def create(self, label: str, node: int, port: int, line: int) -> None:
        if label in self.seen:
            raise DuplicateLabelError(f"wire '{label}' is created twice", line)
        self.seen.add(label)
        self.live[label] = (node, port)

    def consume(self, label: str, node: int, port: int, line: int) -> None:
        if label not in self.live:
            if label in self.seen:
                raise LivenessError(f"wire '{label}' used after it was destroyed", line)
            raise LivenessError(f"wire '{label}' used before it was created", line)
        src_node, src_port = self.live.pop(label)
        self.graph.add_edge(src_node, node, src_port=src_port, dst_port=port)

    def finish(self) -> Circuit:
        if self.live:
            dangling = ", ".join(sorted(self.live))
            raise LivenessError(f"wire(s) never destroyed: {dangling}")
        return Circuit(self.graph)


def _check_label(token: str, line: int, column: int) -> str:
    if not _LABEL.match(token):
        raise CircuitSyntaxError(f"invalid wire label '{token}'", line, column)
    return token


def parse_circuit(text: str) -> Circuit:
    """
    回路テキストをパースして検証済みの Circuit を返す

    1行1命令、'#' 以降はコメント:
      input <labels…> / output <labels…>
      cnot <c> <t> / swap <a> <b>
      prep0 <w> / prepplus <w> / post0 <w> / postplus <w>
      rz <w> <k> / rx <w> <k> / h <w>
    """
    builder = _CircuitBuilder()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        code = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in _TOKEN.finditer(code)]
        if not tokens:
            continue
        op, op_col = tokens[0]
        args = tokens[1:]

        def expect(count: int) -> None:
            if len(args) != count:
                column = args[count][1] if len(args) > count else len(code.rstrip()) + 1
                raise CircuitSyntaxError(f"'{op}' expects {count} argument(s), got {len(args)}", line_no, column)

        if op == GateKind.INPUT.value:
            if builder.inputs_declared:
                raise CircuitSyntaxError("duplicate 'input' line", line_no, op_col)
            builder.inputs_declared = True
            for index, (token, col) in enumerate(args):
                label = _check_label(token, line_no, col)
                node = builder.add_node(GateKind.INPUT.value, index=index)
                builder.create(label, node, 0, line_no)

        elif op == GateKind.OUTPUT.value:
            if builder.outputs_declared:
                raise CircuitSyntaxError("duplicate 'output' line", line_no, op_col)
            builder.outputs_declared = True
            for index, (token, col) in enumerate(args):
                label = _check_label(token, line_no, col)
                node = builder.add_node(GateKind.OUTPUT.value, index=index)
                builder.consume(label, node, 0, line_no)

        elif op in (GateKind.CNOT.value, GateKind.SWAP.value):
            expect(2)
            first = _check_label(args[0][0], line_no, args[0][1])
            second = _check_label(args[1][0], line_no, args[1][1])
            if first == second:
                raise CircuitSyntaxError(f"'{op}' needs two distinct wires", line_no, args[1][1])
            node = builder.add_node(op)
            builder.consume(first, node, 0, line_no)
            builder.consume(second, node, 1, line_no)
            builder.live[first] = (node, 0)
            builder.live[second] = (node, 1)

        elif op in (GateKind.RZ.value, GateKind.RX.value):
            expect(2)
            label = _check_label(args[0][0], line_no, args[0][1])
            token, col = args[1]
            try:
                phase = int(token)
            except ValueError:
                raise CircuitSyntaxError(f"phase must be an integer, got '{token}'", line_no, col)
            node = builder.add_node(op, phase=phase)
            builder.consume(label, node, 0, line_no)
            builder.live[label] = (node, 0)

        elif op in _ONE_WIRE:
            expect(1)
            label = _check_label(args[0][0], line_no, args[0][1])
            node = builder.add_node(op)
            if op in (GateKind.PREP0.value, GateKind.PREPPLUS.value):
                builder.create(label, node, 0, line_no)
            else:
                builder.consume(label, node, 0, line_no)
                if op == GateKind.H.value:
                    builder.live[label] = (node, 0)

        else:
            raise CircuitSyntaxError(f"unknown instruction '{op}'", line_no, op_col)

    return builder.finish()


# =========================
# 出力
# =========================

def _label_name(i: int) -> str:
    return chr(ord("a") + i) if i < 26 else f"q{i}"


def print_circuit(circuit: Circuit) -> str:
    """正規のラベル付けでテキスト化する（入力が a, b, … 、準備はトポロジカル順に続く）"""
    names: Dict[Port, str] = {}
    counter = 0
    lines: List[str] = []

    def fresh() -> str:
        nonlocal counter
        name = _label_name(counter)
        counter += 1
        return name

    input_labels = []
    for node in circuit.input_nodes:
        name = fresh()
        names[(node, 0)] = name
        input_labels.append(name)
    if input_labels:
        lines.append("input " + " ".join(input_labels))

    for node in circuit.topological_order():
        kind = circuit.kind(node)
        if kind in BOUNDARY_KINDS:
            continue
        n_in, n_out = PORTS[kind]
        incoming = [names[circuit.producer(node, port)] for port in range(n_in)]
        if kind in (GateKind.PREP0.value, GateKind.PREPPLUS.value):
            name = fresh()
            names[(node, 0)] = name
            lines.append(f"{kind} {name}")
            continue
        for port in range(n_out):
            names[(node, port)] = incoming[port]
        if kind in PHASED_KINDS:
            lines.append(f"{kind} {incoming[0]} {circuit.phase(node)}")
        else:
            lines.append(f"{kind} " + " ".join(incoming))

    output_labels = [names[circuit.producer(node, 0)] for node in circuit.output_nodes]
    if output_labels:
        lines.append("output " + " ".join(output_labels))
    return "\n".join(lines)


# =========================
# 構造比較・合成
# =========================

def _node_match(a: dict, b: dict) -> bool:
    return a["kind"] == b["kind"] and a["phase"] == b["phase"] and a["index"] == b["index"]


def _edge_match(a: dict, b: dict) -> bool:
    def ports(edges: dict) -> List[Tuple[int, int]]:
        return sorted((d["src_port"], d["dst_port"]) for d in edges.values())
    return ports(a) == ports(b)


def structurally_equal(first: Circuit, second: Circuit) -> bool:
    """番号付き入出力・ゲート種別・位相・ポートを保つ DAG 同型"""
    if (first.n_inputs, first.n_outputs, len(first)) != (second.n_inputs, second.n_outputs, len(second)):
        return False
    return nx.is_isomorphic(first.graph, second.graph, node_match=_node_match, edge_match=_edge_match)


def _compact(graph: nx.MultiDiGraph) -> nx.MultiDiGraph:
    mapping = {node: i for i, node in enumerate(sorted(graph.nodes))}
    return nx.relabel_nodes(graph, mapping, copy=True)


def circuit_compose(f: Circuit, g: Circuit) -> Circuit:
    """f の出力を g の入力に順に接続する（行列は matrix(g)·matrix(f)）"""
    if f.n_outputs != g.n_inputs:
        raise ArityError(f"cannot compose: {f.n_outputs} outputs into {g.n_inputs} inputs")
    offset = f.fresh_id()
    graph = nx.MultiDiGraph(f.graph)
    graph.add_nodes_from((node + offset, dict(data)) for node, data in g.graph.nodes(data=True))
    graph.add_edges_from(
        (u + offset, v + offset, dict(data)) for u, v, data in g.graph.edges(data=True)
    )
    for j in range(f.n_outputs):
        out_node = f.output_nodes[j]
        in_node = g.input_nodes[j] + offset
        src = f.producer(out_node, 0)
        dst_node, dst_port = g.consumer(g.input_nodes[j], 0)
        graph.remove_node(out_node)
        graph.remove_node(in_node)
        graph.add_edge(src[0], dst_node + offset, src_port=src[1], dst_port=dst_port)
    return Circuit(_compact(graph))


def circuit_tensor(f: Circuit, g: Circuit) -> Circuit:
    """並列合成（g の入出力番号を f の後ろにずらす）"""
    offset = f.fresh_id()
    graph = nx.MultiDiGraph(f.graph)
    for node, data in g.graph.nodes(data=True):
        data = dict(data)
        if data["kind"] == GateKind.INPUT.value:
            data["index"] += f.n_inputs
        elif data["kind"] == GateKind.OUTPUT.value:
            data["index"] += f.n_outputs
        graph.add_node(node + offset, **data)
    graph.add_edges_from(
        (u + offset, v + offset, dict(data)) for u, v, data in g.graph.edges(data=True)
    )
    return Circuit(_compact(graph))


def identity_circuit(wires: int) -> Circuit:
    labels = " ".join(_label_name(i) for i in range(wires))
    return parse_circuit(f"input {labels}\noutput {labels}" if wires else "")


def inline_h(circuit: Circuit) -> Circuit:
    """H ゲートを rz 1; rx 1; rz 1 に展開する"""
    lines = []
    for line in print_circuit(circuit).splitlines():
        parts = line.split()
        if parts[0] == GateKind.H.value:
            wire = parts[1]
            lines.extend([f"rz {wire} 1", f"rx {wire} 1", f"rz {wire} 1"])
        else:
            lines.append(line)
    return parse_circuit("\n".join(lines))


# =========================
# 行列意味論
# =========================

@lru_cache(maxsize=None)
def gate_tensor(kind: str, phase: int = 0) -> np.ndarray:
    """ゲートのテンソル（軸は 出力ポート…, 入力ポート…）"""
    root2 = CliffordScalar.sqrt2()
    if kind == GateKind.CNOT.value:
        values = [
            int(c_out == c and t_out == t ^ c)
            for c_out in (0, 1) for t_out in (0, 1) for c in (0, 1) for t in (0, 1)
        ]
        return object_array(values, (2, 2, 2, 2))
    if kind == GateKind.SWAP.value:
        values = [
            int(p0_out == p1 and p1_out == p0)
            for p0_out in (0, 1) for p1_out in (0, 1) for p0 in (0, 1) for p1 in (0, 1)
        ]
        return object_array(values, (2, 2, 2, 2))
    if kind in (GateKind.PREP0.value, GateKind.POST0.value):
        return object_array([root2, ZERO], (2,))
    if kind in (GateKind.PREPPLUS.value, GateKind.POSTPLUS.value):
        return object_array([1, 1], (2,))
    if kind == GateKind.H.value:
        return object_array([1, 1, 1, -1], (2, 2))
    if kind == GateKind.RZ.value:
        return object_array(
            [CliffordScalar.omega_power(-phase), 0, 0, CliffordScalar.omega_power(phase)], (2, 2)
        )
    if kind == GateKind.RX.value:
        # Hn·Rz(k)·Hn、Hn = H/√2
        minus = CliffordScalar.omega_power(-phase)
        plus = CliffordScalar.omega_power(phase)
        half = CliffordScalar(1, 0, 0, 0, 2)
        diagonal = (minus + plus) * half
        off = (minus - plus) * half
        return object_array([diagonal, off, off, diagonal], (2, 2))
    raise ValueError(f"no tensor for node kind {kind!r}")


def gate_matrix(kind: str, phase: int = 0) -> ExactMatrix:
    n_in, n_out = PORTS[kind]
    return ExactMatrix.from_tensor(gate_tensor(kind, phase % 4), n_out, n_in)


def circuit_to_matrix(circuit: Circuit, max_qubits: int = EXACT_MAX_QUBITS) -> ExactMatrix:
    """
    回路の厳密行列（2^|out| × 2^|in|）

    ゲートを1つずつ畳み込む。次のゲートは実行可能なもののうち、畳み込み後に開いている
    ワイヤ数が最小のもの（同点はノードID順）。開いたワイヤ数が max_qubits を超えたらエラー。
    """
    if circuit.n_inputs + circuit.n_outputs > max_qubits:
        raise ArityError(
            f"{circuit.n_inputs}+{circuit.n_outputs} boundary wires exceed the limit {max_qubits}"
        )

    tensors: Dict[int, LabeledTensor] = {}
    for node in circuit.gate_nodes():
        kind = circuit.kind(node)
        n_in, n_out = PORTS[kind]
        labels = [(node, port) for port in range(n_out)]
        labels += [circuit.producer(node, port) for port in range(n_in)]
        tensors[node] = (gate_tensor(kind, circuit.phase(node)), labels)

    in_labels = [(node, 0) for node in circuit.input_nodes]
    out_labels: List[object] = []
    passthrough: List[LabeledTensor] = []
    for j, node in enumerate(circuit.output_nodes):
        src = circuit.producer(node, 0)
        if circuit.kind(src[0]) == GateKind.INPUT.value:
            identity = object_array([1, 0, 0, 1], (2, 2))
            passthrough.append((identity, [("through", j), src]))
            out_labels.append(("through", j))
        else:
            out_labels.append(src)

    predecessors = {
        node: {u for u in circuit.graph.predecessors(node) if circuit.kind(u) not in BOUNDARY_KINDS}
        for node in tensors
    }
    done: set = set()
    acc = scalar_tensor(ONE)
    while len(done) < len(tensors):
        ready = [node for node in tensors if node not in done and predecessors[node] <= done]
        node = min(ready, key=lambda n: (result_rank(acc[1], tensors[n][1]), n))
        rank = result_rank(acc[1], tensors[node][1])
        if rank > max_qubits:
            raise ArityError(f"slice with {rank} open wires exceeds the limit {max_qubits}")
        acc = contract_pair(acc, tensors[node])
        done.add(node)
    for tensor in passthrough:
        acc = contract_pair(acc, tensor)

    data = transpose_to(acc, out_labels + in_labels)
    return ExactMatrix.from_tensor(data, circuit.n_outputs, circuit.n_inputs)


# =========================
# ランダム回路
# =========================

def random_circuit(
    rng: np.random.Generator,
    max_wires: int = 4,
    max_gates: int = 12,
    allow_postselection: bool = True,
) -> Circuit:
    """シード付き乱数で妥当な回路を生成する（全シグネチャを使う）"""
    live: List[str] = []
    counter = 0
    lines: List[str] = []

    def fresh() -> str:
        nonlocal counter
        counter += 1
        return f"w{counter}"

    n_inputs = int(rng.integers(0, max_wires + 1))
    for _ in range(n_inputs):
        live.append(fresh())
    if live:
        lines.append("input " + " ".join(live))

    for _ in range(int(rng.integers(0, max_gates + 1))):
        options = []
        if live:
            options += ["rz", "rx", "h"]
            if allow_postselection:
                options += ["post0", "postplus"]
        if len(live) >= 2:
            options += ["cnot", "swap"]
        if len(live) < max_wires:
            options += ["prep0", "prepplus"]
        if not options:
            break
        kind = options[int(rng.integers(0, len(options)))]
        if kind in ("cnot", "swap"):
            i, j = rng.choice(len(live), size=2, replace=False)
            lines.append(f"{kind} {live[int(i)]} {live[int(j)]}")
        elif kind in ("prep0", "prepplus"):
            wire = fresh()
            live.append(wire)
            lines.append(f"{kind} {wire}")
        elif kind in ("post0", "postplus"):
            wire = live.pop(int(rng.integers(0, len(live))))
            lines.append(f"{kind} {wire}")
        elif kind in PHASED_KINDS:
            wire = live[int(rng.integers(0, len(live)))]
            lines.append(f"{kind} {wire} {int(rng.integers(0, 4))}")
        else:
            wire = live[int(rng.integers(0, len(live)))]
            lines.append(f"h {wire}")

    if live:
        order = [live[int(i)] for i in rng.permutation(len(live))]
        lines.append("output " + " ".join(order))
    return parse_circuit("\n".join(lines))


def random_circuit_pair(
    rng: np.random.Generator,
    max_wires: int = 5,
    max_gates: int = 20,
    attempts: int = 1000,
) -> Tuple[Circuit, Circuit]:
    """入出力数の揃ったランダム回路の組（attempts 回で揃わなければ同じ回路を2つ返す）"""
    first = random_circuit(rng, max_wires, max_gates)
    for _ in range(attempts):
        second = random_circuit(rng, max_wires, max_gates)
        if (second.n_inputs, second.n_outputs) == (first.n_inputs, first.n_outputs):
            return first, second
    logger.debug(f"no partner for a {first.n_inputs}->{first.n_outputs} circuit after {attempts} draws")
    return first, first
