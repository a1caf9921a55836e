"""
回路方程式カタログと書き換え
完全な回路方程式系を、凸部分 DAG のマッチ・置換として適用できる規則にしたもの
"""
import itertools
import logging
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, Iterator, List, Optional, Set, Tuple

import networkx as nx
import numpy as np

from app.circuit import (
    BOUNDARY_KINDS,
    PORTS,
    Circuit,
    Port,
    circuit_to_matrix,
    parse_circuit,
    print_circuit,
    structurally_equal,
)
from app.exact import mat_proportional
from app.exceptions import (
    ArityError,
    BindingError,
    CircuitSyntaxError,
    ExtractionError,
    LivenessError,
    NoMatchError,
    RuleParameterError,
    UnknownRuleError,
)
from app.models import (
    CircuitDerivationScript,
    DerivationReport,
    Direction,
    GateKind,
    SpliceSite,
    StepReport,
    StepSpec,
    StepStatus,
    VerdictKind,
    ZxKind,
)
from app.zx import ZxDiagram, circuit_to_zx_with_provenance, zx_normalize

logger = logging.getLogger(__name__)

WIRE = "input a\noutput a"

# S4circ の4つの「蛇」
CIRCUIT_FRAGMENTS: Dict[str, str] = {
    "A.c2": "input r1\nprep0 r2\ncnot r1 r2\npostplus r1\noutput r2",
    "A.c3": "prep0 r1\ninput r2\ncnot r2 r1\npostplus r2\noutput r1",
    "B.c1": "prepplus r1\ninput r2\ncnot r1 r2\npost0 r2\noutput r1",
    "B.c4": "input r1\nprepplus r2\ncnot r2 r1\npost0 r1\noutput r2",
}

SPLICE_KINDS = ("plus-control", "zero-target", "control-postplus", "target-postzero")


@dataclass(frozen=True)
class CircuitRule:
    """回路方程式の1インスタンス（左辺と右辺は同じ入出力数）"""
    rule_id: str
    variant: int
    params: Tuple[Tuple[str, Any], ...]
    lhs: Circuit
    rhs: Circuit

    def side(self, direction: str) -> Circuit:
        return self.rhs if direction == Direction.RL else self.lhs

    def target(self, direction: str) -> Circuit:
        return self.lhs if direction == Direction.RL else self.rhs

    @property
    def param_dict(self) -> Dict[str, Any]:
        return dict(self.params)


class RuleParams:
    """規則パラメータの読み出しと範囲検査"""

    def __init__(self, rule_id: str, params: Optional[Dict[str, Any]], max_arity: int):
        self.rule_id = rule_id
        self.raw = dict(params or {})
        self.max_arity = max_arity
        self.used: Dict[str, Any] = {}

    def _integer(self, name: str, default: int) -> int:
        value = self.raw.get(name, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise RuleParameterError(f"{self.rule_id}: parameter '{name}' must be an integer, got {value!r}")
        return value

    def phase(self, name: str, default: int = 0) -> int:
        value = self._integer(name, default) % 4
        self.used[name] = value
        return value

    def arity(self, name: str, default: int, low: int = 0) -> int:
        value = self._integer(name, default)
        if value < low or value > self.max_arity:
            raise RuleParameterError(
                f"{self.rule_id}: parameter '{name}'={value} outside [{low}, {self.max_arity}]"
            )
        self.used[name] = value
        return value

    def flag(self, name: str, default: bool) -> bool:
        value = self.raw.get(name, default)
        if not isinstance(value, bool):
            raise RuleParameterError(f"{self.rule_id}: parameter '{name}' must be true or false")
        self.used[name] = value
        return value

    def total(self, *names: str) -> None:
        total = sum(self.used[name] for name in names)
        if total > self.max_arity:
            raise RuleParameterError(
                f"{self.rule_id}: {' + '.join(names)} = {total} exceeds the bound {self.max_arity}"
            )

    def done(self) -> Dict[str, Any]:
        unknown = sorted(set(self.raw) - set(self.used))
        if unknown:
            raise RuleParameterError(f"{self.rule_id}: unknown parameter(s) {', '.join(unknown)}")
        return dict(self.used)


# =========================
# 固定形の方程式
# =========================

Sides = Tuple[str, str]

_FIXED: Dict[str, List[Sides]] = {
    "S1circ": [
        ("input c\nprep0 a\nprep0 b\ncnot c b\ncnot b a\noutput a b c",
         "input a\nprep0 b\nprep0 c\ncnot a b\ncnot b c\noutput a b c"),
        ("input c\nprepplus a\nprepplus b\ncnot b c\ncnot a b\noutput a b c",
         "input a\nprepplus b\nprepplus c\ncnot b a\ncnot c b\noutput a b c"),
    ],
    "S2circ": [
        ("input r1 r3\nprep0 r2\ncnot r3 r2\ncnot r2 r1\npost0 r1\noutput r2 r3",
         "input r1 r2\nprep0 r3\ncnot r2 r1\ncnot r2 r3\npost0 r1\noutput r2 r3"),
        ("input r1 r3\nprepplus r2\ncnot r2 r3\ncnot r1 r2\npostplus r1\noutput r2 r3",
         "input r1 r2\nprepplus r3\ncnot r1 r2\ncnot r3 r2\npostplus r1\noutput r2 r3"),
        ("input r1 r2 r3\ncnot r2 r1\ncnot r3 r2\npost0 r1\npost0 r2\noutput r3",
         "input r1 r2 r3\ncnot r2 r3\ncnot r1 r2\npost0 r2\npost0 r3\noutput r1"),
        ("input r1 r2 r3\ncnot r1 r2\ncnot r2 r3\npostplus r1\npostplus r2\noutput r3",
         "input r1 r2 r3\ncnot r3 r2\ncnot r2 r1\npostplus r2\npostplus r3\noutput r1"),
    ],
    "S3circ": [
        ("prep0 r1\ninput r2 r3\ncnot r2 r1\ncnot r3 r2\npost0 r2\noutput r1 r3",
         "prep0 r1\ninput r2 r3\ncnot r2 r3\ncnot r2 r1\npost0 r3\noutput r1 r2"),
        ("prepplus r1\ninput r2 r3\ncnot r1 r2\ncnot r2 r3\npostplus r2\noutput r1 r3",
         "prepplus r1\ninput r2 r3\ncnot r3 r2\ncnot r1 r2\npostplus r3\noutput r1 r2"),
        ("prep0 r1\ninput r2\ncnot r2 r1\noutput r1 r2",
         "prep0 r1\ninput r2\ncnot r2 r1\nswap r1 r2\noutput r1 r2"),
        ("input r2\nprepplus r1\ncnot r1 r2\noutput r1 r2",
         "input r2\nprepplus r1\ncnot r1 r2\nswap r1 r2\noutput r1 r2"),
        ("input r1 r2\ncnot r2 r1\npost0 r1\noutput r2",
         "input r1 r2\nswap r1 r2\ncnot r2 r1\npost0 r1\noutput r2"),
        ("input r1 r2\ncnot r1 r2\npostplus r1\noutput r2",
         "input r1 r2\nswap r1 r2\ncnot r1 r2\npostplus r1\noutput r2"),
    ],
    "S4circ": [
        (CIRCUIT_FRAGMENTS["A.c3"], CIRCUIT_FRAGMENTS["A.c2"]),
        (CIRCUIT_FRAGMENTS["A.c2"], WIRE),
        (CIRCUIT_FRAGMENTS["B.c1"], CIRCUIT_FRAGMENTS["B.c4"]),
        (CIRCUIT_FRAGMENTS["B.c4"], WIRE),
    ],
    "S5circ": [
        ("input r2\nprep0 r1\ncnot r2 r1\ncnot r2 r1\npost0 r1\noutput r2",
         "input r2\nprepplus r1\ncnot r1 r2\ncnot r1 r2\npostplus r1\noutput r2"),
        ("input r2\nprepplus r1\ncnot r1 r2\ncnot r1 r2\npostplus r1\noutput r2",
         WIRE),
    ],
    "B1circ": [
        ("input r2\nprep0 r1\ncnot r1 r2\noutput r1 r2",
         "input r2\nprep0 r1\noutput r1 r2"),
        ("input r1\nprepplus r2\ncnot r1 r2\noutput r1 r2",
         "input r1\nprepplus r2\noutput r1 r2"),
        ("input r1 r2\ncnot r1 r2\npost0 r1\noutput r2",
         "input r1 r2\npost0 r1\noutput r2"),
        ("input r1 r2\ncnot r1 r2\npostplus r2\noutput r1",
         "input r1 r2\npostplus r2\noutput r1"),
    ],
    "B2circ": [
        ("input r1 r2\ncnot r1 r2\ncnot r2 r1\noutput r1 r2",
         "input r1 r2\ncnot r2 r1\nswap r1 r2\noutput r1 r2"),
        ("input r1 r2\ncnot r2 r1\nswap r1 r2\noutput r1 r2",
         "input r1 r2\nswap r1 r2\ncnot r1 r2\noutput r1 r2"),
    ],
    "K1circ": [
        ("input r2\nprep0 r1\nrx r1 2\ncnot r1 r2\noutput r1 r2",
         "input r2\nprep0 r1\nrx r1 2\nrx r2 2\noutput r1 r2"),
        ("input r1\nprepplus r2\nrz r2 2\ncnot r1 r2\noutput r1 r2",
         "input r1\nprepplus r2\nrz r2 2\nrz r1 2\noutput r1 r2"),
        ("input r1 r2\ncnot r1 r2\nrx r1 2\npost0 r1\noutput r2",
         "input r1 r2\nrx r1 2\npost0 r1\nrx r2 2\noutput r2"),
        ("input r1 r2\ncnot r1 r2\nrz r2 2\npostplus r2\noutput r1",
         "input r1 r2\nrz r1 2\nrz r2 2\npostplus r2\noutput r1"),
    ],
    "Hcirc": [
        ("input a\nh a\noutput a",
         "input a\nrz a 1\nrx a 1\nrz a 1\noutput a"),
    ],
}


def _fixed(rule_id: str) -> Callable[[RuleParams, int], Sides]:
    def build(p: RuleParams, variant: int) -> Sides:
        return _FIXED[rule_id][variant]
    return build


def _rotation_fusion(p: RuleParams, variant: int) -> Sides:
    alpha, beta = p.phase("alpha"), p.phase("beta")
    gate = "rz" if variant == 0 else "rx"
    fused = (alpha + beta) % 4
    rhs = WIRE if fused == 0 else f"input a\n{gate} a {fused}\noutput a"
    return f"input a\n{gate} a {alpha}\n{gate} a {beta}\noutput a", rhs


def _pi_commute(p: RuleParams, variant: int) -> Sides:
    alpha = p.phase("alpha")
    pi_gate, gate = ("rz", "rx") if variant == 0 else ("rx", "rz")
    return (
        f"input a\n{pi_gate} a 2\n{gate} a {alpha}\noutput a",
        f"input a\n{gate} a {-alpha % 4}\n{pi_gate} a 2\noutput a",
    )


# =========================
# (Ccirc) の生成
# =========================

def _spider_text(
    colour: str,
    alpha: int,
    top: int,
    bottom: int,
    head: bool,
    tail: bool,
    with_h: bool,
    hadamard_ends: bool = True,
) -> str:
    """
    colour のスパイダーを CNOT のはしごで書いた回路

    w は貫通ワイヤ、t1.. は入力側、b1.. は出力側の補助ワイヤ。
    with_h のときは全ての脚に h を付ける。hadamard_ends なら head / tail の無い
    w の端も「補助ワイヤ側の準備 + h」「h + 補助ワイヤ側の後選択」で書く。
    """
    tops = [f"t{i}" for i in range(1, top + 1)]
    bottoms = [f"b{i}" for i in range(1, bottom + 1)]
    red = colour == ZxKind.X.value
    prep, post = ("prep0", "post0") if red else ("prepplus", "postplus")
    ancilla_prep, ancilla_post = ("prepplus", "postplus") if red else ("prep0", "post0")
    lines: List[str] = []

    inputs = (["w"] if head else []) + tops
    if inputs:
        lines.append("input " + " ".join(inputs))
    if with_h:
        lines.extend(f"h {t}" for t in tops)
        if head:
            lines.append("h w")
    if not head:
        if with_h and hadamard_ends:
            lines.extend([f"{ancilla_prep} w", "h w"])
        else:
            lines.append(f"{prep} w")

    chain = tops + ["w"]
    for first, second in zip(chain, chain[1:]):
        lines.append(f"cnot {first} {second}" if red else f"cnot {second} {first}")
    lines.extend(f"{ancilla_post} {t}" for t in tops)

    if alpha:
        lines.append(f"{'rx' if red else 'rz'} w {alpha}")

    lines.extend(f"{ancilla_prep} {b}" for b in bottoms)
    chain = ["w"] + bottoms
    for first, second in zip(chain, chain[1:]):
        lines.append(f"cnot {second} {first}" if red else f"cnot {first} {second}")

    if with_h:
        if tail:
            lines.append("h w")
        lines.extend(f"h {b}" for b in bottoms)
    if not tail:
        if with_h and hadamard_ends:
            lines.extend(["h w", f"{ancilla_post} w"])
        else:
            lines.append(f"{post} w")

    outputs = (["w"] if tail else []) + bottoms
    if outputs:
        lines.append("output " + " ".join(outputs))
    return "\n".join(lines)


def ccirc_texts(
    alpha: int, inputs: int, outputs: int, head: bool, tail: bool, variant: int, hadamard_ends: bool = True
) -> Sides:
    """variant 0: X スパイダー ↔ H 付き Z スパイダー、variant 1: 色を入れ替えたもの"""
    top = inputs - int(head)
    bottom = outputs - int(tail)
    colour = ZxKind.X.value if variant == 0 else ZxKind.Z.value
    dual = ZxKind.Z.value if variant == 0 else ZxKind.X.value
    return (
        _spider_text(colour, alpha, top, bottom, head, tail, with_h=False),
        _spider_text(dual, alpha, top, bottom, head, tail, with_h=True, hadamard_ends=hadamard_ends),
    )


def ccirc_sides(
    alpha: int,
    inputs: int,
    outputs: int,
    head: bool,
    tail: bool,
    variant: int = 0,
    max_legs: int = 5,
    hadamard_ends: bool = True,
) -> Tuple[Circuit, Circuit]:
    if inputs < 0 or outputs < 0 or inputs + outputs > max_legs:
        raise RuleParameterError(f"Ccirc: inputs + outputs = {inputs + outputs} outside [0, {max_legs}]")
    if (head and inputs == 0) or (tail and outputs == 0):
        raise RuleParameterError("Ccirc: head needs an input and tail needs an output")
    lhs, rhs = ccirc_texts(alpha % 4, inputs, outputs, head, tail, variant, hadamard_ends)
    return parse_circuit(lhs), parse_circuit(rhs)


def _colour_change(p: RuleParams, variant: int) -> Sides:
    alpha = p.phase("alpha")
    inputs, outputs = p.arity("inputs", 1), p.arity("outputs", 1)
    p.total("inputs", "outputs")
    head = p.flag("head", inputs > 0)
    tail = p.flag("tail", outputs > 0)
    if (head and inputs == 0) or (tail and outputs == 0):
        raise RuleParameterError("Ccirc: head needs an input and tail needs an output")
    hadamard_ends = p.flag("hadamard_ends", True)
    return ccirc_texts(alpha, inputs, outputs, head, tail, variant, hadamard_ends)


# =========================
# (Scirc) の断片つなぎ替え
# =========================

_SPLICE_SOURCES: List[Tuple[str, List[Tuple[str, int]]]] = [
    ("input r1 r3\nprepplus r2\ncnot r2 r3\ncnot r1 r2\npost0 r2\noutput r1 r3",
     [("plus-control", 0), ("target-postzero", 1)]),
    ("input r1 r3\nprep0 r2\ncnot r3 r2\ncnot r2 r1\npostplus r2\noutput r1 r3",
     [("zero-target", 0), ("control-postplus", 1)]),
    ("input a\nprepplus p\ncnot p a\npost0 a\noutput p",
     [("plus-control", 0), ("target-postzero", 0)]),
    ("input a\nprep0 p\ncnot a p\npostplus a\noutput p",
     [("zero-target", 0), ("control-postplus", 0)]),
]


def cnot_nodes(circuit: Circuit) -> List[int]:
    return [n for n in circuit.gate_nodes() if circuit.kind(n) == GateKind.CNOT.value]


def scirc_sites(variant: int, circuit: Circuit) -> List[SpliceSite]:
    cnots = cnot_nodes(circuit)
    return [SpliceSite(kind=kind, gate=cnots[k]) for kind, k in _SPLICE_SOURCES[variant][1]]


def _fragment_vertex(host: Circuit, provenance: Dict[int, Tuple[int, ...]], site: SpliceSite) -> Tuple[int, int]:
    """(断片の次数1スパイダー, 融合先の CNOT 半分) の ZX 頂点"""
    gate = site.gate
    if gate not in host.graph or host.kind(gate) != GateKind.CNOT.value:
        raise BindingError(f"{site.kind}: node {gate} is not a CNOT")
    if site.kind == "plus-control":
        node, _ = host.producer(gate, 0)
        expected, half = GateKind.PREPPLUS.value, 0
    elif site.kind == "zero-target":
        node, _ = host.producer(gate, 1)
        expected, half = GateKind.PREP0.value, 1
    elif site.kind == "control-postplus":
        node, _ = host.consumer(gate, 0)
        expected, half = GateKind.POSTPLUS.value, 0
    elif site.kind == "target-postzero":
        node, _ = host.consumer(gate, 1)
        expected, half = GateKind.POST0.value, 1
    else:
        raise BindingError(f"unknown splice fragment '{site.kind}'")
    if host.kind(node) != expected:
        raise BindingError(f"{site.kind}: fragment not present at CNOT {gate}")
    return provenance[node][0], provenance[gate][half]


def _dissolve(graph: nx.MultiGraph, vertex: int) -> None:
    """位相0・次数2のスパイダーを取り除き、両隣を直結する"""
    ends = [v if u == vertex else u for u, v in graph.edges(vertex)]
    graph.remove_node(vertex)
    graph.add_edge(ends[0], ends[1])


def splice_scirc(host: Circuit, sites: List[SpliceSite], max_qubits: int = 12) -> Circuit:
    """
    指定の CNOT 断片をワイヤに置き換えた回路を返す

    ZX に翻訳し、断片の次数1スパイダーを CNOT の半分に融合して消え残りを外し、回路に戻す。
    """
    if not sites:
        raise BindingError("splice needs at least one fragment site")
    diagram, provenance = circuit_to_zx_with_provenance(host)
    graph = nx.MultiGraph(diagram.graph)
    for site in sites:
        fragment, half = _fragment_vertex(host, provenance, site)
        if fragment not in graph or half not in graph or not graph.has_edge(fragment, half):
            raise BindingError(f"{site.kind}: fragment at CNOT {site.gate} was already consumed")
        graph.remove_node(fragment)
        if graph.degree(half) == 2 and graph.nodes[half]["phase"] == 0:
            _dissolve(graph, half)

    result = extract_circuit(zx_normalize(ZxDiagram(graph)))
    if host.n_inputs + host.n_outputs <= max_qubits:
        verdict = mat_proportional(circuit_to_matrix(result), circuit_to_matrix(host))
        if verdict.kind == VerdictKind.DIFFERENT:
            raise ExtractionError(f"splice changed the circuit's meaning ({verdict.describe()})")
    return result


def _pair_cnots(diagram: ZxDiagram) -> Dict[int, int]:
    """次数3の Z(0) と隣接する次数3の X(0) を CNOT として完全マッチさせる"""
    def candidate(v: int, kind: str) -> bool:
        return diagram.kind(v) == kind and diagram.phase(v) == 0 and diagram.degree(v) == 3

    greens = [v for v in diagram.interior() if candidate(v, ZxKind.Z.value)]
    reds = {v for v in diagram.interior() if candidate(v, ZxKind.X.value)}
    pairs: Dict[int, int] = {}

    def extend(i: int) -> bool:
        if i == len(greens):
            return len(pairs) == len(reds)
        z = greens[i]
        for x in diagram.neighbors(z):
            if x in reds and x not in pairs.values() and diagram.edge_count(z, x) == 1:
                pairs[z] = x
                if extend(i + 1):
                    return True
                del pairs[z]
        return False

    if not extend(0):
        raise ExtractionError("degree-3 spiders do not pair up into CNOTs")
    return pairs


def extract_circuit(diagram: ZxDiagram) -> Circuit:
    """
    CNOT・回転・H・準備・後選択の像だけからなる図を回路に戻す

    一般の図の回路抽出はしない。CNOT の対を決め、端点間のワイヤをたどって向きを付ける。
    """
    pairs = _pair_cnots(diagram)
    partner = {**pairs, **{x: z for z, x in pairs.items()}}

    element: Dict[int, Tuple[str, int]] = {}
    endpoints: List[int] = []
    for v in diagram.vertices():
        kind, degree = diagram.kind(v), diagram.degree(v)
        if kind in (ZxKind.IN.value, ZxKind.OUT.value):
            endpoints.append(v)
        elif v in partner:
            continue
        elif kind == ZxKind.H.value:
            element[v] = (GateKind.H.value, 0)
        elif degree == 2:
            element[v] = (GateKind.RZ.value if kind == ZxKind.Z.value else GateKind.RX.value, diagram.phase(v))
        elif degree == 1:
            if diagram.phase(v):
                raise ExtractionError(f"degree-1 spider {v} has phase {diagram.phase(v)}")
            endpoints.append(v)
        elif degree == 0:
            logger.debug(f"dropping scalar spider {v}")
        else:
            raise ExtractionError(f"spider {v} of degree {degree} has no circuit image")

    adjacency: Dict[int, List[Tuple[int, int]]] = {v: [] for v in diagram.vertices()}
    for number, (u, v) in enumerate(diagram.edges()):
        if partner.get(u) == v:
            continue
        adjacency[u].append((v, number))
        adjacency[v].append((u, number))

    wires: List[List[int]] = []
    visited: Set[int] = set()
    for start in endpoints:
        if start in visited:
            continue
        path = [start]
        visited.add(start)
        previous_edge = None
        vertex = start
        while True:
            onward = [(v, e) for v, e in adjacency[vertex] if e != previous_edge]
            if vertex != start and (vertex in endpoints):
                break
            if len(onward) != 1:
                raise ExtractionError(f"vertex {vertex} does not sit on a single wire")
            vertex, previous_edge = onward[0]
            path.append(vertex)
            visited.add(vertex)
        wires.append(path)
    leftover = [v for v in list(element) + list(partner) if v not in visited]
    if leftover:
        raise ExtractionError(f"closed wire loop through {leftover}")

    def is_source(v: int) -> bool:
        return diagram.kind(v) == ZxKind.IN.value

    def is_sink(v: int) -> bool:
        return diagram.kind(v) == ZxKind.OUT.value

    oriented: List[List[int]] = []
    for path in wires:
        first, last = path[0], path[-1]
        if is_source(first) or is_sink(last):
            pass
        elif is_source(last) or is_sink(first):
            path = path[::-1]
        elif first > last:
            path = path[::-1]
        if is_sink(path[0]) or is_source(path[-1]):
            raise ExtractionError(f"wire {path} joins two {'inputs' if is_source(path[-1]) else 'outputs'}")
        oriented.append(path)

    graph = nx.MultiDiGraph()
    node_of: Dict[int, int] = {}
    for v in diagram.vertices():
        kind = diagram.kind(v)
        if kind == ZxKind.IN.value:
            graph.add_node(v, kind=GateKind.INPUT.value, phase=0, index=diagram.index(v))
        elif kind == ZxKind.OUT.value:
            graph.add_node(v, kind=GateKind.OUTPUT.value, phase=0, index=diagram.index(v))
        elif v in pairs:
            graph.add_node(v, kind=GateKind.CNOT.value, phase=0, index=None)
        elif v in element:
            gate, phase = element[v]
            graph.add_node(v, kind=gate, phase=phase, index=None)
        else:
            continue
        node_of[v] = v
    for z, x in pairs.items():
        node_of[x] = z

    def port(v: int) -> int:
        return 1 if v in partner and v not in pairs else 0

    for path in oriented:
        head, tail = path[0], path[-1]
        if diagram.degree(head) == 1 and not diagram.is_boundary(head):
            kind = GateKind.PREPPLUS.value if diagram.kind(head) == ZxKind.Z.value else GateKind.PREP0.value
            graph.add_node(head, kind=kind, phase=0, index=None)
            node_of[head] = head
        if diagram.degree(tail) == 1 and not diagram.is_boundary(tail):
            kind = GateKind.POSTPLUS.value if diagram.kind(tail) == ZxKind.Z.value else GateKind.POST0.value
            graph.add_node(tail, kind=kind, phase=0, index=None)
            node_of[tail] = tail
        for u, v in zip(path, path[1:]):
            graph.add_edge(node_of[u], node_of[v], src_port=port(u), dst_port=port(v))

    mapping = {old: new for new, old in enumerate(sorted(graph.nodes))}
    try:
        return Circuit(nx.relabel_nodes(graph, mapping, copy=True))
    except (LivenessError, ArityError) as e:
        raise ExtractionError(f"extracted wiring is not a circuit: {e}")


def _splice(p: RuleParams, variant: int) -> Sides:
    source, _ = _SPLICE_SOURCES[variant]
    lhs = parse_circuit(source)
    return source, print_circuit(splice_scirc(lhs, scirc_sites(variant, lhs)))


CIRCUIT_RULES: Dict[str, Tuple[int, Callable[[RuleParams, int], Sides]]] = {
    "S1circ": (2, _fixed("S1circ")),
    "S2circ": (4, _fixed("S2circ")),
    "S3circ": (6, _fixed("S3circ")),
    "S4circ": (4, _fixed("S4circ")),
    "S5circ": (2, _fixed("S5circ")),
    "S6circ": (2, _rotation_fusion),
    "B1circ": (4, _fixed("B1circ")),
    "B2circ": (2, _fixed("B2circ")),
    "K1circ": (4, _fixed("K1circ")),
    "K2circ": (2, _pi_commute),
    "Ccirc": (2, _colour_change),
    "Hcirc": (1, _fixed("Hcirc")),
    "Scirc": (4, _splice),
}


def circ_rule_catalog(
    rule_id: str,
    variant: int = 0,
    params: Optional[Dict[str, Any]] = None,
    ccirc_max: int = 5,
) -> CircuitRule:
    """規則ID・バリアント・パラメータから両辺の回路を組み立てる"""
    if rule_id not in CIRCUIT_RULES:
        raise UnknownRuleError(f"unknown circuit rule '{rule_id}'")
    count, build = CIRCUIT_RULES[rule_id]
    if not 0 <= variant < count:
        raise UnknownRuleError(f"{rule_id} has variants 0..{count - 1}, got {variant}")
    p = RuleParams(rule_id, params, ccirc_max)
    lhs_text, rhs_text = build(p, variant)
    used = p.done()
    lhs, rhs = parse_circuit(lhs_text), parse_circuit(rhs_text)
    if (lhs.n_inputs, lhs.n_outputs) != (rhs.n_inputs, rhs.n_outputs):
        raise RuleParameterError(f"{rule_id}[{variant}]: sides have different interfaces")
    return CircuitRule(rule_id, variant, tuple(sorted(used.items())), lhs, rhs)


def circ_sweep(ccirc_max: int = 5) -> Iterator[Tuple[str, int, Dict[str, Any]]]:
    """健全性スイープで検査する (規則ID, バリアント, パラメータ) の列"""
    phases = range(4)
    for rule_id, (count, _) in CIRCUIT_RULES.items():
        for variant in range(count):
            if rule_id == "S6circ":
                for alpha, beta in itertools.product(phases, phases):
                    yield rule_id, variant, {"alpha": alpha, "beta": beta}
            elif rule_id == "K2circ":
                for alpha in phases:
                    yield rule_id, variant, {"alpha": alpha}
            elif rule_id == "Ccirc":
                for alpha in phases:
                    for inputs in range(ccirc_max + 1):
                        for outputs in range(ccirc_max + 1 - inputs):
                            for head, tail in itertools.product((False, True), repeat=2):
                                if (head and inputs == 0) or (tail and outputs == 0):
                                    continue
                                params = {"alpha": alpha, "inputs": inputs, "outputs": outputs,
                                          "head": head, "tail": tail}
                                yield rule_id, variant, params
                                if not (head and tail):
                                    yield rule_id, variant, {**params, "hadamard_ends": False}
            else:
                yield rule_id, variant, {}


# =========================
# マッチ
# =========================

@dataclass(frozen=True)
class CircuitBinding:
    """
    パターンからホストへの対応

    gate_map: パターンゲート → ホストゲート
    input_map: パターン入力ノード → ホスト側の生成ポート (ノード, 出力ポート)
    output_map: パターン出力ノード → ホスト側の消費ポート (ノード, 入力ポート)
    """
    gate_map: Tuple[Tuple[int, int], ...]
    input_map: Tuple[Tuple[int, Port], ...]
    output_map: Tuple[Tuple[int, Port], ...]

    @property
    def gates(self) -> Dict[int, int]:
        return dict(self.gate_map)

    @property
    def inputs(self) -> Dict[int, Port]:
        return dict(self.input_map)

    @property
    def outputs(self) -> Dict[int, Port]:
        return dict(self.output_map)

    def pins(self, pattern_id: int) -> Optional[int]:
        if pattern_id in self.gates:
            return self.gates[pattern_id]
        if pattern_id in self.inputs:
            return self.inputs[pattern_id][0]
        if pattern_id in self.outputs:
            return self.outputs[pattern_id][0]
        return None

    def sort_key(self) -> Tuple:
        return (
            tuple(h for _, h in self.gate_map),
            tuple(port for _, port in self.input_map),
            tuple(port for _, port in self.output_map),
        )


def _gate_order(pattern: Circuit) -> List[int]:
    gates = pattern.gate_nodes()
    undirected = pattern.graph.to_undirected(as_view=True)
    seen: Set[int] = set()
    order: List[int] = []
    for root in gates:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            g = queue.popleft()
            order.append(g)
            for n in sorted(undirected.neighbors(g)):
                if n not in seen and pattern.kind(n) not in BOUNDARY_KINDS:
                    seen.add(n)
                    queue.append(n)
    return order


def _ports(circuit: Circuit, node: int) -> Tuple[int, int]:
    return PORTS[circuit.kind(node)]


def _consistent(pattern: Circuit, host: Circuit, mapping: Dict[int, int], p: int, h: int) -> bool:
    """p ↦ h が既に対応済みの隣接ゲートとポートごとに整合するか"""
    n_in, n_out = _ports(pattern, p)
    for port in range(n_in):
        src, sp = pattern.producer(p, port)
        if src in mapping:
            if host.producer(h, port) != (mapping[src], sp):
                return False
    for port in range(n_out):
        dst, dp = pattern.consumer(p, port)
        if dst in mapping:
            if host.consumer(h, port) != (mapping[dst], dp):
                return False
    return True


def _gate_maps(pattern: Circuit, host: Circuit) -> Iterator[Dict[int, int]]:
    order = _gate_order(pattern)
    host_gates = host.gate_nodes()
    mapping: Dict[int, int] = {}
    used: Set[int] = set()

    def candidates(p: int) -> List[int]:
        n_in, n_out = _ports(pattern, p)
        for port in range(n_in):
            src, sp = pattern.producer(p, port)
            if src in mapping:
                node, dp = host.consumer(mapping[src], sp)
                return [node] if dp == port else []
        for port in range(n_out):
            dst, dp = pattern.consumer(p, port)
            if dst in mapping:
                node, sp = host.producer(mapping[dst], dp)
                return [node] if sp == port else []
        return host_gates

    def extend(depth: int) -> Iterator[Dict[int, int]]:
        if depth == len(order):
            yield dict(mapping)
            return
        p = order[depth]
        for h in candidates(p):
            if h in used or host.kind(h) != pattern.kind(p) or host.phase(h) != pattern.phase(p):
                continue
            if not _consistent(pattern, host, mapping, p, h):
                continue
            mapping[p] = h
            used.add(h)
            yield from extend(depth + 1)
            del mapping[p]
            used.discard(h)

    yield from extend(0)


def _stub_maps(
    pattern: Circuit, host: Circuit, gate_map: Dict[int, int]
) -> Optional[Tuple[Dict[int, Port], Dict[int, Port]]]:
    image = set(gate_map.values())
    inputs: Dict[int, Port] = {}
    outputs: Dict[int, Port] = {}
    for node in pattern.input_nodes:
        dst, dp = pattern.consumer(node, 0)
        if dst in gate_map:
            src = host.producer(gate_map[dst], dp)
            if src[0] in image:
                return None
            inputs[node] = src
    for node in pattern.output_nodes:
        src, sp = pattern.producer(node, 0)
        if src in gate_map:
            dst = host.consumer(gate_map[src], sp)
            if dst[0] in image:
                return None
            outputs[node] = dst
    return inputs, outputs


def _bare_wires(pattern: Circuit) -> List[Tuple[int, int]]:
    """パターン中で入力から出力へ直結するワイヤ (入力ノード, 出力ノード)"""
    wires = []
    for node in pattern.input_nodes:
        dst, _ = pattern.consumer(node, 0)
        if pattern.kind(dst) == GateKind.OUTPUT.value:
            wires.append((node, dst))
    return wires


def _convex(host: Circuit, inputs: Dict[int, Port], outputs: Dict[int, Port]) -> bool:
    """どの出口からもどの入口へも戻れない（置換後も非巡回）"""
    sources = {node for node, _ in inputs.values()}
    for node, _ in outputs.values():
        if node in sources:
            return False
        if sources & nx.descendants(host.graph, node):
            return False
    return True


def find_circ_matches(host: Circuit, rule: CircuitRule, direction: str = Direction.LR) -> List[CircuitBinding]:
    """方向付き左辺の凸な出現をすべて列挙する（ホストIDで整列）"""
    pattern = rule.side(direction)
    wires = _bare_wires(pattern)
    segments = list(host.segments())
    bindings: Set[CircuitBinding] = set()

    for gate_map in _gate_maps(pattern, host):
        stubs = _stub_maps(pattern, host, gate_map)
        if stubs is None:
            continue
        inputs, outputs = stubs
        image = set(gate_map.values())
        free = [(src, dst) for src, dst in segments if src[0] not in image and dst[0] not in image]
        for chosen in itertools.permutations(free, len(wires)):
            wire_in = dict(inputs)
            wire_out = dict(outputs)
            for (i_node, o_node), (src, dst) in zip(wires, chosen):
                wire_in[i_node] = src
                wire_out[o_node] = dst
            if not _convex(host, wire_in, wire_out):
                continue
            bindings.add(CircuitBinding(
                gate_map=tuple(sorted(gate_map.items())),
                input_map=tuple(sorted(wire_in.items())),
                output_map=tuple(sorted(wire_out.items())),
            ))
    result = sorted(bindings, key=CircuitBinding.sort_key)
    logger.debug(f"{rule.rule_id}[{rule.variant}] {direction}: {len(result)} match(es)")
    return result


def filter_bindings(bindings: List[CircuitBinding], fixed: Dict[int, int]) -> List[CircuitBinding]:
    return [b for b in bindings if all(b.pins(pid) == hid for pid, hid in fixed.items())]


# =========================
# 適用
# =========================

def _check_binding(host: Circuit, pattern: Circuit, binding: CircuitBinding) -> None:
    gate_map = binding.gates
    if set(gate_map) != set(pattern.gate_nodes()):
        raise BindingError("binding does not cover the pattern gates")
    if set(binding.inputs) != set(pattern.input_nodes) or set(binding.outputs) != set(pattern.output_nodes):
        raise BindingError("binding does not cover the pattern wire stubs")
    if len(set(gate_map.values())) != len(gate_map):
        raise BindingError("binding is not injective")
    mapped: Dict[int, int] = {}
    for p, h in gate_map.items():
        if h not in host.graph or host.kind(h) != pattern.kind(p) or host.phase(h) != pattern.phase(p):
            raise BindingError(f"host node {h} does not match pattern gate {p}")
        mapped[p] = h
    for p, h in gate_map.items():
        if not _consistent(pattern, host, mapped, p, h):
            raise BindingError(f"wiring around host node {h} does not match the pattern")
    stubs = _stub_maps(pattern, host, gate_map)
    if stubs is None:
        raise BindingError("a wire stub leads back into the match")
    inputs, outputs = stubs
    for node, port in inputs.items():
        if binding.inputs[node] != port:
            raise BindingError(f"input stub {node} is bound to a different wire")
    for node, port in outputs.items():
        if binding.outputs[node] != port:
            raise BindingError(f"output stub {node} is bound to a different wire")
    image = set(gate_map.values())
    for i_node, o_node in _bare_wires(pattern):
        src, dst = binding.inputs[i_node], binding.outputs[o_node]
        if src[0] not in host.graph or src[0] in image or dst[0] in image:
            raise BindingError(f"bare wire {i_node}->{o_node} is not bound to a free wire")
        try:
            if host.consumer(*src) != dst:
                raise BindingError(f"host has no wire segment {src} -> {dst}")
        except KeyError:
            raise BindingError(f"host has no wire segment starting at {src}")
    if not _convex(host, binding.inputs, binding.outputs):
        raise BindingError("matched fragment is not convex")


def _remove_segment(graph: nx.MultiDiGraph, src: Port, dst: Port) -> None:
    for key, data in graph.get_edge_data(src[0], dst[0], default={}).items():
        if data["src_port"] == src[1] and data["dst_port"] == dst[1]:
            graph.remove_edge(src[0], dst[0], key)
            return
    raise BindingError(f"host has no wire segment {src} -> {dst}")


def apply_circ_rule(host: Circuit, rule: CircuitRule, direction: str, binding: CircuitBinding) -> Circuit:
    """マッチした断片を右辺で置き換え、ワイヤの切り口をつなぎ直す"""
    pattern = rule.side(direction)
    replacement = rule.target(direction)
    _check_binding(host, pattern, binding)

    inputs = {pattern.graph.nodes[n]["index"]: port for n, port in binding.inputs.items()}
    outputs = {pattern.graph.nodes[n]["index"]: port for n, port in binding.outputs.items()}

    graph = nx.MultiDiGraph(host.graph)
    for i_node, o_node in _bare_wires(pattern):
        _remove_segment(graph, binding.inputs[i_node], binding.outputs[o_node])
    graph.remove_nodes_from(binding.gates.values())

    fresh = host.fresh_id()
    placed: Dict[int, int] = {}
    for offset, node in enumerate(replacement.gate_nodes()):
        placed[node] = fresh + offset
        graph.add_node(fresh + offset, **dict(replacement.graph.nodes[node]))

    def resolve_src(port: Port) -> Port:
        node, sp = port
        if replacement.kind(node) == GateKind.INPUT.value:
            return inputs[replacement.graph.nodes[node]["index"]]
        return placed[node], sp

    def resolve_dst(port: Port) -> Port:
        node, dp = port
        if replacement.kind(node) == GateKind.OUTPUT.value:
            return outputs[replacement.graph.nodes[node]["index"]]
        return placed[node], dp

    for src, dst in replacement.segments():
        (u, sp), (v, dp) = resolve_src(src), resolve_dst(dst)
        graph.add_edge(u, v, src_port=sp, dst_port=dp)

    try:
        return Circuit(graph)
    except (LivenessError, ArityError) as e:
        raise BindingError(f"rewrite leaves an invalid circuit: {e}")


# =========================
# 導出検査
# =========================

def _apply_step(current: Circuit, step: StepSpec, ccirc_max: int) -> Tuple[Circuit, int]:
    """1ステップを適用し (新しい回路, マッチ数) を返す"""
    if step.rule == "Scirc" and step.sites:
        return splice_scirc(current, step.sites), len(step.sites)
    rule = circ_rule_catalog(step.rule, step.variant, step.params, ccirc_max)
    bindings = filter_bindings(find_circ_matches(current, rule, step.direction), step.binding.fixed_pairs())
    if step.binding.match >= len(bindings):
        raise NoMatchError(
            f"{rule.rule_id}[{rule.variant}] {step.direction} has {len(bindings)} binding(s), "
            f"anchor asks for #{step.binding.match}"
        )
    return apply_circ_rule(current, rule, step.direction, bindings[step.binding.match]), len(bindings)


def verify_circ_derivation(
    script: CircuitDerivationScript,
    ccirc_max: int = 5,
    max_qubits: int = 12,
) -> DerivationReport:
    """各ステップを適用し、中間回路を初期回路とオラクル比較し、最後に目標と構造比較する"""
    steps: List[StepReport] = []

    def reject(index: int, step: Optional[StepSpec], reason: str, matches: int = 0) -> DerivationReport:
        if step is not None:
            steps.append(StepReport(
                index=index, rule=step.rule, direction=step.direction,
                status=StepStatus.FAIL, reason=reason, matches=matches,
            ))
        logger.info(f"{script.name or 'derivation'} rejected at step {index}: {reason}")
        return DerivationReport(
            name=script.name, accepted=False, failed_step=index, reason=reason, steps=steps
        )

    try:
        current = parse_circuit(script.initial)
        target = parse_circuit(script.target)
    except (CircuitSyntaxError, LivenessError, ArityError) as e:
        return reject(0, None, f"invalid circuit: {e}")
    checkable = current.n_inputs + current.n_outputs <= max_qubits
    reference = circuit_to_matrix(current, max_qubits) if checkable else None

    for index, step in enumerate(script.steps, start=1):
        try:
            current_next, matches = _apply_step(current, step, ccirc_max)
        except UnknownRuleError as e:
            return reject(index, step, f"unknown rule: {e}")
        except RuleParameterError as e:
            return reject(index, step, f"parameter error: {e}")
        except NoMatchError as e:
            return reject(index, step, f"no match: {e}")
        except (BindingError, ExtractionError) as e:
            return reject(index, step, f"binding error: {e}")

        if (current_next.n_inputs, current_next.n_outputs) != (current.n_inputs, current.n_outputs):
            return reject(index, step, "step changed the circuit's interface", matches)
        if reference is not None:
            try:
                verdict = mat_proportional(circuit_to_matrix(current_next, max_qubits), reference)
            except ArityError:
                verdict = None
            if verdict is not None and verdict.kind == VerdictKind.DIFFERENT:
                logger.warning(f"step {index} ({step.rule}) changed the circuit's meaning")
                return reject(index, step, "unsound step: oracle verdict Different", matches)

        current = current_next
        logger.debug(f"step {index}: {step.rule}[{step.variant}] {step.direction} -> {len(current)} gates")
        steps.append(StepReport(
            index=index, rule=step.rule, direction=step.direction, status=StepStatus.OK, matches=matches,
        ))

    if not structurally_equal(current, target):
        return reject(len(script.steps) + 1, None, "final circuit differs from target")
    logger.info(f"{script.name or 'derivation'} accepted ({len(steps)} steps)")
    return DerivationReport(name=script.name, accepted=True, steps=steps)


def run_circ_steps(circuit: Circuit, steps: List[StepSpec], ccirc_max: int = 5) -> Circuit:
    """検査なしでステップを順に適用する（apply コマンド用）"""
    for step in steps:
        circuit, _ = _apply_step(circuit, step, ccirc_max)
    return circuit


# =========================
# ランダム書き換え
# =========================

@lru_cache()
def _sweep_instances(ccirc_max: int) -> Tuple[Tuple[str, int, Dict[str, Any]], ...]:
    return tuple(circ_sweep(ccirc_max))


def random_rewrite(
    host: Circuit,
    rng: np.random.Generator,
    ccirc_max: int = 2,
    attempts: int = 50,
) -> Optional[Tuple[CircuitRule, str, Circuit]]:
    """
    スイープからランダムに選んだ規則を、ランダムな向きとマッチで1回適用する

    attempts 回選んでもマッチが無ければ None。
    """
    instances = _sweep_instances(ccirc_max)
    for _ in range(attempts):
        rule_id, variant, params = instances[int(rng.integers(0, len(instances)))]
        direction = Direction.LR.value if rng.integers(0, 2) == 0 else Direction.RL.value
        rule = circ_rule_catalog(rule_id, variant, params, ccirc_max)
        bindings = find_circ_matches(host, rule, direction)
        if not bindings:
            continue
        binding = bindings[int(rng.integers(0, len(bindings)))]
        try:
            return rule, direction, apply_circ_rule(host, rule, direction, binding)
        except BindingError as e:
            logger.debug(f"{rule.rule_id}[{variant}] {direction}: {e}")
    return None
