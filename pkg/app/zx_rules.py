"""
ZX 規則カタログと書き換え
基本規則（融合・恒等・双代数・π 複製・色変換・H 分解）と、回路方程式に似せた別形の規則、
マッチ列挙・適用・導出スクリプト検査
"""
import itertools
import logging
from collections import Counter, deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, Iterator, List, Optional, Set, Tuple

import networkx as nx
import numpy as np

from app.circuit import parse_circuit
from app.circuit_rules import CIRCUIT_FRAGMENTS, RuleParams, ccirc_sides, circ_rule_catalog
from app.exact import mat_proportional
from app.exceptions import (
    BindingError,
    NoMatchError,
    NormalizationError,
    RuleParameterError,
    SizeOverflowError,
    UnknownRuleError,
    ZxFormatError,
)
from app.models import (
    DerivationReport,
    Direction,
    StepReport,
    StepSpec,
    StepStatus,
    VerdictKind,
    ZxDerivationScript,
    ZxKind,
)
from app.zx import (
    ZxBuilder,
    ZxDiagram,
    circuit_to_zx,
    other_colour,
    parse_zx,
    print_zx,
    zx_iso,
    zx_normalize,
    zx_to_matrix,
)

logger = logging.getLogger(__name__)

GREEN = ZxKind.Z.value
RED = ZxKind.X.value
NO_OP_RULE = "T"


# =========================
# 規則とアンカー
# =========================

@dataclass(frozen=True)
class ZxRule:
    """左辺 ↔ 右辺 の規則インスタンス（両辺とも境界頂点が先頭の番号付け）"""
    rule_id: str
    params: Tuple[Tuple[str, Any], ...]
    lhs: ZxDiagram
    rhs: ZxDiagram

    def side(self, direction: str) -> ZxDiagram:
        return self.rhs if direction == Direction.RL else self.lhs

    def target(self, direction: str) -> ZxDiagram:
        return self.lhs if direction == Direction.RL else self.rhs

    @property
    def param_dict(self) -> Dict[str, Any]:
        return dict(self.params)


@dataclass(frozen=True)
class ZxBinding:
    """
    パターンからホストへの対応

    vertex_map: パターン内部頂点 → ホスト頂点
    leg_map: パターン境界頂点 → ホストの外側頂点（脚の接続先）
    wires: パターン中で境界同士を直結する辺 (b1, b2)
    """
    vertex_map: Tuple[Tuple[int, int], ...]
    leg_map: Tuple[Tuple[int, int], ...]
    wires: Tuple[Tuple[int, int], ...] = ()

    @property
    def vertices(self) -> Dict[int, int]:
        return dict(self.vertex_map)

    @property
    def legs(self) -> Dict[int, int]:
        return dict(self.leg_map)

    def pins(self, pattern_id: int) -> Optional[int]:
        """パターンIDに対応するホストID"""
        return self.vertices.get(pattern_id, self.legs.get(pattern_id))

    def sort_key(self) -> Tuple:
        return (
            tuple(host for _, host in self.vertex_map),
            tuple(host for _, host in self.leg_map),
        )


def as_pattern(diagram: ZxDiagram) -> ZxDiagram:
    """入力・出力・内部（元のID順）の順に 0 から振り直す"""
    order = diagram.inputs + diagram.outputs + diagram.interior()
    mapping = {old: new for new, old in enumerate(order)}
    return ZxDiagram(nx.relabel_nodes(nx.MultiGraph(diagram.graph), mapping, copy=True))


def _make_rule(rule_id: str, params: Dict[str, Any], lhs: ZxDiagram, rhs: ZxDiagram) -> ZxRule:
    lhs = as_pattern(zx_normalize(lhs))
    rhs = as_pattern(zx_normalize(rhs))
    if (lhs.n_inputs, lhs.n_outputs) != (rhs.n_inputs, rhs.n_outputs):
        raise RuleParameterError(
            f"{rule_id}: sides have different interfaces "
            f"{lhs.n_inputs}->{lhs.n_outputs} and {rhs.n_inputs}->{rhs.n_outputs}"
        )
    return ZxRule(rule_id, tuple(sorted(params.items())), lhs, rhs)


# =========================
# 基本規則
# =========================

def _open(inputs: int, outputs: int) -> Tuple[ZxBuilder, List[int], List[int]]:
    builder = ZxBuilder()
    ins = [builder.input(i) for i in range(inputs)]
    outs = [builder.output(j) for j in range(outputs)]
    return builder, ins, outs


def _fusion(colour: str) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        alpha, beta = p.phase("alpha"), p.phase("beta")
        inputs, outputs = p.arity("inputs", 1), p.arity("outputs", 1)
        p.total("inputs", "outputs")
        edges = p.arity("edges", 1, low=1)

        b, ins, outs = _open(inputs, outputs)
        first, second = b.spider(colour, alpha), b.spider(colour, beta)
        for v in ins:
            b.edge(v, first)
        for v in outs:
            b.edge(second, v)
        b.edge(first, second, edges)
        lhs = b.build()

        b, ins, outs = _open(inputs, outputs)
        fused = b.spider(colour, alpha + beta)
        for v in ins + outs:
            b.edge(v, fused)
        return lhs, b.build()
    return build


def _identity(colour: str) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        b, (i,), (o,) = _open(1, 1)
        b.chain(i, b.spider(colour), o)
        lhs = b.build()
        b, (i,), (o,) = _open(1, 1)
        b.edge(i, o)
        return lhs, b.build()
    return build


def _copy(colour: str, state_phase: int) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    """反対色の状態が colour のスパイダーを通って各脚に複製される"""
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        legs = p.arity("legs", 1, low=1)
        b, _, outs = _open(0, legs)
        state = b.spider(other_colour(colour), state_phase)
        spider = b.spider(colour)
        b.edge(state, spider)
        for v in outs:
            b.edge(spider, v)
        lhs = b.build()

        b, _, outs = _open(0, legs)
        for v in outs:
            b.edge(b.spider(other_colour(colour), state_phase), v)
        return lhs, b.build()
    return build


def _bialgebra(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
    b, ins, outs = _open(2, 2)
    greens = [b.z() for _ in ins]
    reds = [b.x() for _ in outs]
    for v, g in zip(ins, greens):
        b.edge(v, g)
    for r, v in zip(reds, outs):
        b.edge(r, v)
    for g in greens:
        for r in reds:
            b.edge(g, r)
    lhs = b.build()

    b, ins, outs = _open(2, 2)
    red, green = b.x(), b.z()
    for v in ins:
        b.edge(v, red)
    b.edge(red, green)
    for v in outs:
        b.edge(green, v)
    return lhs, b.build()


def _pi_commute(colour: str) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    """反対色の π が colour の α を越えると −α になる"""
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        alpha = p.phase("alpha")
        b, (i,), (o,) = _open(1, 1)
        b.chain(i, b.spider(other_colour(colour), 2), b.spider(colour, alpha), o)
        lhs = b.build()
        b, (i,), (o,) = _open(1, 1)
        b.chain(i, b.spider(colour, -alpha), b.spider(other_colour(colour), 2), o)
        return lhs, b.build()
    return build


def _colour_change(colour: str) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    """全脚に H を付けた colour のスパイダー ↔ 反対色のスパイダー"""
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        alpha = p.phase("alpha")
        inputs, outputs = p.arity("inputs", 1), p.arity("outputs", 1)
        p.total("inputs", "outputs")

        b, ins, outs = _open(inputs, outputs)
        spider = b.spider(colour, alpha)
        for v in ins + outs:
            b.chain(v, b.hbox(), spider)
        lhs = b.build()

        b, ins, outs = _open(inputs, outputs)
        swapped = b.spider(other_colour(colour), alpha)
        for v in ins + outs:
            b.edge(v, swapped)
        return lhs, b.build()
    return build


def _hadamard(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
    b, (i,), (o,) = _open(1, 1)
    b.chain(i, b.hbox(), o)
    lhs = b.build()
    b, (i,), (o,) = _open(1, 1)
    b.chain(i, b.z(1), b.x(1), b.z(1), o)
    return lhs, b.build()


# =========================
# 回路方程式に似せた規則
# =========================

def _image(circuit_text: str) -> ZxDiagram:
    return circuit_to_zx(parse_circuit(circuit_text))


def _circuit_image(rule_id: str, variant: int) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        rule = circ_rule_catalog(rule_id, variant)
        return circuit_to_zx(rule.lhs), circuit_to_zx(rule.rhs)
    return build


def _snake_to_wire(fragment: str) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        return _image(CIRCUIT_FRAGMENTS[fragment]), _image("input a\noutput a")
    return build


def _red_fusion(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
    alpha, beta = p.phase("alpha"), p.phase("beta")
    b, (i,), (o,) = _open(1, 1)
    b.chain(i, b.x(alpha), b.x(beta), o)
    lhs = b.build()
    b, (i,), (o,) = _open(1, 1)
    b.chain(i, b.x(alpha + beta), o)
    return lhs, b.build()


def _prune(colour: str) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    """恒等スパイダーにぶら下がった同色の状態を取り除く"""
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        b, (i,), (o,) = _open(1, 1)
        middle = b.spider(colour)
        state = b.spider(colour)
        b.chain(i, middle, o)
        b.edge(middle, state)
        lhs = b.build()
        b, (i,), (o,) = _open(1, 1)
        b.edge(i, o)
        return lhs, b.build()
    return build


def _copy_through_cnot(phase: int) -> Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]:
    """制御に入った X(phase) 状態が CNOT を抜けて標的に移る"""
    def build(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
        b, (i,), (o0, o1) = _open(1, 2)
        state, control, target = b.x(phase), b.z(), b.x()
        b.edge(state, control)
        b.edge(control, o0)
        b.edge(control, target)
        b.edge(target, i)
        b.edge(target, o1)
        lhs = b.build()

        b, (i,), (o0, o1) = _open(1, 2)
        b.edge(b.x(phase), o0)
        if phase:
            b.chain(i, b.x(phase), o1)
        else:
            b.edge(i, o1)
        return lhs, b.build()
    return build


def _crossed_bialgebra(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
    b, (i0, i1), (o0, o1) = _open(2, 2)
    a, bz, c, d = b.x(), b.z(), b.z(), b.x()
    b.edge(i0, a)
    b.edge(i1, bz)
    b.edge(c, o0)
    b.edge(d, o1)
    for u, v in ((a, bz), (a, c), (d, bz), (d, c)):
        b.edge(u, v)
    lhs = b.build()

    b, (i0, i1), (o0, o1) = _open(2, 2)
    green, red = b.z(), b.x()
    b.edge(i0, green)
    b.edge(green, o1)
    b.edge(i1, red)
    b.edge(red, o0)
    b.edge(green, red)
    return lhs, b.build()


def _colour_change_circuit(p: RuleParams) -> Tuple[ZxDiagram, ZxDiagram]:
    alpha = p.phase("alpha")
    inputs, outputs = p.arity("inputs", 1), p.arity("outputs", 1)
    p.total("inputs", "outputs")
    head = p.flag("head", inputs > 0)
    tail = p.flag("tail", outputs > 0)
    hadamard_ends = p.flag("hadamard_ends", True)
    lhs, rhs = ccirc_sides(
        alpha, inputs, outputs, head, tail, variant=0, max_legs=p.max_arity, hadamard_ends=hadamard_ends
    )
    return circuit_to_zx(lhs), circuit_to_zx(rhs)


ZX_RULES: Dict[str, Callable[[RuleParams], Tuple[ZxDiagram, ZxDiagram]]] = {
    "S1.green": _fusion(GREEN),
    "S1.red": _fusion(RED),
    "S2.green": _identity(GREEN),
    "S2.red": _identity(RED),
    "B1.green": _copy(GREEN, 0),
    "B1.red": _copy(RED, 0),
    "B2": _bialgebra,
    "K1.green": _copy(GREEN, 2),
    "K1.red": _copy(RED, 2),
    "K2.green": _pi_commute(GREEN),
    "K2.red": _pi_commute(RED),
    "C.red": _colour_change(RED),
    "C.green": _colour_change(GREEN),
    "H": _hadamard,
    "S1'": _circuit_image("S1circ", 1),
    "S2'": _circuit_image("S2circ", 1),
    "S3'": _circuit_image("S3circ", 3),
    "S4'.left": _snake_to_wire("B.c4"),
    "S4'.right": _snake_to_wire("B.c1"),
    "S5'": _circuit_image("S5circ", 1),
    "S6'": _red_fusion,
    "So'.green": _prune(GREEN),
    "So'.red": _prune(RED),
    "B1'": _copy_through_cnot(0),
    "B2'": _crossed_bialgebra,
    "K1'": _copy_through_cnot(2),
    "C'": _colour_change_circuit,
}

ZX_ALIASES: Dict[str, str] = {
    "K2": "K2.green",
    "K2'": "K2.red",
    "C": "C.red",
    "H'": "H",
    "S'": "So'.green",
}


def resolve_zx_rule_id(rule_id: str) -> str:
    canonical = ZX_ALIASES.get(rule_id, rule_id)
    if canonical not in ZX_RULES:
        raise UnknownRuleError(f"unknown ZX rule '{rule_id}'")
    return canonical


def zx_rule_catalog(rule_id: str, params: Optional[Dict[str, Any]] = None, max_arity: int = 6) -> ZxRule:
    """規則IDとパラメータから両辺を組み立てる"""
    canonical = resolve_zx_rule_id(rule_id)
    p = RuleParams(canonical, params, max_arity)
    lhs, rhs = ZX_RULES[canonical](p)
    return _make_rule(canonical, p.done(), lhs, rhs)


def zx_sweep(max_arity: int = 6, max_edges: int = 3) -> Iterator[Tuple[str, Dict[str, Any]]]:
    """健全性スイープで検査する (規則ID, パラメータ) の列"""
    phases = range(4)
    arities = [(i, o) for i in range(max_arity + 1) for o in range(max_arity + 1 - i)]
    for rule_id in ZX_RULES:
        if rule_id.startswith("S1."):
            for alpha, beta in itertools.product(phases, phases):
                for (inputs, outputs), edges in itertools.product(arities, range(1, max_edges + 1)):
                    yield rule_id, {"alpha": alpha, "beta": beta, "inputs": inputs,
                                    "outputs": outputs, "edges": edges}
        elif rule_id.startswith("C."):
            for alpha, (inputs, outputs) in itertools.product(phases, arities):
                yield rule_id, {"alpha": alpha, "inputs": inputs, "outputs": outputs}
        elif rule_id.startswith(("B1.", "K1.")):
            for legs in range(1, max_arity + 1):
                yield rule_id, {"legs": legs}
        elif rule_id.startswith("K2."):
            for alpha in phases:
                yield rule_id, {"alpha": alpha}
        elif rule_id == "S6'":
            for alpha, beta in itertools.product(phases, phases):
                yield rule_id, {"alpha": alpha, "beta": beta}
        elif rule_id == "C'":
            for alpha, (inputs, outputs) in itertools.product(phases, arities):
                for head, tail in itertools.product((False, True), repeat=2):
                    if (head and inputs == 0) or (tail and outputs == 0):
                        continue
                    params = {"alpha": alpha, "inputs": inputs, "outputs": outputs, "head": head, "tail": tail}
                    yield rule_id, params
                    if not (head and tail):
                        yield rule_id, {**params, "hadamard_ends": False}
        else:
            yield rule_id, {}


# =========================
# マッチ
# =========================

def _pattern_structure(pattern: ZxDiagram) -> Tuple[Dict[int, List[int]], List[Tuple[int, int]]]:
    """内部頂点ごとの脚（境界頂点）と、境界同士の直結辺"""
    legs: Dict[int, List[int]] = {v: [] for v in pattern.interior()}
    wires: List[Tuple[int, int]] = []
    for boundary in pattern.inputs + pattern.outputs:
        (neighbour,) = pattern.neighbors(boundary)
        if pattern.is_boundary(neighbour):
            if boundary < neighbour:
                wires.append((boundary, neighbour))
        else:
            legs[neighbour].append(boundary)
    return legs, wires


def _search_order(pattern: ZxDiagram) -> List[int]:
    """内部頂点を連結成分ごとに幅優先でたどる順"""
    interior = pattern.interior()
    seen: Set[int] = set()
    order: List[int] = []
    for root in interior:
        if root in seen:
            continue
        seen.add(root)
        queue = deque([root])
        while queue:
            vertex = queue.popleft()
            order.append(vertex)
            for neighbour in pattern.neighbors(vertex):
                if neighbour not in seen and not pattern.is_boundary(neighbour):
                    seen.add(neighbour)
                    queue.append(neighbour)
    return order


def _compatible(pattern: ZxDiagram, p: int, host: ZxDiagram, h: int) -> bool:
    return (
        not host.is_boundary(h)
        and host.kind(h) == pattern.kind(p)
        and host.phase(h) == pattern.phase(p)
        and host.degree(h) == pattern.degree(p)
    )


def _interior_maps(pattern: ZxDiagram, host: ZxDiagram) -> Iterator[Dict[int, int]]:
    order = _search_order(pattern)
    candidates_all = host.interior()
    mapping: Dict[int, int] = {}
    used: Set[int] = set()

    def consistent(p: int, h: int) -> bool:
        for q, g in mapping.items():
            if pattern.edge_count(p, q) != host.edge_count(h, g):
                return False
        return pattern.edge_count(p, p) == host.edge_count(h, h)

    def extend(depth: int) -> Iterator[Dict[int, int]]:
        if depth == len(order):
            yield dict(mapping)
            return
        p = order[depth]
        anchor = next((q for q in pattern.neighbors(p) if q in mapping), None)
        pool = host.neighbors(mapping[anchor]) if anchor is not None else candidates_all
        for h in pool:
            if h in used or not _compatible(pattern, p, host, h) or not consistent(p, h):
                continue
            mapping[p] = h
            used.add(h)
            yield from extend(depth + 1)
            del mapping[p]
            used.discard(h)

    yield from extend(0)


def _external_ends(host: ZxDiagram, vertex: int, image: Set[int]) -> List[int]:
    ends: List[int] = []
    for neighbour in host.neighbors(vertex):
        if neighbour not in image:
            ends.extend([neighbour] * host.edge_count(vertex, neighbour))
    return ends


def _leg_assignments(
    host: ZxDiagram, vertex_map: Dict[int, int], legs: Dict[int, List[int]]
) -> Iterator[Dict[int, int]]:
    image = set(vertex_map.values())
    per_vertex: List[List[Dict[int, int]]] = []
    for p in sorted(legs):
        ends = _external_ends(host, vertex_map[p], image)
        options = sorted(set(itertools.permutations(ends, len(legs[p]))))
        per_vertex.append([dict(zip(legs[p], option)) for option in options])
    for combination in itertools.product(*per_vertex):
        merged: Dict[int, int] = {}
        for part in combination:
            merged.update(part)
        yield merged


def _wire_assignments(
    host: ZxDiagram, image: Set[int], wires: List[Tuple[int, int]]
) -> Iterator[Dict[int, int]]:
    available = [(u, v) for u, v in host.edges() if u not in image and v not in image]
    seen: Set[Tuple[Tuple[int, int], ...]] = set()

    def extend(depth: int, taken: Set[int], assignment: Dict[int, int]) -> Iterator[Dict[int, int]]:
        if depth == len(wires):
            key = tuple(sorted(assignment.items()))
            if key not in seen:
                seen.add(key)
                yield dict(assignment)
            return
        b1, b2 = wires[depth]
        for number, (u, v) in enumerate(available):
            if number in taken:
                continue
            for x, y in {(u, v), (v, u)}:
                assignment[b1], assignment[b2] = x, y
                yield from extend(depth + 1, taken | {number}, assignment)
        assignment.pop(b1, None)
        assignment.pop(b2, None)

    yield from extend(0, set(), {})


def find_zx_matches(host: ZxDiagram, rule: ZxRule, direction: str = Direction.LR) -> List[ZxBinding]:
    """方向付きパターンの出現をすべて列挙する（ホストIDで整列）"""
    pattern = rule.side(direction)
    legs, wires = _pattern_structure(pattern)
    bindings: Set[ZxBinding] = set()
    for vertex_map in _interior_maps(pattern, host):
        image = set(vertex_map.values())
        for leg_map in _leg_assignments(host, vertex_map, legs):
            for wire_map in _wire_assignments(host, image, wires):
                merged = {**leg_map, **wire_map}
                bindings.add(ZxBinding(
                    vertex_map=tuple(sorted(vertex_map.items())),
                    leg_map=tuple(sorted(merged.items())),
                    wires=tuple(wires),
                ))
    result = sorted(bindings, key=ZxBinding.sort_key)
    logger.debug(f"{rule.rule_id} {direction}: {len(result)} match(es)")
    return result


def filter_bindings(bindings: List[ZxBinding], fixed: Dict[int, int]) -> List[ZxBinding]:
    return [b for b in bindings if all(b.pins(pid) == hid for pid, hid in fixed.items())]


# =========================
# 適用
# =========================

def _check_binding(host: ZxDiagram, pattern: ZxDiagram, binding: ZxBinding) -> None:
    legs, wires = _pattern_structure(pattern)
    vertex_map = binding.vertices
    leg_map = binding.legs

    if set(vertex_map) != set(pattern.interior()):
        raise BindingError("binding does not cover the pattern interior")
    if len(set(vertex_map.values())) != len(vertex_map):
        raise BindingError("binding is not injective")
    if set(leg_map) != set(pattern.inputs + pattern.outputs):
        raise BindingError("binding does not cover the pattern boundary")
    if sorted(binding.wires) != sorted(wires):
        raise BindingError("binding wires do not match the pattern")
    for h in list(vertex_map.values()) + list(leg_map.values()):
        if h not in host.graph:
            raise BindingError(f"host vertex {h} does not exist")
    image = set(vertex_map.values())

    for p, h in vertex_map.items():
        if not _compatible(pattern, p, host, h):
            raise BindingError(f"host vertex {h} does not match pattern vertex {p}")
        for q, g in vertex_map.items():
            if pattern.edge_count(p, q) != host.edge_count(h, g):
                raise BindingError(f"edges between {h} and {g} do not match the pattern")
        expected = Counter(leg_map[b] for b in legs[p])
        actual = Counter(_external_ends(host, h, image))
        if expected != actual:
            raise BindingError(f"legs of host vertex {h} do not match the pattern")

    wire_use = Counter(frozenset((leg_map[b1], leg_map[b2])) for b1, b2 in wires)
    for pair, count in wire_use.items():
        ends = tuple(pair) if len(pair) == 2 else tuple(pair) * 2
        if set(ends) & image:
            raise BindingError("a bound wire touches the matched image")
        if host.edge_count(*ends) < count:
            raise BindingError(f"host has no wire between {ends[0]} and {ends[1]}")


def apply_zx_rule(host: ZxDiagram, rule: ZxRule, direction: str, binding: ZxBinding) -> ZxDiagram:
    """マッチした左辺の内部を右辺で置き換え、脚をつなぎ直して正規化する"""
    pattern = rule.side(direction)
    replacement = rule.target(direction)
    _check_binding(host, pattern, binding)
    leg_map = binding.legs

    graph = nx.MultiGraph(host.graph)
    graph.remove_nodes_from(binding.vertices.values())
    for b1, b2 in binding.wires:
        graph.remove_edge(leg_map[b1], leg_map[b2])

    fresh = host.fresh_id()
    placed: Dict[int, int] = {}
    for offset, vertex in enumerate(replacement.interior()):
        placed[vertex] = fresh + offset
        graph.add_node(
            fresh + offset,
            kind=replacement.kind(vertex),
            phase=replacement.phase(vertex),
            index=None,
        )
    for u, v in replacement.edges():
        graph.add_edge(placed.get(u, leg_map.get(u)), placed.get(v, leg_map.get(v)))

    try:
        return zx_normalize(ZxDiagram(graph))
    except (NormalizationError, ZxFormatError) as e:
        raise BindingError(f"rewrite leaves an invalid diagram: {e}")


# =========================
# 導出検査
# =========================

def _oracle_matrix(diagram: ZxDiagram, max_legs: int):
    try:
        return zx_to_matrix(diagram, max_rank=max_legs)
    except SizeOverflowError:
        return None


def verify_zx_derivation(
    script: ZxDerivationScript,
    max_arity: int = 6,
    oracle_max_legs: int = 12,
) -> DerivationReport:
    """各ステップを適用し、中間図を初期図とオラクル比較し、最後に目標と同型か確かめる"""
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
        current = zx_normalize(parse_zx(script.initial))
        target = zx_normalize(parse_zx(script.target))
    except (ZxFormatError, NormalizationError) as e:
        return reject(0, None, f"invalid diagram: {e}")
    reference = _oracle_matrix(current, oracle_max_legs)

    for index, step in enumerate(script.steps, start=1):
        if step.rule == NO_OP_RULE:
            steps.append(StepReport(index=index, rule=step.rule, direction=step.direction, status=StepStatus.OK))
            continue
        try:
            rule = zx_rule_catalog(step.rule, step.params, max_arity)
        except UnknownRuleError as e:
            return reject(index, step, f"unknown rule: {e}")
        except RuleParameterError as e:
            return reject(index, step, f"parameter error: {e}")

        bindings = filter_bindings(
            find_zx_matches(current, rule, step.direction), step.binding.fixed_pairs()
        )
        if step.binding.match >= len(bindings):
            return reject(
                index, step,
                f"no match: {rule.rule_id} {step.direction} has {len(bindings)} binding(s), "
                f"anchor asks for #{step.binding.match}",
                matches=len(bindings),
            )
        try:
            current = apply_zx_rule(current, rule, step.direction, bindings[step.binding.match])
        except BindingError as e:
            return reject(index, step, f"binding error: {e}", matches=len(bindings))

        if reference is not None:
            after = _oracle_matrix(current, oracle_max_legs)
            if after is not None and mat_proportional(after, reference).kind == VerdictKind.DIFFERENT:
                logger.warning(f"step {index} ({rule.rule_id}) changed the diagram's meaning")
                return reject(index, step, "unsound step: oracle verdict Different", matches=len(bindings))

        logger.debug(f"step {index}: {rule.rule_id} {step.direction} -> {len(current.interior())} interior")
        steps.append(StepReport(
            index=index, rule=step.rule, direction=step.direction,
            status=StepStatus.OK, matches=len(bindings),
        ))

    if not zx_iso(current, target):
        logger.debug(f"final diagram:\n{print_zx(current)}")
        return reject(len(script.steps) + 1, None, "final diagram differs from target")
    logger.info(f"{script.name or 'derivation'} accepted ({len(steps)} steps)")
    return DerivationReport(name=script.name, accepted=True, steps=steps)


def run_zx_steps(diagram: ZxDiagram, steps: List[StepSpec], max_arity: int = 6) -> ZxDiagram:
    """検査なしでステップを順に適用する（apply コマンド用）"""
    for step in steps:
        if step.rule == NO_OP_RULE:
            continue
        rule = zx_rule_catalog(step.rule, step.params, max_arity)
        bindings = filter_bindings(find_zx_matches(diagram, rule, step.direction), step.binding.fixed_pairs())
        if step.binding.match >= len(bindings):
            raise NoMatchError(f"{rule.rule_id}: no binding #{step.binding.match} ({len(bindings)} found)")
        diagram = apply_zx_rule(diagram, rule, step.direction, bindings[step.binding.match])
    return diagram


# =========================
# ランダム書き換え
# =========================

@lru_cache()
def _sweep_instances(max_arity: int) -> Tuple[Tuple[str, Dict[str, Any]], ...]:
    return tuple(zx_sweep(max_arity, max_edges=1))


def random_zx_rewrite(
    host: ZxDiagram,
    rng: np.random.Generator,
    max_arity: int = 2,
    attempts: int = 50,
) -> Optional[Tuple[ZxRule, str, ZxDiagram]]:
    """スイープからランダムに選んだ規則をランダムな向きとマッチで1回適用する（見つからなければ None）"""
    instances = _sweep_instances(max_arity)
    for _ in range(attempts):
        rule_id, params = instances[int(rng.integers(0, len(instances)))]
        direction = Direction.LR.value if rng.integers(0, 2) == 0 else Direction.RL.value
        rule = zx_rule_catalog(rule_id, params, max_arity)
        bindings = find_zx_matches(host, rule, direction)
        if not bindings:
            continue
        binding = bindings[int(rng.integers(0, len(bindings)))]
        try:
            return rule, direction, apply_zx_rule(host, rule, direction, binding)
        except BindingError as e:
            logger.debug(f"{rule.rule_id} {direction}: {e}")
    return None
