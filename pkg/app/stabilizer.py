"""
安定化子オラクル
回路の Choi 状態の安定化子群をタブローで求め、スカラー倍を無視した等価性を判定する

行は (x, z, r) で (-1)^r · ⊗ P_j を表す（(x, z) = (1, 1) は Y）。
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.circuit import PORTS, Circuit, circuit_to_matrix
from app.exact import mat_proportional
from app.exceptions import ArityError, TableauError
from app.models import GateKind, Verdict

logger = logging.getLogger(__name__)

_PAULI = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {label: bits for bits, label in _PAULI.items()}


def _g(x1: np.ndarray, z1: np.ndarray, x2: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """P1·P2 を計算するときに現れる i の指数"""
    x1, z1, x2, z2 = (np.asarray(a, dtype=np.int64) for a in (x1, z1, x2, z2))
    return np.where(
        (x1 == 1) & (z1 == 1), z2 - x2,
        np.where(
            (x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
            np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0),
        ),
    )


def _multiply(
    left: Tuple[np.ndarray, np.ndarray, int],
    right: Tuple[np.ndarray, np.ndarray, int],
) -> Tuple[np.ndarray, np.ndarray, int]:
    """可換な2行の積（符号つき）"""
    lx, lz, lr = left
    rx, rz, rr = right
    total = (2 * lr + 2 * rr + int(_g(rx, rz, lx, lz).sum())) % 4
    if total % 2:
        raise TableauError("product of anticommuting generators")
    return lx ^ rx, lz ^ rz, total // 2


def _symplectic(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """全行の組の反可換性（1 なら反可換）"""
    return (x.astype(np.int64) @ z.T.astype(np.int64) + z.astype(np.int64) @ x.T.astype(np.int64)) % 2


def _gf2_combination(rows: np.ndarray, target: np.ndarray) -> Optional[np.ndarray]:
    """target を rows の XOR で表す行番号の集合（表せなければ None）"""
    work = rows.copy() % 2
    m = work.shape[0]
    combo = np.eye(m, dtype=np.uint8)
    pivots: List[Tuple[int, int]] = []
    rank = 0
    for col in range(work.shape[1]):
        candidates = np.flatnonzero(work[rank:, col]) if rank < m else []
        if len(candidates) == 0:
            continue
        pivot = rank + int(candidates[0])
        work[[rank, pivot]] = work[[pivot, rank]]
        combo[[rank, pivot]] = combo[[pivot, rank]]
        for i in range(m):
            if i != rank and work[i, col]:
                work[i] ^= work[rank]
                combo[i] ^= combo[rank]
        pivots.append((rank, col))
        rank += 1
        if rank == m:
            break
    residual = target.copy() % 2
    used = np.zeros(m, dtype=np.uint8)
    for row, col in pivots:
        if residual[col]:
            residual ^= work[row]
            used ^= combo[row]
    if residual.any():
        return None
    return np.flatnonzero(used)


class StabTableau:
    """
    安定化子群の生成元（または零演算子を表す Zero）

    canonical で作ったものは (x0, z0, x1, z1, …) の列順で既約行階段形。
    """

    __slots__ = ("n", "x", "z", "signs", "zero")

    def __init__(self, n: int, x: np.ndarray, z: np.ndarray, signs: np.ndarray, zero: bool = False):
        self.n = n
        self.x = np.asarray(x, dtype=np.uint8).reshape(-1, n)
        self.z = np.asarray(z, dtype=np.uint8).reshape(-1, n)
        self.signs = np.asarray(signs, dtype=np.uint8).reshape(-1)
        self.zero = zero
        for array in (self.x, self.z, self.signs):
            array.flags.writeable = False

    @classmethod
    def zero_state(cls, n: int) -> "StabTableau":
        empty = np.zeros((0, n), dtype=np.uint8)
        return cls(n, empty, empty, np.zeros(0, dtype=np.uint8), zero=True)

    @property
    def rows(self) -> int:
        return self.x.shape[0]

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray, int]:
        return self.x[i].copy(), self.z[i].copy(), int(self.signs[i])

    def dump(self) -> str:
        """1行1生成元の "±P…" 形式"""
        if self.zero:
            return "Zero"
        lines = []
        for i in range(self.rows):
            sign = "-" if self.signs[i] else "+"
            lines.append(sign + "".join(_PAULI[(int(a), int(b))] for a, b in zip(self.x[i], self.z[i])))
        return "\n".join(lines)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StabTableau):
            return NotImplemented
        if self.zero or other.zero:
            return self.zero == other.zero and self.n == other.n
        return (
            self.n == other.n
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.signs, other.signs)
        )

    def __hash__(self) -> int:
        return hash(self.dump())

    def __repr__(self) -> str:
        return f"StabTableau(n={self.n}, zero={self.zero}, rows={self.rows})"


def tableau_from_strings(generators: Sequence[str]) -> StabTableau:
    """["+ZZ", "-YY"] のような Pauli 文字列から（正規化せずに）作る"""
    rows = []
    for text in generators:
        sign = 0
        body = text.strip()
        if body[:1] in "+-":
            sign = int(body[0] == "-")
            body = body[1:]
        try:
            bits = [_BITS[ch] for ch in body.upper()]
        except KeyError:
            raise TableauError(f"invalid Pauli string '{text}'")
        rows.append((bits, sign))
    n = len(rows[0][0]) if rows else 0
    if any(len(bits) != n for bits, _ in rows):
        raise TableauError("Pauli strings have different lengths")
    x = np.array([[b[0] for b in bits] for bits, _ in rows], dtype=np.uint8).reshape(-1, n)
    z = np.array([[b[1] for b in bits] for bits, _ in rows], dtype=np.uint8).reshape(-1, n)
    signs = np.array([sign for _, sign in rows], dtype=np.uint8)
    return StabTableau(n, x, z, signs)


def tableau_canonical(tableau: StabTableau) -> StabTableau:
    """
    交互列順 (x0, z0, x1, z1, …) の既約行階段形

    反可換な組、または −I を生成する組は TableauError。従属な行は落とす。
    """
    if tableau.zero:
        return tableau
    n = tableau.n
    if tableau.rows and _symplectic(tableau.x, tableau.z).any():
        raise TableauError("generators do not commute")
    rows = [tableau.row(i) for i in range(tableau.rows)]

    def bit(row: Tuple[np.ndarray, np.ndarray, int], col: int) -> int:
        return int(row[0][col // 2] if col % 2 == 0 else row[1][col // 2])

    rank = 0
    for col in range(2 * n):
        pivot = next((i for i in range(rank, len(rows)) if bit(rows[i], col)), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and bit(rows[i], col):
                rows[i] = _multiply(rows[i], rows[rank])
        rank += 1
    for x, z, sign in rows[rank:]:
        if sign:
            raise TableauError("generators produce -I")
    kept = rows[:rank]
    return StabTableau(
        n,
        np.array([r[0] for r in kept], dtype=np.uint8).reshape(-1, n),
        np.array([r[1] for r in kept], dtype=np.uint8).reshape(-1, n),
        np.array([r[2] for r in kept], dtype=np.uint8),
    )


# =========================
# Choi 状態のシミュレーション
# =========================

class _ChoiSimulator:
    """列を増減できる安定化子状態（行数 = 列数 の純粋状態）"""

    def __init__(self):
        self.x = np.zeros((0, 0), dtype=np.uint8)
        self.z = np.zeros((0, 0), dtype=np.uint8)
        self.r = np.zeros(0, dtype=np.uint8)
        self.labels: List[object] = []
        self.zero = False

    def column(self, label: object) -> int:
        return self.labels.index(label)

    def add_qubit(self, label: object) -> int:
        rows = self.x.shape[0]
        self.x = np.hstack([self.x, np.zeros((rows, 1), dtype=np.uint8)])
        self.z = np.hstack([self.z, np.zeros((rows, 1), dtype=np.uint8)])
        self.labels.append(label)
        return len(self.labels) - 1

    def add_row(self, xs: Dict[int, int], zs: Dict[int, int], sign: int = 0) -> None:
        n = len(self.labels)
        x = np.zeros((1, n), dtype=np.uint8)
        z = np.zeros((1, n), dtype=np.uint8)
        for q, v in xs.items():
            x[0, q] = v
        for q, v in zs.items():
            z[0, q] = v
        self.x = np.vstack([self.x, x])
        self.z = np.vstack([self.z, z])
        self.r = np.append(self.r, np.uint8(sign))

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray, int]:
        return self.x[i].copy(), self.z[i].copy(), int(self.r[i])

    def set_row(self, i: int, row: Tuple[np.ndarray, np.ndarray, int]) -> None:
        self.x[i], self.z[i], self.r[i] = row[0], row[1], row[2]

    # --- ゲート ---

    def hadamard(self, q: int) -> None:
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def phase(self, q: int) -> None:
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def cnot(self, c: int, t: int) -> None:
        self.r ^= self.x[:, c] & self.z[:, t] & (self.x[:, t] ^ self.z[:, c] ^ 1)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def rz(self, q: int, k: int) -> None:
        for _ in range(k % 4):
            self.phase(q)

    def rx(self, q: int, k: int) -> None:
        self.hadamard(q)
        self.rz(q, k)
        self.hadamard(q)

    # --- 後選択 ---

    def post_zero(self, q: int) -> None:
        """⟨0| で後選択して列 q を取り除く（確率0なら zero）"""
        rows = self.x.shape[0]
        anticommuting = np.flatnonzero(self.x[:, q])
        if len(anticommuting):
            p = int(anticommuting[0])
            for h in anticommuting[1:]:
                self.set_row(int(h), _multiply(self.row(int(h)), self.row(p)))
            x = np.zeros(len(self.labels), dtype=np.uint8)
            z = np.zeros(len(self.labels), dtype=np.uint8)
            z[q] = 1
            self.set_row(p, (x, z, 0))
        else:
            target = np.zeros(2 * len(self.labels), dtype=np.uint8)
            target[len(self.labels) + q] = 1
            subset = _gf2_combination(np.hstack([self.x, self.z]), target)
            if subset is None:
                raise TableauError(f"Z on column {q} is neither random nor determined")
            product = self.row(int(subset[0]))
            for i in subset[1:]:
                product = _multiply(product, self.row(int(i)))
            if product[2]:
                logger.debug(f"postselection on column {q} has probability zero")
                self.zero = True
                return
            p = int(subset[0])
            self.set_row(p, product)
        for h in range(rows):
            if h != p and self.z[h, q]:
                self.set_row(h, _multiply(self.row(h), self.row(p)))
        keep = [i for i in range(rows) if i != p]
        self.x = np.delete(self.x[keep], q, axis=1)
        self.z = np.delete(self.z[keep], q, axis=1)
        self.r = self.r[keep]
        del self.labels[q]

    def post_plus(self, q: int) -> None:
        self.hadamard(q)
        self.post_zero(q)


def _run(circuit: Circuit) -> Tuple[_ChoiSimulator, List[object]]:
    sim = _ChoiSimulator()
    references = []
    for i, node in enumerate(circuit.input_nodes):
        ref = sim.add_qubit(("ref", i))
        wire = sim.add_qubit((node, 0))
        sim.add_row({ref: 1, wire: 1}, {})
        sim.add_row({}, {ref: 1, wire: 1})
        references.append(("ref", i))

    # ワイヤの列ラベルは生成側ポート
    for node in circuit.topological_order():
        if sim.zero:
            break
        kind = circuit.kind(node)
        if kind in (GateKind.INPUT.value, GateKind.OUTPUT.value):
            continue
        n_in, n_out = PORTS[kind]
        incoming = [circuit.producer(node, port) for port in range(n_in)]
        if kind in (GateKind.PREP0.value, GateKind.PREPPLUS.value):
            q = sim.add_qubit((node, 0))
            if kind == GateKind.PREP0.value:
                sim.add_row({}, {q: 1})
            else:
                sim.add_row({q: 1}, {})
            continue
        columns = [sim.column(label) for label in incoming]
        if kind == GateKind.POST0.value:
            sim.post_zero(columns[0])
            continue
        if kind == GateKind.POSTPLUS.value:
            sim.post_plus(columns[0])
            continue
        if kind == GateKind.CNOT.value:
            sim.cnot(columns[0], columns[1])
        elif kind == GateKind.H.value:
            sim.hadamard(columns[0])
        elif kind == GateKind.RZ.value:
            sim.rz(columns[0], circuit.phase(node))
        elif kind == GateKind.RX.value:
            sim.rx(columns[0], circuit.phase(node))
        outgoing = list(reversed(columns)) if kind == GateKind.SWAP.value else columns
        for port, q in enumerate(outgoing):
            sim.labels[q] = (node, port)
    outputs = [circuit.producer(node, 0) for node in circuit.output_nodes]
    return sim, outputs + references


def choi_tableau(circuit: Circuit) -> StabTableau:
    """Choi 状態（出力…, 参照…の順）の正規タブロー、または Zero"""
    sim, order = _run(circuit)
    n = circuit.n_inputs + circuit.n_outputs
    if sim.zero:
        return StabTableau.zero_state(n)
    permutation = [sim.column(label) for label in order]
    tableau = StabTableau(n, sim.x[:, permutation], sim.z[:, permutation], sim.r)
    return tableau_canonical(tableau)


def _check_arity(first: Circuit, second: Circuit) -> None:
    if (first.n_inputs, first.n_outputs) != (second.n_inputs, second.n_outputs):
        raise ArityError(
            f"arity mismatch: {first.n_inputs}->{first.n_outputs} vs {second.n_inputs}->{second.n_outputs}"
        )


def equiv_exact(first: Circuit, second: Circuit, max_qubits: int = 12) -> Verdict:
    """厳密行列をスカラー倍を無視して比較する"""
    _check_arity(first, second)
    return mat_proportional(circuit_to_matrix(first, max_qubits), circuit_to_matrix(second, max_qubits))


def equiv_tableau(first: Circuit, second: Circuit) -> bool:
    """Choi 状態の安定化子群が一致するか（両方 Zero も等価）"""
    _check_arity(first, second)
    return choi_tableau(first) == choi_tableau(second)


def conjugation_table(kind: str, phase: int = 0) -> Dict[str, str]:
    """1量子ビット Pauli ごとの U P U† を "±P…" で返す（例: cnot の "XI" → "+XX"）"""
    n_in, n_out = PORTS[kind]
    if n_in != n_out or n_in == 0:
        raise ValueError(f"{kind} is not a unitary gate")
    table: Dict[str, str] = {}
    for q in range(n_in):
        for label in ("X", "Y", "Z"):
            sim = _ChoiSimulator()
            for k in range(n_in):
                sim.add_qubit(k)
            xs, zs = _BITS[label]
            sim.add_row({q: xs}, {q: zs})
            if kind == GateKind.CNOT.value:
                sim.cnot(0, 1)
            elif kind == GateKind.SWAP.value:
                sim.x = sim.x[:, ::-1].copy()
                sim.z = sim.z[:, ::-1].copy()
            elif kind == GateKind.H.value:
                sim.hadamard(0)
            elif kind == GateKind.RZ.value:
                sim.rz(0, phase)
            elif kind == GateKind.RX.value:
                sim.rx(0, phase)
            key = "".join(label if k == q else "I" for k in range(n_in))
            result = StabTableau(n_in, sim.x, sim.z, sim.r)
            table[key] = result.dump()
    return table
