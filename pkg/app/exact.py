"""
厳密演算
Z[ω, 1/√2]（ω = e^{iπ/4}）の元と、その元を成分に持つ 2^m × 2^n 行列
"""
import cmath
import logging
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from app.exceptions import DimensionError
from app.models import Verdict, VerdictKind

logger = logging.getLogger(__name__)

Coefficients = Tuple[int, int, int, int]
ScalarLike = Union["CliffordScalar", int]

_OMEGA = cmath.exp(1j * cmath.pi / 4)


def _ring_mul(x: Coefficients, y: Coefficients) -> Coefficients:
    """Z[ω] の積（ω⁴ = −1 で次数を 4 未満に保つ）"""
    out = [0, 0, 0, 0]
    for i, xi in enumerate(x):
        if xi == 0:
            continue
        for j, yj in enumerate(y):
            if yj == 0:
                continue
            if i + j >= 4:
                out[i + j - 4] -= xi * yj
            else:
                out[i + j] += xi * yj
    return tuple(out)


def _times_sqrt2(x: Coefficients) -> Coefficients:
    # √2 = ω − ω³
    a, b, c, d = x
    return (b - d, a + c, b + d, c - a)


def _scale_by_sqrt2_power(x: Coefficients, power: int) -> Coefficients:
    factor = 2 ** (power // 2)
    out = tuple(v * factor for v in x)
    if power % 2:
        out = _times_sqrt2(out)
    return out


class CliffordScalar:
    """
    (a + bω + cω² + dω³) / √2^k の形の厳密スカラー

    生成時に正規化される: k = 0 か、分子が √2 で割り切れない。ゼロは (0,0,0,0;0)。
    """

    __slots__ = ("_num", "_k")

    def __init__(self, a: int = 0, b: int = 0, c: int = 0, d: int = 0, k: int = 0):
        num: Coefficients = (int(a), int(b), int(c), int(d))
        k = int(k)
        if k < 0:
            num = _scale_by_sqrt2_power(num, -k)
            k = 0
        num, k = self._canonical(num, k)
        object.__setattr__(self, "_num", num)
        object.__setattr__(self, "_k", k)

    def __setattr__(self, name, value):
        raise AttributeError("CliffordScalar is immutable")

    @staticmethod
    def _canonical(num: Coefficients, k: int) -> Tuple[Coefficients, int]:
        if not any(num):
            return (0, 0, 0, 0), 0
        while k > 0:
            doubled = _times_sqrt2(num)
            if any(v % 2 for v in doubled):
                break
            num = tuple(v // 2 for v in doubled)
            k -= 1
        return num, k

    # --- 構築ヘルパー ---

    @classmethod
    def from_int(cls, value: int) -> "CliffordScalar":
        return cls(value, 0, 0, 0, 0)

    @classmethod
    def omega_power(cls, n: int) -> "CliffordScalar":
        """ω^n"""
        n %= 8
        coefficients = [0, 0, 0, 0]
        coefficients[n % 4] = -1 if n >= 4 else 1
        return cls(*coefficients)

    @classmethod
    def sqrt2(cls) -> "CliffordScalar":
        return cls(0, 1, 0, -1)

    @classmethod
    def inv_sqrt2(cls) -> "CliffordScalar":
        return cls(1, 0, 0, 0, 1)

    @classmethod
    def coerce(cls, value: ScalarLike) -> "CliffordScalar":
        if isinstance(value, CliffordScalar):
            return value
        if isinstance(value, (int, np.integer)):
            return cls.from_int(int(value))
        raise TypeError(f"cannot convert {type(value).__name__} to CliffordScalar")

    # --- 参照 ---

    @property
    def a(self) -> int:
        return self._num[0]

    @property
    def b(self) -> int:
        return self._num[1]

    @property
    def c(self) -> int:
        return self._num[2]

    @property
    def d(self) -> int:
        return self._num[3]

    @property
    def k(self) -> int:
        return self._k

    @property
    def fields(self) -> Tuple[int, int, int, int, int]:
        return (*self._num, self._k)

    def is_zero(self) -> bool:
        return not any(self._num)

    # --- 環演算 ---

    def __add__(self, other: ScalarLike) -> "CliffordScalar":
        try:
            other = CliffordScalar.coerce(other)
        except TypeError:
            return NotImplemented
        k = max(self._k, other._k)
        x = _scale_by_sqrt2_power(self._num, k - self._k)
        y = _scale_by_sqrt2_power(other._num, k - other._k)
        return CliffordScalar(*(p + q for p, q in zip(x, y)), k)

    def __radd__(self, other: ScalarLike) -> "CliffordScalar":
        return self + other

    def __neg__(self) -> "CliffordScalar":
        return CliffordScalar(*(-v for v in self._num), self._k)

    def __sub__(self, other: ScalarLike) -> "CliffordScalar":
        try:
            other = CliffordScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: ScalarLike) -> "CliffordScalar":
        return (-self) + other

    def __mul__(self, other: ScalarLike) -> "CliffordScalar":
        try:
            other = CliffordScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return CliffordScalar(*_ring_mul(self._num, other._num), self._k + other._k)

    def __rmul__(self, other: ScalarLike) -> "CliffordScalar":
        return self * other

    def galois(self, j: int) -> "CliffordScalar":
        """Galois 自己同型 ω ↦ ω^j（j は奇数）"""
        if j % 2 == 0:
            raise ValueError("Galois automorphisms need an odd exponent")
        total = CliffordScalar()
        for i, coefficient in enumerate(self._num):
            if coefficient:
                total = total + CliffordScalar.omega_power(i * j) * coefficient
        # σ_j(√2) = ±√2、符号は j ≡ 3, 5 (mod 8) で負
        if j % 8 in (3, 5) and self._k % 2:
            total = -total
        return CliffordScalar(*total._num, total._k + self._k)

    def conjugate(self) -> "CliffordScalar":
        """複素共役（ω ↦ ω⁻¹）"""
        return self.galois(7)

    def norm(self) -> Fraction:
        """体のノルム（4 つの共役の積、有理数）"""
        product = self * self.galois(3) * self.galois(5) * self.galois(7)
        if product.b or product.c or product.d or product.k % 2:
            raise ArithmeticError(f"norm of {self} is not rational")
        return Fraction(product.a, 2 ** (product.k // 2))

    def __complex__(self) -> complex:
        value = sum(coefficient * _OMEGA ** i for i, coefficient in enumerate(self._num))
        return complex(value / (2 ** 0.5) ** self._k)

    def to_complex(self) -> complex:
        return complex(self)

    # --- 比較 ---

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, np.integer)):
            other = CliffordScalar.from_int(int(other))
        if not isinstance(other, CliffordScalar):
            return NotImplemented
        return self._num == other._num and self._k == other._k

    def __hash__(self) -> int:
        return hash((self._num, self._k))

    def __repr__(self) -> str:
        a, b, c, d = self._num
        return f"CliffordScalar({a}, {b}, {c}, {d}; k={self._k})"

    def __str__(self) -> str:
        a, b, c, d = self._num
        return f"({a} + {b}·w + {c}·w^2 + {d}·w^3)/sqrt2^{self._k}"


ZERO = CliffordScalar()
ONE = CliffordScalar(1)


def scalar_add(x: CliffordScalar, y: CliffordScalar) -> CliffordScalar:
    return x + y


def scalar_mul(x: CliffordScalar, y: CliffordScalar) -> CliffordScalar:
    return x * y


def scalar_canonical(x: CliffordScalar) -> CliffordScalar:
    """正規形を返す（生成時に正規化済みなので再構築するだけ）"""
    return CliffordScalar(*x.fields)


def negate(x: CliffordScalar) -> CliffordScalar:
    return -x


def exact_ratio(x: CliffordScalar, y: CliffordScalar) -> Optional[CliffordScalar]:
    """
    x = λ·y を満たす λ を環の中で求める

    λ = x·σ₃(y)σ₅(y)σ₇(y) / N(y)。N(y) の奇数部が分子を割り切らなければ None。
    """
    if y.is_zero():
        raise ZeroDivisionError("ratio by zero")
    cofactor = y.galois(3) * y.galois(5) * y.galois(7)
    numerator = x * cofactor
    norm = y.norm()
    n, e = norm.numerator, norm.denominator.bit_length() - 1
    t = 0
    while n % 2 == 0:
        n //= 2
        t += 1
    if any(v % n for v in (numerator.a, numerator.b, numerator.c, numerator.d)):
        return None
    # λ = numerator · 2^(e - t) / n
    return CliffordScalar(
        numerator.a // n,
        numerator.b // n,
        numerator.c // n,
        numerator.d // n,
        numerator.k - 2 * (e - t),
    )


# =========================
# 行列
# =========================

def object_array(values: Iterable[ScalarLike], shape: Tuple[int, ...]) -> np.ndarray:
    """CliffordScalar を成分とする object 配列を作る"""
    flat = [CliffordScalar.coerce(v) for v in values]
    array = np.empty(len(flat), dtype=object)
    for i, value in enumerate(flat):
        array[i] = value
    return array.reshape(shape)


def _log2_exact(n: int) -> Optional[int]:
    if n <= 0 or n & (n - 1):
        return None
    return n.bit_length() - 1


class ExactMatrix:
    """
    CliffordScalar 成分の密行列（行 = 出力 2^m、列 = 入力 2^n）
    """

    __slots__ = ("_entries", "_out_arity", "_in_arity")

    def __init__(self, entries: np.ndarray):
        array = np.asarray(entries, dtype=object)
        if array.ndim != 2:
            raise DimensionError(f"matrix must be 2-dimensional, got {array.ndim}")
        m = _log2_exact(array.shape[0])
        n = _log2_exact(array.shape[1])
        if m is None or n is None:
            raise DimensionError(f"dimensions must be powers of two, got {array.shape}")
        array = object_array(array.ravel().tolist(), array.shape)
        array.flags.writeable = False
        self._entries = array
        self._out_arity = m
        self._in_arity = n

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[ScalarLike]]) -> "ExactMatrix":
        height = len(rows)
        width = len(rows[0]) if height else 0
        return cls(object_array([v for row in rows for v in row], (height, width)))

    @classmethod
    def identity(cls, qubits: int) -> "ExactMatrix":
        size = 2 ** qubits
        return cls(object_array([int(i == j) for i in range(size) for j in range(size)], (size, size)))

    @classmethod
    def zeros(cls, out_arity: int, in_arity: int) -> "ExactMatrix":
        shape = (2 ** out_arity, 2 ** in_arity)
        return cls(object_array([0] * (shape[0] * shape[1]), shape))

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, out_arity: int, in_arity: int) -> "ExactMatrix":
        """軸 (出力..., 入力...) のテンソルを行列に畳む"""
        return cls(np.asarray(tensor, dtype=object).reshape(2 ** out_arity, 2 ** in_arity))

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def shape(self) -> Tuple[int, int]:
        return self._entries.shape

    @property
    def rows(self) -> int:
        return self._entries.shape[0]

    @property
    def cols(self) -> int:
        return self._entries.shape[1]

    @property
    def out_arity(self) -> int:
        return self._out_arity

    @property
    def in_arity(self) -> int:
        return self._in_arity

    def __getitem__(self, index: Tuple[int, int]) -> CliffordScalar:
        return self._entries[index]

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self._entries.flat)

    def scale(self, factor: ScalarLike) -> "ExactMatrix":
        factor = CliffordScalar.coerce(factor)
        return ExactMatrix(self._entries * factor)

    def adjoint(self) -> "ExactMatrix":
        conjugated = [v.conjugate() for v in self._entries.T.flat]
        return ExactMatrix(object_array(conjugated, (self.cols, self.rows)))

    def to_complex(self) -> np.ndarray:
        return np.array([[complex(v) for v in row] for row in self._entries], dtype=complex)

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        return mat_mul(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.shape == other.shape and all(
            x == y for x, y in zip(self._entries.flat, other._entries.flat)
        )

    def __hash__(self) -> int:
        return hash((self.shape, tuple(self._entries.flat)))

    def render(self) -> str:
        """行優先のリスト表現（デバッグ用）"""
        return "[" + ", ".join(
            "[" + ", ".join(str(v) for v in row) + "]" for row in self._entries
        ) + "]"

    def __repr__(self) -> str:
        return f"ExactMatrix({self.rows}x{self.cols})"


def mat_mul(a: ExactMatrix, b: ExactMatrix) -> ExactMatrix:
    if a.cols != b.rows:
        raise DimensionError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    return ExactMatrix(np.dot(a.entries, b.entries))


def mat_tensor(a: ExactMatrix, b: ExactMatrix) -> ExactMatrix:
    """Kronecker 積（a の添字が上位）"""
    outer = np.multiply.outer(a.entries, b.entries)
    return ExactMatrix(outer.transpose(0, 2, 1, 3).reshape(a.rows * b.rows, a.cols * b.cols))


def mat_identity(qubits: int) -> ExactMatrix:
    return ExactMatrix.identity(qubits)


def mat_proportional(a: ExactMatrix, b: ExactMatrix) -> Verdict:
    """
    スカラー倍を無視した比較

    最初の非ゼロ位置の成分 a₀, b₀ を使い、全成分で A·b₀ = B·a₀ を確かめる（除算しない）。
    """
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    cols = a.cols
    left = a.entries.ravel()
    right = b.entries.ravel()

    first = next(
        (i for i in range(left.size) if not left[i].is_zero() or not right[i].is_zero()),
        None,
    )
    if first is None:
        return Verdict(kind=VerdictKind.BOTH_ZERO)

    a0, b0 = left[first], right[first]
    if a0.is_zero() or b0.is_zero():
        return Verdict(kind=VerdictKind.DIFFERENT, witness=divmod(first, cols))

    for i in range(first + 1, left.size):
        if left[i] * b0 != right[i] * a0:
            return Verdict(kind=VerdictKind.DIFFERENT, witness=divmod(i, cols))

    ratio = exact_ratio(a0, b0)
    if ratio == ONE:
        return Verdict(kind=VerdictKind.EQUAL, ratio=ONE)
    if ratio is not None:
        return Verdict(kind=VerdictKind.PROPORTIONAL, ratio=ratio)
    inverse = exact_ratio(b0, a0)
    if inverse is None:
        logger.debug(f"neither {a0}/{b0} nor its inverse lies in the ring")
        return Verdict(kind=VerdictKind.PROPORTIONAL)
    logger.debug(f"ratio {a0}/{b0} leaves the ring, reporting the inverse")
    return Verdict(kind=VerdictKind.PROPORTIONAL, ratio=inverse, inverted=True)
