"""
厳密演算のテスト
"""
import numpy as np
import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.exact import (
    ONE,
    ZERO,
    CliffordScalar,
    ExactMatrix,
    exact_ratio,
    mat_identity,
    mat_mul,
    mat_proportional,
    mat_tensor,
    negate,
    scalar_add,
    scalar_canonical,
    scalar_mul,
)
from app.exceptions import DimensionError
from app.models import VerdictKind


class TestCliffordScalar:
    """Z[ω, 1/√2] のスカラーのテスト"""

    def test_omega_has_order_eight(self):
        """ω^8 = 1、ω^4 = −1"""
        assert CliffordScalar.omega_power(8) == ONE
        assert CliffordScalar.omega_power(4) == -ONE

    def test_sqrt2_squared(self):
        """√2·√2 = 2"""
        root2 = CliffordScalar.sqrt2()
        assert root2 * root2 == CliffordScalar.from_int(2)

    def test_inverse_sqrt2(self):
        """(1/√2)·√2 = 1"""
        assert CliffordScalar.inv_sqrt2() * CliffordScalar.sqrt2() == ONE

    def test_canonical_form_is_unique(self):
        """2/√2² は 1 と同じ表現になる"""
        assert CliffordScalar(2, 0, 0, 0, 2) == ONE
        assert CliffordScalar(2, 0, 0, 0, 2).fields == ONE.fields

    def test_complex_value(self):
        """ω² = i"""
        assert complex(CliffordScalar.omega_power(2)) == pytest.approx(1j)

    def test_zero(self):
        """ゼロの判定"""
        assert ZERO.is_zero()
        assert (ONE - ONE).is_zero()
        assert not ONE.is_zero()

    def test_immutable(self):
        """属性の書き換えは禁止"""
        with pytest.raises(AttributeError):
            ONE.k = 3

    def test_conjugate(self):
        """ω の共役は ω⁷"""
        assert CliffordScalar.omega_power(1).conjugate() == CliffordScalar.omega_power(7)
        assert CliffordScalar.sqrt2().conjugate() == CliffordScalar.sqrt2()

    def test_norm(self):
        """N(√2) = 4、N(1+ω) は有理数"""
        assert CliffordScalar.sqrt2().norm() == 4
        assert (ONE + CliffordScalar.omega_power(1)).norm() == 2

    def test_int_arithmetic(self):
        """整数との混合演算"""
        assert ONE + 1 == CliffordScalar.from_int(2)
        assert 3 * ONE == CliffordScalar.from_int(3)


class TestScalarOperations:
    """scalar_add / scalar_mul / scalar_canonical のテスト"""

    @pytest.mark.parametrize("x, y, expected", [
        ((1, 0, 0, 0, 0), (1, 0, 0, 0, 0), (2, 0, 0, 0, 0)),
        ((0, 1, 0, 0, 0), (0, 1, 0, 0, 0), (0, 2, 0, 0, 0)),
        ((1, 0, 0, 0, 1), (1, 0, 0, 0, 1), (0, 1, 0, -1, 0)),
    ])
    def test_add(self, x, y, expected):
        assert scalar_add(CliffordScalar(*x), CliffordScalar(*y)).fields == expected

    @pytest.mark.parametrize("x, y, expected", [
        ((0, 1, 0, 0, 0), (0, 1, 0, 0, 0), (0, 0, 1, 0, 0)),
        ((0, 0, 1, 0, 0), (0, 0, 1, 0, 0), (-1, 0, 0, 0, 0)),
        ((1, 0, 0, 0, 1), (1, 0, 0, 0, 1), (1, 0, 0, 0, 2)),
    ])
    def test_mul(self, x, y, expected):
        assert scalar_mul(CliffordScalar(*x), CliffordScalar(*y)).fields == expected

    @pytest.mark.parametrize("raw, expected", [
        ((0, 0, 0, 0, 5), (0, 0, 0, 0, 0)),
        ((0, 1, 0, -1, 1), (1, 0, 0, 0, 0)),
        ((2, 2, 0, 0, 2), (1, 1, 0, 0, 0)),
    ])
    def test_canonical(self, raw, expected):
        assert scalar_canonical(CliffordScalar(*raw)).fields == expected

    def test_matches_floating_point(self):
        """ランダムなスカラーで複素数の演算と一致する"""
        rng = np.random.default_rng(1)
        for _ in range(200):
            x = CliffordScalar(*rng.integers(-5, 6, size=4), int(rng.integers(0, 4)))
            y = CliffordScalar(*rng.integers(-5, 6, size=4), int(rng.integers(0, 4)))
            assert complex(scalar_add(x, y)) == pytest.approx(complex(x) + complex(y), abs=1e-9)
            assert complex(scalar_mul(x, y)) == pytest.approx(complex(x) * complex(y), abs=1e-9)

    def test_canonical_uniqueness(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            x = CliffordScalar(*rng.integers(-3, 4, size=4), int(rng.integers(0, 3)))
            y = x * CliffordScalar.sqrt2() * CliffordScalar.inv_sqrt2()
            assert x.fields == y.fields
            assert scalar_add(x, negate(y)).is_zero()


class TestExactRatio:
    """環の中での比のテスト"""

    def test_integer_ratio(self):
        assert exact_ratio(CliffordScalar.from_int(2), ONE) == CliffordScalar.from_int(2)

    def test_ratio_with_sqrt2(self):
        """1 / √2"""
        assert exact_ratio(ONE, CliffordScalar.sqrt2()) == CliffordScalar.inv_sqrt2()

    def test_ratio_of_phases(self):
        """ω³ / ω = ω²"""
        ratio = exact_ratio(CliffordScalar.omega_power(3), CliffordScalar.omega_power(1))
        assert ratio == CliffordScalar.omega_power(2)

    def test_ratio_outside_ring(self):
        """1/3 は環に無い"""
        assert exact_ratio(ONE, CliffordScalar.from_int(3)) is None

    def test_ratio_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            exact_ratio(ONE, ZERO)


class TestExactMatrix:
    """厳密行列のテスト"""

    def test_dimensions_must_be_powers_of_two(self):
        """3×2 行列は作れない"""
        with pytest.raises(DimensionError):
            ExactMatrix.from_rows([[1, 0], [0, 1], [1, 1]])

    def test_identity_product(self):
        identity = mat_identity(1)
        assert mat_mul(identity, identity) == identity

    def test_tensor_of_identities(self):
        assert mat_tensor(mat_identity(1), mat_identity(1)) == mat_identity(2)

    def test_tensor_order(self):
        """a の添字が上位"""
        x = ExactMatrix.from_rows([[0, 1], [1, 0]])
        result = mat_tensor(x, mat_identity(1))
        assert result[2, 0] == ONE
        assert result[1, 0] == ZERO

    def test_adjoint(self):
        """ω の随伴は ω⁷"""
        m = ExactMatrix.from_rows([[CliffordScalar.omega_power(1)]])
        assert m.adjoint()[0, 0] == CliffordScalar.omega_power(7)

    def test_multiply_mismatch(self):
        with pytest.raises(DimensionError):
            mat_mul(mat_identity(1), mat_identity(2))


class TestMatProportional:
    """スカラー倍を無視した比較のテスト"""

    def test_equal(self):
        verdict = mat_proportional(mat_identity(1), mat_identity(1))
        assert verdict.kind == VerdictKind.EQUAL
        assert verdict.ratio == ONE

    def test_proportional(self):
        """I = ½·(2I)"""
        verdict = mat_proportional(mat_identity(1), mat_identity(1).scale(2))
        assert verdict.kind == VerdictKind.PROPORTIONAL
        assert verdict.ratio == CliffordScalar(1, 0, 0, 0, 2)
        assert verdict.equivalent

    def test_inverse_ratio_reported(self):
        """λ = 1/3 は環に無いので逆比 3 を報告する"""
        verdict = mat_proportional(mat_identity(1), mat_identity(1).scale(3))
        assert verdict.kind == VerdictKind.PROPORTIONAL
        assert verdict.inverted
        assert verdict.ratio == CliffordScalar.from_int(3)

    def test_ratio_outside_ring_both_ways(self):
        """3I と 5I: 3/5 も 5/3 も環に無いので比は付かない"""
        verdict = mat_proportional(mat_identity(1).scale(3), mat_identity(1).scale(5))
        assert verdict.kind == VerdictKind.PROPORTIONAL
        assert verdict.ratio is None
        assert not verdict.inverted
        assert verdict.equivalent
        assert verdict.describe() == "proportional (ratio outside the ring)"
        assert verdict.model_dump()["ratio"] is None

    def test_different_with_witness(self):
        z = ExactMatrix.from_rows([[1, 0], [0, -1]])
        verdict = mat_proportional(mat_identity(1), z)
        assert verdict.kind == VerdictKind.DIFFERENT
        assert verdict.witness == (1, 1)
        assert not verdict.equivalent

    def test_one_side_zero(self):
        verdict = mat_proportional(ExactMatrix.zeros(1, 1), mat_identity(1))
        assert verdict.kind == VerdictKind.DIFFERENT

    def test_both_zero(self):
        verdict = mat_proportional(ExactMatrix.zeros(1, 1), ExactMatrix.zeros(1, 1))
        assert verdict.kind == VerdictKind.BOTH_ZERO
        assert verdict.equivalent

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            mat_proportional(mat_identity(1), mat_identity(2))

    def test_describe(self):
        assert mat_proportional(mat_identity(1), mat_identity(1)).describe() == "equal"

    def test_hadamard_squared(self):
        """(H·H, I) → Proportional(2)"""
        h = ExactMatrix.from_rows([[1, 1], [1, -1]])
        verdict = mat_proportional(mat_mul(h, h), mat_identity(1))
        assert verdict.kind == VerdictKind.PROPORTIONAL
        assert verdict.ratio == CliffordScalar.from_int(2)

    def test_cnot_squared(self):
        cnot = ExactMatrix.from_rows([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        assert mat_mul(cnot, cnot) == mat_identity(2)

    def test_scalar_tensor(self):
        two = ExactMatrix.from_rows([[2]])
        assert mat_tensor(two, mat_identity(1)) == mat_identity(1).scale(2)
