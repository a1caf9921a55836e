"""
例外定義
書き換えエンジン全体で使う例外階層
"""
from typing import Optional


class StabrwError(Exception):
    """stabrw の基底例外"""


class CircuitSyntaxError(StabrwError):
    """回路テキストの構文エラー（行・列つき）"""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class LivenessError(StabrwError):
    """破棄済み・未生成のワイヤ参照"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class DuplicateLabelError(LivenessError):
    """同じワイヤラベルの二重生成"""


class ArityError(StabrwError):
    """入出力数の不一致、または評価サイズの上限超過"""


class SizeOverflowError(ArityError):
    """テンソル縮約の中間サイズが上限を超えた"""


class DimensionError(StabrwError):
    """行列の次元不一致"""


class ZxFormatError(StabrwError):
    """ZX テキスト形式のエラー"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class NormalizationError(StabrwError):
    """境界頂点・Hボックスの次数不変条件違反"""


class UnknownRuleError(StabrwError):
    """カタログに存在しない規則ID・バリアント"""


class RuleParameterError(StabrwError):
    """規則パラメータの範囲外"""


class BindingError(StabrwError):
    """古い・不正な束縛での適用"""


class ExtractionError(StabrwError):
    """ZX 図から回路を取り出せない"""


class TableauError(StabrwError):
    """反可換・矛盾した生成元集合"""


class ScriptError(StabrwError):
    """導出スクリプトのスキーマエラー"""


class NoMatchError(BindingError):
    """アンカー指定に対応するマッチが無い"""
