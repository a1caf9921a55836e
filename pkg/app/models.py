"""
データモデル定義
判定結果・導出スクリプト・レポートなど、ファイル入出力と構造化出力に使うモデル
"""
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_serializer, field_validator


class Direction(str, Enum):
    """規則の適用方向"""
    LR = "LR"   # 左辺 → 右辺
    RL = "RL"   # 右辺 → 左辺


class OracleChoice(str, Enum):
    """等価性オラクルの選択"""
    EXACT = "exact"
    TABLEAU = "tableau"
    BOTH = "both"


class OutputFormat(str, Enum):
    """CLI の出力形式"""
    TEXT = "text"
    STRUCTURED = "structured"


class VerdictKind(str, Enum):
    """スカラー倍を無視した行列比較の判定"""
    EQUAL = "equal"
    PROPORTIONAL = "proportional"
    BOTH_ZERO = "bothzero"
    DIFFERENT = "different"


class GateKind(str, Enum):
    """回路 DAG のノード種別"""
    INPUT = "input"
    OUTPUT = "output"
    CNOT = "cnot"
    SWAP = "swap"
    PREP0 = "prep0"
    PREPPLUS = "prepplus"
    POST0 = "post0"
    POSTPLUS = "postplus"
    RZ = "rz"
    RX = "rx"
    H = "h"


class ZxKind(str, Enum):
    """ZX 図の頂点種別"""
    Z = "Z"
    X = "X"
    H = "H"
    IN = "in"
    OUT = "out"


class StepStatus(str, Enum):
    """導出ステップの検査結果"""
    OK = "OK"
    FAIL = "FAIL"


class ScriptKind(str, Enum):
    """導出スクリプトの種類"""
    CIRCUIT = "circuit"
    ZX = "zx"


class Verdict(BaseModel):
    """行列比較の判定結果"""
    kind: VerdictKind = Field(..., description="判定の種類")
    ratio: Optional[Any] = Field(
        None,
        description="A = λ·B を満たす λ（CliffordScalar）。PROPORTIONAL でも λ と 1/λ が共に環に無ければ None",
    )
    inverted: bool = Field(False, description="λ が環に無く、逆比 B/A を報告した場合 True")
    witness: Optional[Tuple[int, int]] = Field(None, description="食い違う成分の (行, 列)")

    @field_serializer("ratio")
    def serialize_ratio(self, value: Any) -> Optional[str]:
        return None if value is None else str(value)

    @property
    def equivalent(self) -> bool:
        """スカラー倍を無視して等しいか"""
        return self.kind != VerdictKind.DIFFERENT

    def describe(self) -> str:
        if self.kind == VerdictKind.DIFFERENT and self.witness is not None:
            return f"different at {self.witness}"
        if self.kind == VerdictKind.PROPORTIONAL and self.ratio is not None:
            suffix = " (inverse ratio)" if self.inverted else ""
            return f"proportional {self.ratio}{suffix}"
        if self.kind == VerdictKind.PROPORTIONAL:
            return "proportional (ratio outside the ring)"
        return self.kind.value if isinstance(self.kind, VerdictKind) else str(self.kind)


class BindingSpec(BaseModel):
    """スクリプト中のアンカー指定: 決定的なマッチ列を fix で絞り込み、match 番目を使う"""
    match: int = Field(0, ge=0, description="絞り込み後のマッチ番号")
    fix: Dict[str, int] = Field(default_factory=dict, description="パターン頂点ID → ホスト頂点ID")

    def fixed_pairs(self) -> Dict[int, int]:
        return {int(key): value for key, value in self.fix.items()}


class SpliceSite(BaseModel):
    """(Scirc) の断片位置"""
    kind: str = Field(..., description="plus-control / zero-target / control-postplus / target-postzero")
    gate: int = Field(..., description="ホスト回路の CNOT ノードID")


class StepSpec(BaseModel):
    """導出スクリプトの1ステップ"""
    rule: str = Field(..., description="規則ID")
    variant: int = Field(0, ge=0, description="回路規則のバリアント番号")
    params: Dict[str, Any] = Field(default_factory=dict, description="位相・脚数などのパラメータ")
    direction: Direction = Field(Direction.LR, description="適用方向")
    binding: BindingSpec = Field(default_factory=BindingSpec, description="アンカー")
    sites: List[SpliceSite] = Field(default_factory=list, description="(Scirc) の断片位置")

    class Config:
        use_enum_values = True


def _join_lines(value: Any) -> Any:
    if isinstance(value, list):
        return "\n".join(str(line) for line in value)
    return value


class CircuitDerivationScript(BaseModel):
    """回路導出スクリプト（*.deriv）"""
    kind: ScriptKind = Field(ScriptKind.CIRCUIT, description="スクリプト種別")
    name: str = Field("", description="スクリプト名")
    initial: str = Field(..., description="初期回路（回路テキスト形式）")
    target: str = Field(..., description="目標回路（回路テキスト形式）")
    steps: List[StepSpec] = Field(default_factory=list)

    @field_validator("initial", "target", mode="before")
    @classmethod
    def join_lines(cls, value: Any) -> Any:
        return _join_lines(value)

    class Config:
        use_enum_values = True


class ZxDerivationScript(BaseModel):
    """ZX 導出スクリプト（*.zxderiv）"""
    kind: ScriptKind = Field(ScriptKind.ZX, description="スクリプト種別")
    name: str = Field("", description="スクリプト名")
    initial: str = Field(..., description="初期図（ZX テキスト形式）")
    target: str = Field(..., description="目標図（ZX テキスト形式）")
    steps: List[StepSpec] = Field(default_factory=list)

    @field_validator("initial", "target", mode="before")
    @classmethod
    def join_lines(cls, value: Any) -> Any:
        return _join_lines(value)

    class Config:
        use_enum_values = True


class StepReport(BaseModel):
    """ステップごとの検査結果"""
    index: int = Field(..., description="1始まりのステップ番号")
    rule: str
    direction: Direction
    status: StepStatus
    reason: Optional[str] = None
    matches: int = Field(0, description="アンカー解決時のマッチ数")

    class Config:
        use_enum_values = True


class DerivationReport(BaseModel):
    """導出検査のレポート"""
    name: str = ""
    accepted: bool
    failed_step: Optional[int] = Field(None, description="最初に失敗したステップ（最終比較の失敗は steps+1）")
    reason: Optional[str] = None
    steps: List[StepReport] = Field(default_factory=list)

    def summary(self) -> str:
        if self.accepted:
            return f"accepted ({len(self.steps)} steps)"
        return f"rejected at step {self.failed_step}: {self.reason}"


class RuleCheck(BaseModel):
    """カタログ1インスタンスの健全性チェック結果"""
    catalog: str = Field(..., description="zx または circuit")
    rule: str
    variant: int = 0
    params: Dict[str, Any] = Field(default_factory=dict)
    verdict: str
    passed: bool

    def label(self) -> str:
        args = ", ".join(f"{key}={value}" for key, value in sorted(self.params.items()))
        return f"{self.rule}[{self.variant}]({args})"


class SweepCheck(BaseModel):
    """シード付きランダム検査の集計"""
    name: str = Field(..., description="translation / oracle-agreement")
    seed: int
    checked: int = 0
    failures: int = 0
    first_failure: Optional[str] = Field(None, description="最初に失敗した回路（テキスト形式）")


class SelftestReport(BaseModel):
    """selftest のレポート"""
    checked: int = 0
    failures: int = 0
    results: List[RuleCheck] = Field(default_factory=list)
    sweeps: List[SweepCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and all(sweep.failures == 0 for sweep in self.sweeps)

    @property
    def first_failure(self) -> Optional[RuleCheck]:
        return next((check for check in self.results if not check.passed), None)


class EquivReport(BaseModel):
    """equiv コマンドの判定"""
    exact: Optional[Verdict] = None
    tableau: Optional[bool] = None
    equivalent: bool


class Mutation(BaseModel):
    """検査器の頑健性テスト用の改変"""
    id: str
    script: str = Field(..., description="改変元のフィクスチャ名")
    category: str = Field(..., description="wrong-rule / wrong-direction / stale-anchor / wrong-target")
    step: Optional[int] = Field(None, description="改変する1始まりのステップ番号")
    patch: Dict[str, Any] = Field(default_factory=dict, description="ステップへの上書き、または target")


class CliConfig(BaseModel):
    """CLI の実行設定（Settings とコマンドラインフラグの合成）"""
    max_arity: int = Field(6, ge=1, le=12, description="可変長規則の脚数上限")
    ccirc_max: int = Field(5, ge=1, description="(Ccirc) の入出力数の上限")
    oracle: OracleChoice = Field(OracleChoice.EXACT, description="オラクル")
    output_format: OutputFormat = Field(OutputFormat.TEXT, description="出力形式")
    seed: int = Field(0, description="乱数シード")
    fixtures: str = Field("data/fixtures", description="フィクスチャディレクトリ")
    exact_max_qubits: int = Field(12, ge=1, le=12, description="厳密オラクルの最大脚数")
    workers: int = Field(4, ge=1, description="selftest の並列数")
    translation_samples: int = Field(500, ge=0, description="selftest で翻訳を検査するランダム回路の数")
    oracle_pairs: int = Field(200, ge=0, description="selftest で2つのオラクルを突き合わせる回路の組の数")

    class Config:
        use_enum_values = True
