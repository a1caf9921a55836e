"""
フィクスチャ管理
回路・導出スクリプト・改変コーパスを読み込み、名前で引けるようにする
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import ValidationError

from app.circuit import Circuit, parse_circuit
from app.exceptions import ScriptError
from app.models import CircuitDerivationScript, Mutation, ScriptKind, StepSpec, ZxDerivationScript

logger = logging.getLogger(__name__)

DerivationScript = Union[CircuitDerivationScript, ZxDerivationScript]


def load_script(path: Union[str, Path]) -> DerivationScript:
    """*.deriv / *.zxderiv を読み込む（kind フィールド、なければ拡張子で判別）"""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScriptError(f"{path.name}: not valid JSON ({e})")
    if not isinstance(data, dict):
        raise ScriptError(f"{path.name}: top level must be an object")
    kind = data.get("kind") or (ScriptKind.ZX.value if path.suffix == ".zxderiv" else ScriptKind.CIRCUIT.value)
    data.setdefault("name", path.stem)
    try:
        if kind == ScriptKind.ZX.value:
            return ZxDerivationScript(**data)
        return CircuitDerivationScript(**data)
    except ValidationError as e:
        raise ScriptError(f"{path.name}: {e}")


def apply_mutation(script: DerivationScript, mutation: Mutation) -> DerivationScript:
    """改変を適用したスクリプトのコピーを返す（元は変更しない）"""
    if mutation.step is None:
        return script.model_copy(update=mutation.patch)
    if not 1 <= mutation.step <= len(script.steps):
        raise ScriptError(f"{mutation.id}: step {mutation.step} out of range 1..{len(script.steps)}")
    steps = list(script.steps)
    original = steps[mutation.step - 1]
    fields = original.model_dump()
    for key, value in mutation.patch.items():
        # binding は部分上書き
        if key == "binding" and isinstance(value, dict):
            fields["binding"] = {**fields["binding"], **value}
        else:
            fields[key] = value
    try:
        steps[mutation.step - 1] = StepSpec(**fields)
    except ValidationError as e:
        raise ScriptError(f"{mutation.id}: {e}")
    return script.model_copy(update={"steps": steps, "name": f"{script.name}~{mutation.id}"})


class FixtureLibrary:
    """フィクスチャ管理クラス"""

    def __init__(self, data_dir: str = "data/fixtures"):
        self.data_dir = Path(data_dir)

        self.circuits: Dict[str, str] = {}
        self.scripts: Dict[str, DerivationScript] = {}
        self.mutations: List[Mutation] = []

    def load(self, data_dir: Optional[str] = None):
        """フィクスチャを読み込み"""
        if data_dir is not None:
            self.data_dir = Path(data_dir)
        self.circuits = {}
        self.scripts = {}
        self.mutations = []
        if not self.data_dir.is_dir():
            logger.warning(f"Fixture directory not found: {self.data_dir}")
            return

        # 回路
        for path in sorted(self.data_dir.glob("*.circ")):
            self.circuits[path.name] = path.read_text(encoding="utf-8")

        # 導出スクリプト
        for pattern in ("*.deriv", "*.zxderiv"):
            for path in sorted(self.data_dir.glob(pattern)):
                self.scripts[path.name] = load_script(path)

        # 改変コーパス
        mutations_file = self.data_dir / "mutations.json"
        if mutations_file.exists():
            with open(mutations_file, "r", encoding="utf-8") as f:
                self.mutations = [Mutation(**entry) for entry in json.load(f)]

        logger.info(
            f"Fixtures loaded from {self.data_dir}: {len(self.circuits)} circuits, "
            f"{len(self.scripts)} scripts, {len(self.mutations)} mutations"
        )

    def circuit(self, name: str) -> Circuit:
        """名前で回路を取得（拡張子は省略可）"""
        key = name if name in self.circuits else f"{name}.circ"
        if key not in self.circuits:
            raise KeyError(f"no circuit fixture '{name}'")
        return parse_circuit(self.circuits[key])

    def script(self, name: str) -> DerivationScript:
        """名前で導出スクリプトを取得"""
        if name in self.scripts:
            return self.scripts[name]
        for suffix in (".deriv", ".zxderiv"):
            if f"{name}{suffix}" in self.scripts:
                return self.scripts[f"{name}{suffix}"]
        raise KeyError(f"no script fixture '{name}'")

    def mutated(self, mutation: Mutation) -> DerivationScript:
        return apply_mutation(self.script(mutation.script), mutation)

    def zx_scripts(self) -> List[ZxDerivationScript]:
        return [s for s in self.scripts.values() if isinstance(s, ZxDerivationScript)]

    def circuit_scripts(self) -> List[CircuitDerivationScript]:
        return [s for s in self.scripts.values() if isinstance(s, CircuitDerivationScript)]


# グローバルインスタンス
fixture_library = FixtureLibrary()
