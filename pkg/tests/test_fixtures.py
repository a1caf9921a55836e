"""
同梱フィクスチャと改変コーパスのテスト
"""
import json

import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.circuit_rules import verify_circ_derivation
from app.exceptions import ScriptError
from app.fixtures import FixtureLibrary, apply_mutation, load_script
from app.models import CircuitDerivationScript, Mutation, ZxDerivationScript
from app.stabilizer import equiv_exact, equiv_tableau
from app.zx_rules import verify_zx_derivation

FIXTURES = Path(__file__).parent.parent / "data" / "fixtures"


def verify(script):
    if isinstance(script, ZxDerivationScript):
        return verify_zx_derivation(script)
    return verify_circ_derivation(script)


class TestFixtureLibrary:
    """フィクスチャ読み込みのテスト"""

    def setup_method(self):
        self.library = FixtureLibrary()
        self.library.load(str(FIXTURES))

    def test_everything_loaded(self):
        assert "teleport.circ" in self.library.circuits
        assert len(self.library.zx_scripts()) == 13
        assert len(self.library.circuit_scripts()) == 3
        assert len(self.library.mutations) == 20

    def test_lookup_without_suffix(self):
        assert self.library.script("teleport").name == "teleport"
        assert self.library.circuit("cnot").n_inputs == 2

    def test_missing_fixture(self):
        with pytest.raises(KeyError):
            self.library.script("nope")

    def test_missing_directory(self, tmp_path):
        library = FixtureLibrary()
        library.load(str(tmp_path / "absent"))
        assert library.scripts == {}

    def test_teleport_circuit_is_a_wire(self):
        teleport = self.library.circuit("teleport")
        wire = self.library.circuit("id1")
        assert equiv_exact(teleport, wire).equivalent
        assert equiv_tableau(teleport, wire)

    def test_mbqc_cnot_is_a_cnot(self):
        """測定型 CNOT は（出力 b, d に）CNOT を実装する"""
        assert equiv_exact(self.library.circuit("mbqc_cnot"), self.library.circuit("cnot")).equivalent

    def test_shipped_scripts_are_accepted(self):
        for name, script in self.library.scripts.items():
            if name == "teleport_bad.deriv":
                continue
            report = verify(script)
            assert report.accepted, f"{name}: {report.summary()}"

    def test_bad_teleport_rejected_at_step_four(self):
        report = verify(self.library.script("teleport_bad"))
        assert not report.accepted
        assert report.failed_step == 4

    @pytest.mark.parametrize("name, rules", [
        ("copy_from_cnot_copy", {"T", "So'.red", "B1'"}),
        ("pi_copy_from_cnot_copy", {"T", "So'.red", "K1'", "S1.red"}),
        ("fanout_from_circuit_rule", {"T", "So'.green", "S1'"}),
        ("snake_from_pruning", {"T", "So'.red", "S'"}),
        ("colour_change_from_circuit", {"S1.green", "So'.red", "T", "C'", "S'", "S1.red"}),
        ("hadamard_square_from_circuit_rules", {"H'", "S1.green", "K2'", "S6'", "S2.red", "S2.green"}),
    ])
    def test_derived_rules_follow_their_chains(self, name, rules):
        """回路規則から導く向きの導出は、プライム付き規則と T を使った鎖として受理される"""
        script = self.library.script(name)
        assert {step.rule for step in script.steps} == rules
        report = verify(script)
        assert report.accepted, f"{name}: {report.summary()}"

    def test_every_mutation_rejected(self):
        for mutation in self.library.mutations:
            report = verify(self.library.mutated(mutation))
            assert not report.accepted, f"{mutation.id} was accepted"


class TestScriptLoading:
    """スクリプトの読み込みと改変のテスト"""

    def test_kind_from_suffix(self, tmp_path):
        path = tmp_path / "wire.zxderiv"
        path.write_text(json.dumps({
            "initial": "node 0 in 0\nnode 1 out 0\nedge 0 1",
            "target": "node 0 in 0\nnode 1 out 0\nedge 0 1",
        }), encoding="utf-8")
        script = load_script(path)
        assert isinstance(script, ZxDerivationScript)
        assert script.name == "wire"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.deriv"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ScriptError):
            load_script(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "partial.deriv"
        path.write_text(json.dumps({"initial": "input a\noutput a"}), encoding="utf-8")
        with pytest.raises(ScriptError):
            load_script(path)

    def test_mutation_leaves_original_untouched(self):
        script = CircuitDerivationScript(
            name="h", initial="input a\nh a\noutput a", target="input a\nrz a 1\nrx a 1\nrz a 1\noutput a",
            steps=[{"rule": "Hcirc"}],
        )
        mutation = Mutation(id="x1", script="h", category="wrong-direction", step=1, patch={"direction": "RL"})
        mutated = apply_mutation(script, mutation)
        assert mutated.steps[0].direction == "RL"
        assert script.steps[0].direction == "LR"
        assert mutated.name == "h~x1"

    def test_binding_patch_is_partial(self):
        script = CircuitDerivationScript(
            initial="input a\noutput a", target="input a\noutput a",
            steps=[{"rule": "S6circ", "binding": {"match": 0, "fix": {"1": 2}}}],
        )
        mutation = Mutation(id="x2", script="s", category="stale-anchor", step=1, patch={"binding": {"match": 3}})
        binding = apply_mutation(script, mutation).steps[0].binding
        assert binding.match == 3
        assert binding.fix == {"1": 2}

    def test_target_patch(self):
        script = CircuitDerivationScript(initial="input a\noutput a", target="input a\noutput a")
        mutation = Mutation(id="x3", script="s", category="wrong-target", patch={"target": "input a\nh a\noutput a"})
        assert apply_mutation(script, mutation).target == "input a\nh a\noutput a"

    def test_step_out_of_range(self):
        script = CircuitDerivationScript(initial="input a\noutput a", target="input a\noutput a")
        mutation = Mutation(id="x4", script="s", category="wrong-rule", step=1, patch={"rule": "Hcirc"})
        with pytest.raises(ScriptError):
            apply_mutation(script, mutation)
