"""
カタログ健全性チェックのテスト
"""
import pytest

# テスト用にパスを追加
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.circuit_rules import circ_sweep
from app.models import CliConfig, SelftestReport, SweepCheck
from app.selftest import check_circ_instance, check_zx_instance, oracle_sweep, run_selftest, translation_sweep
from app.zx_rules import zx_sweep


class TestRuleChecks:
    """1インスタンスの検査のテスト"""

    def test_zx_instance_passes(self):
        check = check_zx_instance("S1.green", {"alpha": 1, "beta": 2})
        assert check.passed
        assert check.catalog == "zx"

    def test_zx_instance_error_is_reported(self):
        check = check_zx_instance("S9.green", {})
        assert not check.passed
        assert check.verdict.startswith("error")

    def test_circuit_instance_with_both_oracles(self):
        config = CliConfig(oracle="both")
        check = check_circ_instance("S2circ", 1, {}, config)
        assert check.passed
        assert " / " in check.verdict

    def test_tableau_oracle_only(self):
        check = check_circ_instance("Hcirc", 0, {}, CliConfig(oracle="tableau"))
        assert check.verdict == "equivalent"

    def test_label(self):
        check = check_circ_instance("S6circ", 0, {"beta": 1, "alpha": 2}, CliConfig())
        assert check.label() == "S6circ[0](alpha=2, beta=1)"


class TestSelftest:
    """スイープ全体のテスト"""

    @pytest.mark.asyncio
    async def test_small_sweep_has_no_failures(self):
        config = CliConfig(max_arity=2, ccirc_max=2, workers=2, translation_samples=10, oracle_pairs=5)
        report = await run_selftest(config)
        assert report.failures == 0
        assert report.first_failure is None
        assert report.checked == len(list(zx_sweep(2))) + len(list(circ_sweep(2)))

    @pytest.mark.asyncio
    async def test_results_keep_sweep_order(self):
        config = CliConfig(max_arity=1, ccirc_max=1, workers=3, translation_samples=0, oracle_pairs=0)
        report = await run_selftest(config)
        expected = [rule_id for rule_id, _ in zx_sweep(1)]
        assert [check.rule for check in report.results[:len(expected)]] == expected

    @pytest.mark.asyncio
    async def test_report_carries_seeded_sweeps(self):
        config = CliConfig(max_arity=1, ccirc_max=1, seed=9, translation_samples=8, oracle_pairs=4)
        report = await run_selftest(config)
        assert [sweep.name for sweep in report.sweeps] == ["translation", "oracle-agreement"]
        assert [sweep.checked for sweep in report.sweeps] == [8, 4]
        assert all(sweep.seed == 9 for sweep in report.sweeps)
        assert report.passed


class TestSeededSweeps:
    """シード付きランダム検査のテスト"""

    def test_translation_sweep(self):
        sweep = translation_sweep(CliConfig(seed=1, translation_samples=40))
        assert sweep.checked == 40
        assert sweep.failures == 0
        assert sweep.first_failure is None

    def test_oracle_sweep(self):
        sweep = oracle_sweep(CliConfig(seed=2, oracle_pairs=15))
        assert sweep.checked == 15
        assert sweep.failures == 0

    def test_same_seed_same_report(self):
        config = CliConfig(seed=5, translation_samples=6, oracle_pairs=6)
        assert translation_sweep(config) == translation_sweep(config)
        assert oracle_sweep(config) == oracle_sweep(config)

    def test_sweeps_can_be_switched_off(self):
        config = CliConfig(translation_samples=0, oracle_pairs=0)
        assert translation_sweep(config).checked == 0
        assert oracle_sweep(config).checked == 0

    def test_failed_sweep_fails_the_report(self):
        report = SelftestReport(sweeps=[SweepCheck(name="translation", seed=0, checked=1, failures=1)])
        assert report.first_failure is None
        assert not report.passed
