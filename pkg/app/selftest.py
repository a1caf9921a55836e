"""
カタログ健全性チェック
ZX 規則と回路規則の全インスタンスについて、両辺がスカラー倍を除いて等しいことをオラクルで確かめる。
あわせてシード付きのランダム回路で、ZX への翻訳の健全性と2つのオラクルの一致を確かめる。
"""
import asyncio
import logging
from typing import Any, Callable, Dict, List

import numpy as np

from app.circuit import circuit_to_matrix, print_circuit, random_circuit, random_circuit_pair
from app.circuit_rules import circ_rule_catalog, circ_sweep, random_rewrite
from app.exact import mat_proportional
from app.exceptions import StabrwError
from app.models import CliConfig, OracleChoice, RuleCheck, SelftestReport, SweepCheck
from app.stabilizer import equiv_exact, equiv_tableau
from app.zx import circuit_to_zx, zx_to_matrix
from app.zx_rules import zx_rule_catalog, zx_sweep

logger = logging.getLogger(__name__)


def check_zx_instance(rule_id: str, params: Dict[str, Any], max_arity: int = 6) -> RuleCheck:
    """ZX 規則1インスタンスの両辺を厳密行列で比較"""
    try:
        rule = zx_rule_catalog(rule_id, params, max_arity)
        verdict = mat_proportional(zx_to_matrix(rule.lhs), zx_to_matrix(rule.rhs))
    except StabrwError as e:
        return RuleCheck(catalog="zx", rule=rule_id, params=params, verdict=f"error: {e}", passed=False)
    return RuleCheck(
        catalog="zx", rule=rule_id, params=params, verdict=verdict.describe(), passed=verdict.equivalent
    )


def check_circ_instance(rule_id: str, variant: int, params: Dict[str, Any], config: CliConfig) -> RuleCheck:
    """回路規則1インスタンスの両辺を選択されたオラクルで比較"""
    try:
        rule = circ_rule_catalog(rule_id, variant, params, config.ccirc_max)
        verdicts: List[str] = []
        outcomes: List[bool] = []
        if config.oracle in (OracleChoice.EXACT.value, OracleChoice.BOTH.value):
            exact = mat_proportional(
                circuit_to_matrix(rule.lhs, config.exact_max_qubits),
                circuit_to_matrix(rule.rhs, config.exact_max_qubits),
            )
            verdicts.append(exact.describe())
            outcomes.append(exact.equivalent)
        if config.oracle in (OracleChoice.TABLEAU.value, OracleChoice.BOTH.value):
            same = equiv_tableau(rule.lhs, rule.rhs)
            verdicts.append("equivalent" if same else "different")
            outcomes.append(same)
        if len(set(outcomes)) > 1:
            logger.warning(f"oracles disagree on {rule_id}[{variant}] {params}: {verdicts}")
    except StabrwError as e:
        return RuleCheck(
            catalog="circuit", rule=rule_id, variant=variant, params=params, verdict=f"error: {e}", passed=False
        )
    return RuleCheck(
        catalog="circuit", rule=rule_id, variant=variant, params=params,
        verdict=" / ".join(verdicts), passed=all(outcomes),
    )


def translation_sweep(config: CliConfig) -> SweepCheck:
    """ランダム回路（4本以下・12ゲート以下）の ZX 像の行列が回路の行列と比例するか"""
    rng = np.random.default_rng(config.seed)
    sweep = SweepCheck(name="translation", seed=config.seed)
    for _ in range(config.translation_samples):
        circuit = random_circuit(rng, max_wires=4, max_gates=12)
        try:
            verdict = mat_proportional(
                zx_to_matrix(circuit_to_zx(circuit), max_rank=config.exact_max_qubits),
                circuit_to_matrix(circuit, config.exact_max_qubits),
            )
            passed = verdict.equivalent
        except StabrwError as e:
            logger.warning(f"translation check raised: {e}")
            passed = False
        sweep.checked += 1
        if not passed:
            sweep.failures += 1
            if sweep.first_failure is None:
                sweep.first_failure = print_circuit(circuit)
    return sweep


def oracle_sweep(config: CliConfig) -> SweepCheck:
    """
    ランダムな回路の組（5本以下・20ゲート以下）で equiv_tableau と equiv_exact の判定が一致するか

    半分の組は片方を回路規則で1回書き換えたものにして、等価な組も混ぜる。
    """
    rng = np.random.default_rng(config.seed)
    sweep = SweepCheck(name="oracle-agreement", seed=config.seed)
    for _ in range(config.oracle_pairs):
        first, second = random_circuit_pair(rng, max_wires=5, max_gates=20)
        if rng.integers(0, 2) == 0:
            rewrite = random_rewrite(first, rng)
            if rewrite is not None:
                second = rewrite[2]
        try:
            passed = equiv_tableau(first, second) == equiv_exact(first, second, config.exact_max_qubits).equivalent
        except StabrwError as e:
            logger.warning(f"oracle comparison raised: {e}")
            passed = False
        sweep.checked += 1
        if not passed:
            sweep.failures += 1
            if sweep.first_failure is None:
                sweep.first_failure = f"{print_circuit(first)}\n---\n{print_circuit(second)}"
    return sweep


def _jobs(config: CliConfig) -> List[Callable[[], RuleCheck]]:
    jobs: List[Callable[[], RuleCheck]] = []
    for rule_id, params in zx_sweep(config.max_arity):
        jobs.append(lambda r=rule_id, p=params: check_zx_instance(r, p, config.max_arity))
    for rule_id, variant, params in circ_sweep(config.ccirc_max):
        jobs.append(lambda r=rule_id, v=variant, p=params: check_circ_instance(r, v, p, config))
    return jobs


async def run_selftest(config: CliConfig) -> SelftestReport:
    """全インスタンスを並列に検査し、スイープ順のレポートにまとめる"""
    jobs = _jobs(config)
    logger.info(f"Selftest: {len(jobs)} rule instances, {config.workers} workers")
    semaphore = asyncio.Semaphore(config.workers)

    async def run(job: Callable[[], RuleCheck]) -> RuleCheck:
        async with semaphore:
            return await asyncio.to_thread(job)

    results = await asyncio.gather(*(run(job) for job in jobs))
    failures = sum(1 for check in results if not check.passed)
    for check in results:
        if not check.passed:
            logger.error(f"{check.catalog} rule {check.label()} failed: {check.verdict}")

    sweeps = await asyncio.gather(
        asyncio.to_thread(translation_sweep, config),
        asyncio.to_thread(oracle_sweep, config),
    )
    for sweep in sweeps:
        logger.info(f"{sweep.name} sweep (seed {sweep.seed}): {sweep.checked} checked, {sweep.failures} failures")
        if sweep.first_failure is not None:
            logger.error(f"{sweep.name} sweep first failure:\n{sweep.first_failure}")
    logger.info(f"Selftest finished: {len(results)} checked, {failures} failures")
    return SelftestReport(checked=len(results), failures=failures, results=list(results), sweeps=list(sweeps))
