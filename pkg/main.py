"""
stabrw - 安定化子回路・ZX 図の書き換えエンジン
コマンドラインのエントリポイント
"""
import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# 環境変数を読み込み
load_dotenv()

from config import get_settings  # noqa: E402
from app.circuit import parse_circuit, print_circuit  # noqa: E402
from app.circuit_rules import run_circ_steps, verify_circ_derivation  # noqa: E402
from app.exceptions import NoMatchError, StabrwError  # noqa: E402
from app.fixtures import fixture_library, load_script  # noqa: E402
from app.models import (  # noqa: E402
    BindingSpec,
    CliConfig,
    DerivationReport,
    Direction,
    EquivReport,
    OracleChoice,
    OutputFormat,
    StepSpec,
    ZxDerivationScript,
)
from app.selftest import run_selftest  # noqa: E402
from app.stabilizer import equiv_exact, equiv_tableau  # noqa: E402
from app.zx import circuit_to_zx, parse_zx, print_zx, zx_normalize  # noqa: E402
from app.zx_rules import run_zx_steps, verify_zx_derivation  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NEGATIVE = 2


class _Parser(argparse.ArgumentParser):
    """使い方エラーを終了コード 1 にする"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--oracle", choices=[o.value for o in OracleChoice])
    parser.add_argument("--max-arity", type=int)
    parser.add_argument("--ccirc-max", type=int)
    parser.add_argument("--format", dest="output_format", choices=[f.value for f in OutputFormat])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stabrw", description="Stabilizer circuit and ZX diagram rewriting engine")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    selftest = sub.add_parser("selftest", help="check every catalog rule instance with the oracle")
    _add_common(selftest)
    selftest.add_argument("--translation-samples", type=int, help="seeded random circuits for the ZX translation check")
    selftest.add_argument("--oracle-pairs", type=int, help="seeded random circuit pairs for the oracle cross-check")

    equiv = sub.add_parser("equiv", help="compare two circuits up to a scalar")
    equiv.add_argument("first")
    equiv.add_argument("second")
    _add_common(equiv)

    verify = sub.add_parser("verify", help="check a derivation script step by step")
    verify.add_argument("script")
    _add_common(verify)

    apply = sub.add_parser("apply", help="apply one rule to a circuit (or a .zx diagram)")
    apply.add_argument("file")
    apply.add_argument("--rule", required=True)
    apply.add_argument("--variant", type=int, default=0)
    apply.add_argument("--direction", choices=[d.value for d in Direction], default=Direction.LR.value)
    apply.add_argument("--match", type=int, default=0)
    apply.add_argument("--fix", action="append", default=[], metavar="PATTERN=HOST")
    apply.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    _add_common(apply)

    translate = sub.add_parser("translate", help="print the ZX image of a circuit")
    translate.add_argument("file")
    _add_common(translate)

    mutations = sub.add_parser("mutations", help="run the corrupted-script corpus; every entry must be rejected")
    _add_common(mutations)
    return parser


def build_config(args: argparse.Namespace) -> CliConfig:
    """Settings とコマンドラインフラグを合成"""
    settings = get_settings()
    values: Dict[str, Any] = {
        "max_arity": settings.max_arity,
        "ccirc_max": settings.ccirc_max,
        "oracle": settings.oracle,
        "output_format": settings.output_format,
        "seed": settings.seed,
        "fixtures": settings.fixtures,
        "exact_max_qubits": settings.exact_max_qubits,
        "workers": settings.selftest_workers,
        "translation_samples": settings.selftest_translation_samples,
        "oracle_pairs": settings.selftest_oracle_pairs,
    }
    for key in (
        "max_arity", "ccirc_max", "oracle", "output_format", "seed", "workers", "translation_samples", "oracle_pairs"
    ):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return CliConfig(**values)


def _resolve(name: str, config: CliConfig) -> Path:
    """そのまま見つからなければフィクスチャディレクトリから探す"""
    path = Path(name)
    if path.exists():
        return path
    candidate = Path(config.fixtures) / name
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no such file: {name}")


def _read(name: str, config: CliConfig) -> str:
    return _resolve(name, config).read_text(encoding="utf-8")


def _parse_value(text: str) -> Any:
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        return text


def _pairs(items: List[str], what: str) -> Dict[str, str]:
    pairs = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"{what} must look like NAME=VALUE, got '{item}'")
        pairs[key.strip()] = value.strip()
    return pairs


def _structured(config: CliConfig) -> bool:
    return config.output_format == OutputFormat.STRUCTURED.value


# =========================
# サブコマンド
# =========================

def cmd_selftest(config: CliConfig) -> int:
    report = asyncio.run(run_selftest(config))
    if _structured(config):
        print(report.model_dump_json(indent=2))
    else:
        for check in report.results:
            status = "OK  " if check.passed else "FAIL"
            print(f"{status} {check.catalog:7} {check.label()}: {check.verdict}")
        print(f"{report.checked} rules checked, {report.failures} failures")
        for sweep in report.sweeps:
            print(f"{sweep.name} (seed {sweep.seed}): {sweep.checked} checked, {sweep.failures} failures")
    failure = report.first_failure
    if failure is not None:
        logger.error(f"first failing rule: {failure.label()}")
        return EXIT_USAGE
    if not report.passed:
        logger.error("a seeded sweep failed")
        return EXIT_USAGE
    return EXIT_OK


def cmd_equiv(first: str, second: str, config: CliConfig) -> int:
    c1 = parse_circuit(_read(first, config))
    c2 = parse_circuit(_read(second, config))
    exact = None
    tableau = None
    if config.oracle in (OracleChoice.EXACT.value, OracleChoice.BOTH.value):
        exact = equiv_exact(c1, c2, config.exact_max_qubits)
    if config.oracle in (OracleChoice.TABLEAU.value, OracleChoice.BOTH.value):
        tableau = equiv_tableau(c1, c2)
    outcomes = [v for v in (exact.equivalent if exact else None, tableau) if v is not None]
    if len(set(outcomes)) > 1:
        logger.warning(f"oracles disagree: exact={exact.describe()}, tableau={tableau}")
    report = EquivReport(exact=exact, tableau=tableau, equivalent=all(outcomes))
    if _structured(config):
        print(report.model_dump_json(indent=2))
    else:
        if exact is not None:
            print(exact.describe())
        if tableau is not None:
            print("equivalent" if tableau else "different")
    return EXIT_OK if report.equivalent else EXIT_NEGATIVE


def _verify(script, config: CliConfig) -> DerivationReport:
    if isinstance(script, ZxDerivationScript):
        return verify_zx_derivation(script, config.max_arity, config.exact_max_qubits)
    return verify_circ_derivation(script, config.ccirc_max, config.exact_max_qubits)


def _print_report(report: DerivationReport) -> None:
    for step in report.steps:
        line = f"step {step.index}: {step.rule} {step.direction} {step.status}"
        if step.reason:
            line += f" ({step.reason})"
        print(line)
    print(report.summary())


def cmd_verify(script_name: str, config: CliConfig) -> int:
    script = load_script(_resolve(script_name, config))
    report = _verify(script, config)
    if _structured(config):
        print(report.model_dump_json(indent=2))
    else:
        _print_report(report)
    return EXIT_OK if report.accepted else EXIT_NEGATIVE


def cmd_apply(args: argparse.Namespace, config: CliConfig) -> int:
    fix = {key: int(value) for key, value in _pairs(args.fix, "--fix").items()}
    params = {key: _parse_value(value) for key, value in _pairs(args.param, "--param").items()}
    step = StepSpec(
        rule=args.rule,
        variant=args.variant,
        params=params,
        direction=args.direction,
        binding=BindingSpec(match=args.match, fix=fix),
    )
    text = _read(args.file, config)
    if args.file.endswith(".zx"):
        print(print_zx(run_zx_steps(zx_normalize(parse_zx(text)), [step], config.max_arity)))
    else:
        print(print_circuit(run_circ_steps(parse_circuit(text), [step], config.ccirc_max)))
    return EXIT_OK


def cmd_translate(file: str, config: CliConfig) -> int:
    print(print_zx(circuit_to_zx(parse_circuit(_read(file, config)))))
    return EXIT_OK


def cmd_mutations(config: CliConfig) -> int:
    """原本はすべて受理、改変はすべて棄却されることを確かめる"""
    fixture_library.load(config.fixtures)
    ok = True
    for name in sorted({m.script for m in fixture_library.mutations}):
        report = _verify(fixture_library.script(name), config)
        print(f"original {name}: {report.summary()}")
        ok = ok and report.accepted
    for mutation in fixture_library.mutations:
        report = _verify(fixture_library.mutated(mutation), config)
        verdict = "rejected" if not report.accepted else "ACCEPTED"
        print(f"{mutation.id} [{mutation.category}] {mutation.script}: {verdict} {report.reason or ''}".rstrip())
        ok = ok and not report.accepted
    print(f"{len(fixture_library.mutations)} mutations checked")
    return EXIT_OK if ok else EXIT_NEGATIVE


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    # ロギング設定（標準出力はコマンドの出力専用）
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
        if args.command == "selftest":
            return cmd_selftest(config)
        if args.command == "equiv":
            return cmd_equiv(args.first, args.second, config)
        if args.command == "verify":
            return cmd_verify(args.script, config)
        if args.command == "apply":
            return cmd_apply(args, config)
        if args.command == "translate":
            return cmd_translate(args.file, config)
        if args.command == "mutations":
            return cmd_mutations(config)
    except StabrwError as e:
        # マッチ無しは意味上の否定
        if isinstance(e, NoMatchError):
            logger.error(f"{e}")
            return EXIT_NEGATIVE
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except (OSError, KeyError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
