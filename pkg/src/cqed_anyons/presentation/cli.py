"""Command-line scenarios and report emission."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, NoReturn

import numpy as np

from cqed_anyons.application.gates import u_theta
from cqed_anyons.application.hilbert import MeasurementPolicy
from cqed_anyons.application.interferometry import (
    BraidingPhase,
    InterferometryVariant,
    run_interferometry,
)
from cqed_anyons.application.models import InvariantCheck, SweepPoint, UsageError
from cqed_anyons.application.pulse import (
    DISPERSIVE_RATIO_WARNING,
    ParameterError,
    PulseGate,
    PulseParams,
    Subspace,
    gate_time,
    ideal_rotation,
    pulse_gate_fidelity,
    vacuum_splitting,
)
from cqed_anyons.application.selfcheck import defect_pairing_check, run_selfcheck
from cqed_anyons.application.sweep import DEFAULT_RATIOS, run_sweep
from cqed_anyons.application.toric import (
    MinimalLattice,
    ground_state_checks,
    prepare_ground_state,
    stabilizer_expectations,
)
from cqed_anyons.infrastructure.config import SCENARIOS, RunConfig, load_config
from cqed_anyons.infrastructure.logging import get_logger
from cqed_anyons.infrastructure.report import (
    Report,
    build_report,
    load_golden,
    regression_check,
    render_csv,
    render_json,
    write_output,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2

EXPECTED_PHASE = {
    InterferometryVariant.BRAIDING: BraidingPhase.MINUS,
    InterferometryVariant.CONTROL_NO_E_PAIR: BraidingPhase.PLUS,
    InterferometryVariant.HALT_AFTER_CREATION: BraidingPhase.INDETERMINATE,
}
EXPECTED_ORACLE_X = {
    InterferometryVariant.BRAIDING: -1,
    InterferometryVariant.CONTROL_NO_E_PAIR: 1,
    InterferometryVariant.HALT_AFTER_CREATION: 0,
}

# CLI フラグ → RunConfig フィールド
_FLAG_FIELDS = (
    "variant",
    "labeling",
    "ratio_sweep",
    "n_max",
    "seed",
    "out",
    "format",
    "golden",
    "units",
    "policy",
    "gate",
    "subspace",
    "log_level",
)


class CliArgumentParser(argparse.ArgumentParser):
    """引数エラーを UsageError として送出する ArgumentParser."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    """サブコマンドと共通フラグを持つパーサーを作る."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="KEY=value 形式の設定ファイル")
    common.add_argument(
        "--variant", help="干渉計の実行パターン (braiding, control_no_e_pair, halt_after_creation)"
    )
    common.add_argument("--labeling", help="役割→スピンの置換（例: 1,2,3,4,5,6）")
    common.add_argument("--ratio-sweep", dest="ratio_sweep", help="δ/g の一覧（例: 5,10,20,50）")
    common.add_argument("--n-max", dest="n_max", help="キャビティの Fock 打ち切り")
    common.add_argument("--seed", help="乱数シード")
    common.add_argument("--out", help="レポートの出力先（省略時 stdout）")
    common.add_argument("--format", help="出力形式 (json, csv)")
    common.add_argument("--golden", help="results を比較する golden レポート")
    common.add_argument("--units", help="単位系 (dimensionless, si)")
    common.add_argument("--policy", help="キャビティ測定のポリシー")
    common.add_argument("--gate", help="パルスゲート (x_rotation, z_rotation, iswap)")
    common.add_argument("--subspace", help="iSWAP の比較部分空間 (single_excitation, full)")
    common.add_argument("--log-level", dest="log_level", help="ログレベル")

    parser = CliArgumentParser(
        prog="cqed-anyons",
        description="Circuit-QED simulator for minimal toric-code anyonic interferometry",
    )
    subparsers = parser.add_subparsers(dest="scenario", required=True)
    for scenario in SCENARIOS:
        subparsers.add_parser(scenario, parents=[common])
    return parser


def config_from_args(argv: Sequence[str] | None = None) -> RunConfig:
    """
    コマンドライン引数から設定を作る（フラグは設定ファイルより優先）.

    Raises:
        UsageError: 引数や設定ファイルが不正な場合
        pydantic.ValidationError: 値が不正な場合
    """
    args = build_parser().parse_args(argv)
    overrides: dict[str, Any] = {name: getattr(args, name) for name in _FLAG_FIELDS}
    overrides["scenario"] = args.scenario
    return load_config(args.config, overrides)


@dataclass
class ScenarioOutcome:
    """シナリオの結果（レポート本体と、スイープの場合は CSV 用の点列）."""

    results: dict[str, Any]
    checks: list[InvariantCheck] = field(default_factory=list)
    points: list[SweepPoint] | None = None


def _lattice(config: RunConfig) -> MinimalLattice:
    return MinimalLattice.from_labeling(config.labeling)


async def run_prepare(config: RunConfig) -> ScenarioOutcome:
    """基底状態を準備し、生成元と期待値を報告する."""
    prepared = prepare_ground_state(
        _lattice(config), MeasurementPolicy(config.policy), seed=config.seed
    )
    results = prepared.to_document()
    results["generator_expectations"] = stabilizer_expectations(
        prepared.state, prepared.generators
    )
    checks = ground_state_checks(prepared)
    checks.append(defect_pairing_check(prepared))
    return ScenarioOutcome(results, checks)


async def run_interfere(config: RunConfig) -> ScenarioOutcome:
    """
    干渉計を実行し、期待される位相と比べる.

    Raises:
        PhysicsInvariantError: 基底状態の不変条件が破れている場合
    """
    variant = InterferometryVariant(config.variant)
    prepared = prepare_ground_state(
        _lattice(config), MeasurementPolicy(config.policy), seed=config.seed
    )
    result = run_interferometry(prepared, variant)
    expected_phase = EXPECTED_PHASE[variant]
    expected_x = EXPECTED_ORACLE_X[variant]
    checks = [
        InvariantCheck(
            "expected cavity phase",
            result.phase is expected_phase,
            f"phase {result.phase.value}, expected {expected_phase.value}",
        ),
        InvariantCheck(
            "oracle cavity X",
            result.oracle_cavity_x == expected_x,
            f"<X_c> = {result.oracle_cavity_x:+d}, expected {expected_x:+d}",
        ),
    ]
    return ScenarioOutcome(result.to_document(), checks)


def _derived(p: PulseParams) -> dict[str, Any]:
    derived: dict[str, Any] = {
        "delta": p.delta,
        "detuning": p.detuning,
        "vacuum_splitting": vacuum_splitting(p),
        "delta_over_g": p.delta / p.g if p.g else None,
    }
    for name in ("rabi", "chi"):
        try:
            derived[name] = getattr(p, name)
        except ParameterError:
            derived[name] = None
    return derived


def _single_point(config: RunConfig) -> ScenarioOutcome:
    p = config.to_pulse_params()
    which = PulseGate(config.gate)
    subspace = Subspace(config.subspace)
    if which is PulseGate.ISWAP:
        ideal = u_theta(np.pi / 2).matrix
        angle = np.pi
    else:
        ideal = ideal_rotation(which, config.angle, phase=float(np.angle(p.rabi)))
        angle = config.angle
    value = pulse_gate_fidelity(ideal, p, which, angle, subspace)
    results = {
        "gate": which.value,
        "subspace": subspace.value if which is PulseGate.ISWAP else None,
        "fidelity": value,
        "gate_time": gate_time(which, p, angle),
        "params": {
            "omega_r": p.omega_r,
            "nu": p.nu,
            "g": p.g,
            "omega_d": p.omega_d,
            "epsilon": p.epsilon,
            "n_max": p.n_max,
        },
        "derived": _derived(p),
    }
    checks = []
    if which is not PulseGate.ISWAP and p.g > 0:
        ratio = abs(p.delta) / p.g
        checks.append(
            InvariantCheck(
                "dispersive regime",
                ratio >= DISPERSIVE_RATIO_WARNING,
                f"delta/g = {ratio:.6g}",
                soft=True,
            )
        )
    return ScenarioOutcome(results, checks)


async def _sweep(
    config: RunConfig, ratios: Sequence[float], convergence: bool
) -> ScenarioOutcome:
    result = await run_sweep(
        ratios,
        PulseGate(config.gate),
        g=config.coupling,
        omega_r=config.cavity_frequency,
        n_max=config.n_max,
        angle=config.angle,
        check_convergence=convergence,
    )
    return ScenarioOutcome(result.to_document(), list(result.checks), list(result.points))


async def run_pulse_fidelity(config: RunConfig) -> ScenarioOutcome:
    """単一点の忠実度、または --ratio-sweep 指定時は δ/g スイープ."""
    if config.ratio_sweep:
        return await _sweep(config, config.ratio_sweep, convergence=False)
    return _single_point(config)


async def run_sweep_scenario(config: RunConfig) -> ScenarioOutcome:
    """δ/g スイープ（n_max + 2 での収束チェック付き）."""
    ratios = config.ratio_sweep or list(DEFAULT_RATIOS)
    return await _sweep(config, ratios, convergence=True)


async def run_selfcheck_scenario(config: RunConfig) -> ScenarioOutcome:
    """不変条件の一式を実行する."""
    checks = await run_selfcheck(_lattice(config), seed=config.seed)
    results = {
        "total": len(checks),
        "passed": sum(c.passed for c in checks),
        "failed": [c.name for c in checks if not c.passed],
    }
    return ScenarioOutcome(results, checks)


SCENARIO_RUNNERS = {
    "prepare": run_prepare,
    "interfere": run_interfere,
    "pulse-fidelity": run_pulse_fidelity,
    "sweep": run_sweep_scenario,
    "selfcheck": run_selfcheck_scenario,
}


def _is_sweep(config: RunConfig) -> bool:
    return config.scenario == "sweep" or (
        config.scenario == "pulse-fidelity" and bool(config.ratio_sweep)
    )


def format_check_table(checks: Sequence[InvariantCheck]) -> str:
    """pass/fail の表を作る."""
    width = max((len(c.name) for c in checks), default=0)
    lines = []
    for check in checks:
        status = "PASS" if check.passed else ("WARN" if check.soft else "FAIL")
        lines.append(f"{status}  {check.name.ljust(width)}  {check.detail}".rstrip())
    return "\n".join(lines) + "\n"


async def run(config: RunConfig) -> int:
    """
    シナリオを実行してレポートを書き出す.

    Returns:
        終了コード（0: 成功、2: 不変条件の失敗）

    Raises:
        UsageError: CSV が使えないシナリオ、golden レポートや出力先の問題
        PhysicsInvariantError: シナリオ中に不変条件が破れた場合
    """
    if config.format == "csv" and not _is_sweep(config):
        raise UsageError(f"CSV output is only available for sweeps, not {config.scenario!r}")

    logger.info("Running scenario", scenario=config.scenario, units=config.units)
    outcome = await SCENARIO_RUNNERS[config.scenario](config)
    checks = list(outcome.checks)
    report = build_report(config.scenario, config.units, config.echo(), outcome.results, checks)
    if config.golden:
        checks.append(regression_check(load_golden(config.golden), report))
        report = build_report(
            config.scenario, config.units, config.echo(), outcome.results, checks
        )

    if config.format == "csv" and outcome.points is not None:
        write_output(render_csv(outcome.points), config.out)
    else:
        write_output(render_json(report), config.out)

    if config.scenario == "selfcheck":
        sys.stderr.write(format_check_table(checks))
    return exit_status(report)


def exit_status(report: Report) -> int:
    """soft でないチェックが失敗していれば 2."""
    failures = report.hard_failures
    if not failures:
        return EXIT_OK
    first = failures[0]
    logger.error("Invariant check failed", invariant=first.name, detail=first.detail)
    sys.stderr.write(f"invariant failed: {first.name}: {first.detail}\n")
    return EXIT_INVARIANT
