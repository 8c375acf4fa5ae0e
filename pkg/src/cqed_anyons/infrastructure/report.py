"""Report schema and writers."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cqed_anyons.application.models import InvariantCheck, SweepPoint, UsageError
from cqed_anyons.infrastructure.logging import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = "1.0"
SIGNIFICANT_DIGITS = 12
CSV_HEADER = ("delta_over_g", "n_max", "fidelity")


class CheckRecord(BaseModel):
    """レポート内の不変条件チェック 1 件."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str
    passed: bool = Field(serialization_alias="pass")
    detail: str = ""
    soft: bool = False

    @classmethod
    def from_check(cls, check: InvariantCheck) -> CheckRecord:
        return cls(name=check.name, passed=check.passed, detail=check.detail, soft=check.soft)


class Report(BaseModel):
    """
    機械可読なシナリオレポート.

    時刻などの実行環境依存の値は含めない。
    同じ設定とシードからは同じバイト列になる。
    """

    model_config = ConfigDict(frozen=True)

    schema_version: str = SCHEMA_VERSION
    scenario: str
    units: str
    config_echo: dict[str, Any] = Field(default_factory=dict)
    results: dict[str, Any] = Field(default_factory=dict)
    invariant_checks: list[CheckRecord] = Field(default_factory=list)

    @property
    def hard_failures(self) -> list[CheckRecord]:
        """失敗した soft でないチェック."""
        return [c for c in self.invariant_checks if not c.passed and not c.soft]


def build_report(
    scenario: str,
    units: str,
    config_echo: Mapping[str, Any],
    results: Mapping[str, Any],
    checks: Iterable[InvariantCheck] = (),
) -> Report:
    """結果を丸めてレポートにまとめる."""
    return Report(
        scenario=scenario,
        units=units,
        config_echo=round_floats(dict(config_echo)),
        results=round_floats(dict(results)),
        invariant_checks=[CheckRecord.from_check(c) for c in checks],
    )


def round_significant(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    """有効数字 digits 桁に丸める（-0.0 は 0.0 にそろえる）."""
    if not math.isfinite(value):
        return value
    rounded = float(f"{value:.{digits}g}")
    return 0.0 if rounded == 0 else rounded


def round_floats(obj: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """
    入れ子のデータ中の浮動小数点数を有効数字 digits 桁に丸める.

    numpy のスカラー・配列はリストに、複素数は {"real", "imag"} に変換する。
    """
    if isinstance(obj, bool | np.bool_):
        return bool(obj)
    if isinstance(obj, int | np.integer):
        return int(obj)
    if isinstance(obj, float | np.floating):
        return round_significant(float(obj), digits)
    if isinstance(obj, complex | np.complexfloating):
        return {
            "real": round_significant(float(obj.real), digits),
            "imag": round_significant(float(obj.imag), digits),
        }
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist(), digits)
    if isinstance(obj, Mapping):
        return {str(k): round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [round_floats(v, digits) for v in obj]
    return obj


def render_json(report: Report) -> str:
    """レポートを決定的な JSON 文字列にする."""
    document = report.model_dump(mode="json", by_alias=True)
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def render_csv(points: Sequence[SweepPoint]) -> str:
    """スイープ結果を CSV にする（ヘッダー delta_over_g,n_max,fidelity）."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for point in points:
        writer.writerow(
            [
                repr(round_significant(point.delta_over_g)),
                point.n_max,
                repr(round_significant(point.fidelity)),
            ]
        )
    return buffer.getvalue()


def load_golden(path: str | Path) -> dict[str, Any]:
    """
    golden レポート（以前の JSON 出力）を読む.

    Raises:
        UsageError: ファイルが読めない、または JSON レポートでない場合
    """
    file_path = Path(path)
    try:
        document = json.loads(file_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"Cannot read golden report {file_path}: {e}") from e
    if not isinstance(document, dict) or "results" not in document:
        raise UsageError(f"Golden report {file_path} has no results section")
    return document


def diff_documents(expected: Any, actual: Any, path: str = "results") -> list[str]:
    """2 つの JSON 値が異なる位置のパス一覧."""
    if isinstance(expected, dict) and isinstance(actual, dict):
        diffs = []
        for key in sorted(set(expected) | set(actual)):
            if key not in expected or key not in actual:
                diffs.append(f"{path}.{key}")
            else:
                diffs.extend(diff_documents(expected[key], actual[key], f"{path}.{key}"))
        return diffs
    if isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            return [f"{path}[len]"]
        diffs = []
        for i, (e, a) in enumerate(zip(expected, actual, strict=True)):
            diffs.extend(diff_documents(e, a, f"{path}[{i}]"))
        return diffs
    return [] if expected == actual else [path]


def regression_check(golden: Mapping[str, Any], report: Report) -> InvariantCheck:
    """レポートの results が golden と一致するかを調べる."""
    diffs = diff_documents(golden.get("results"), report.model_dump(mode="json")["results"])
    if golden.get("scenario") != report.scenario:
        diffs.insert(0, "scenario")
    detail = "matches golden" if not diffs else f"{len(diffs)} differences, first at {diffs[0]}"
    return InvariantCheck("golden regression", not diffs, detail)


def write_output(text: str, out: str | Path = "") -> None:
    """
    レポートを書き出す.

    Args:
        text: 出力内容
        out: 出力先パス（空文字で stdout）

    Raises:
        UsageError: 出力先に書き込めない場合
    """
    if not out:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise UsageError(f"Cannot write report to {path}: {e}") from e
    logger.info("Report written", path=str(path), size=len(text))
