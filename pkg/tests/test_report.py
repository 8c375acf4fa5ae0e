"""Tests for report rendering."""

from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from cqed_anyons.application.models import InvariantCheck, SweepPoint, UsageError
from cqed_anyons.infrastructure.report import (
    SCHEMA_VERSION,
    build_report,
    diff_documents,
    load_golden,
    regression_check,
    render_csv,
    render_json,
    round_floats,
    round_significant,
    write_output,
)

if TYPE_CHECKING:
    from pathlib import Path


class TestRounding:
    """丸めのテスト."""

    def test_significant_digits(self) -> None:
        """有効数字 12 桁に丸めることを確認する."""
        assert round_significant(1 / 3) == 0.333333333333
        assert round_significant(0.1 + 0.2) == 0.3

    def test_negative_zero(self) -> None:
        """-0.0 が 0.0 にそろうことを確認する."""
        assert math.copysign(1.0, round_significant(-0.0)) == 1.0

    def test_non_finite_unchanged(self) -> None:
        """無限大がそのまま残ることを確認する."""
        assert round_significant(math.inf) == math.inf

    def test_nested_structures(self) -> None:
        """numpy 型・複素数・入れ子の構造を変換することを確認する."""
        data = {
            "a": np.float64(0.1) + np.float64(0.2),
            "b": [1j],
            "c": np.array([1, 2]),
            "d": np.bool_(True),
            "e": (np.int64(3), "text"),
        }
        assert round_floats(data) == {
            "a": 0.3,
            "b": [{"real": 0.0, "imag": 1.0}],
            "c": [1, 2],
            "d": True,
            "e": [3, "text"],
        }


class TestReport:
    """Report と JSON 出力のテスト."""

    @pytest.fixture
    def checks(self) -> list[InvariantCheck]:
        return [
            InvariantCheck("hard ok", True),
            InvariantCheck("soft fail", False, "warn", soft=True),
            InvariantCheck("hard fail", False, "broken"),
        ]

    def test_hard_failures(self, checks: list[InvariantCheck]) -> None:
        """soft なチェックが hard_failures に含まれないことを確認する."""
        report = build_report("selfcheck", "dimensionless", {}, {}, checks)
        assert [c.name for c in report.hard_failures] == ["hard fail"]

    def test_json_uses_pass_key(self, checks: list[InvariantCheck]) -> None:
        """チェック結果が "pass" キーで出力されることを確認する."""
        text = render_json(build_report("selfcheck", "dimensionless", {}, {}, checks))
        document = json.loads(text)
        assert document["schema_version"] == SCHEMA_VERSION
        assert document["invariant_checks"][0] == {
            "name": "hard ok",
            "pass": True,
            "detail": "",
            "soft": False,
        }

    def test_json_is_deterministic(self) -> None:
        """キーが整列され、末尾が改行であることを確認する."""
        report = build_report("prepare", "si", {"b": 1, "a": 2}, {"z": 0.1 + 0.2})
        text = render_json(report)
        assert text.endswith("}\n")
        assert text == render_json(report)
        assert text.index('"config_echo"') < text.index('"results"')
        assert json.loads(text)["results"] == {"z": 0.3}


class TestCsv:
    """CSV 出力のテスト."""

    def test_render_csv(self) -> None:
        """ヘッダーと 1 点 1 行の出力を確認する."""
        points = [SweepPoint(5.0, 4, 0.9), SweepPoint(10.0, 4, 1 / 3)]
        assert render_csv(points) == (
            "delta_over_g,n_max,fidelity\n5.0,4,0.9\n10.0,4,0.333333333333\n"
        )


class TestWriteOutput:
    """write_output のテスト."""

    def test_stdout(self, capsys: pytest.CaptureFixture[str]) -> None:
        """出力先が空なら stdout に書くことを確認する."""
        write_output("hello\n")
        assert capsys.readouterr().out == "hello\n"

    def test_file(self, tmp_path: Path) -> None:
        """ファイルに書き出せることを確認する."""
        path = tmp_path / "report.json"
        write_output("{}\n", path)
        assert path.read_text(encoding="utf-8") == "{}\n"

    def test_unwritable_target(self, tmp_path: Path) -> None:
        """書き込めない出力先でUsageErrorになることを確認する."""
        with pytest.raises(UsageError):
            write_output("{}\n", tmp_path)


class TestGolden:
    """golden レポートとの比較のテスト."""

    def test_diff_documents(self) -> None:
        """値・キー・長さの違いをパスで返すことを確認する."""
        expected = {"a": 1.0, "b": [1, 2], "c": {"d": "x"}}
        actual = {"a": 1.5, "b": [1], "c": {"d": "x", "e": 0}}
        assert diff_documents(expected, actual) == ["results.a", "results.b[len]", "results.c.e"]
        assert diff_documents(expected, expected) == []

    def test_regression_check(self) -> None:
        """results と scenario が一致すれば通ることを確認する."""
        report = build_report("prepare", "dimensionless", {}, {"phase": "-1", "x": 0.1 + 0.2})
        golden = json.loads(render_json(report))
        assert regression_check(golden, report).passed
        golden["results"]["phase"] = "+1"
        check = regression_check(golden, report)
        assert not check.passed
        assert "results.phase" in check.detail
        assert not check.soft

    def test_scenario_mismatch(self) -> None:
        """シナリオが違えば失敗することを確認する."""
        report = build_report("prepare", "dimensionless", {}, {})
        assert not regression_check({"scenario": "sweep", "results": {}}, report).passed

    def test_load_golden_errors(self, tmp_path: Path) -> None:
        """読めない・JSON でない・results がないファイルでUsageErrorになることを確認する."""
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        empty = tmp_path / "empty.json"
        empty.write_text("{}", encoding="utf-8")
        for path in (tmp_path / "missing.json", broken, empty):
            with pytest.raises(UsageError):
                load_golden(path)
