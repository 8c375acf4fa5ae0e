"""Tests for configuration management."""

from __future__ import annotations

import math
import os
from typing import TYPE_CHECKING

import pytest
from pydantic import ValidationError

from cqed_anyons.application.models import UsageError
from cqed_anyons.infrastructure.config import RunConfig, load_config, read_config_file

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture(autouse=True)
def _clear_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """CQED_ で始まる環境変数を取り除く."""
    for key in list(os.environ):
        if key.startswith("CQED_"):
            monkeypatch.delenv(key)


def test_config_default_values() -> None:
    """デフォルト値が正しく設定されることを確認する."""
    config = RunConfig()

    assert config.scenario == "selfcheck"
    assert config.variant == "braiding"
    assert config.labeling is None
    assert config.policy == "postselect_plus"
    assert config.units == "dimensionless"
    assert config.n_max == 4
    assert config.format == "json"
    assert config.out == ""
    assert config.log_dir == ""


def test_config_labeling_comma_separated(monkeypatch: pytest.MonkeyPatch) -> None:
    """labelingがカンマ区切りで設定できることを確認する."""
    monkeypatch.setenv("CQED_LABELING", "6,2,3,4,5,1")

    config = RunConfig()

    assert config.labeling == [6, 2, 3, 4, 5, 1]


def test_config_ratio_sweep_json_array(monkeypatch: pytest.MonkeyPatch) -> None:
    """ratio_sweepがJSON配列形式で設定できることを確認する."""
    monkeypatch.setenv("CQED_RATIO_SWEEP", "[5, 10, 20.5]")

    config = RunConfig()

    assert config.ratio_sweep == [5.0, 10.0, 20.5]


def test_config_ratio_sweep_empty_string(monkeypatch: pytest.MonkeyPatch) -> None:
    """ratio_sweepが空文字の場合Noneになることを確認する."""
    monkeypatch.setenv("CQED_RATIO_SWEEP", "")

    config = RunConfig()

    assert config.ratio_sweep is None


@pytest.mark.parametrize(
    ("field", "value"),
    [
        ("scenario", "teleport"),
        ("variant", "double_braid"),
        ("policy", "always_minus"),
        ("units", "cgs"),
        ("gate", "toffoli"),
        ("subspace", "double_excitation"),
        ("format", "xml"),
        ("labeling", "1,2,3"),
        ("ratio_sweep", "5,-10"),
        ("n_max", "0"),
        ("g", "-1"),
    ],
)
def test_config_invalid_values(field: str, value: str) -> None:
    """不正な値でValidationErrorになることを確認する."""
    with pytest.raises(ValidationError):
        RunConfig(**{field: value})


def test_read_config_file(tmp_path: Path) -> None:
    """KEY=value 形式のファイルからフィールド名で読めることを確認する."""
    path = tmp_path / "run.env"
    path.write_text("# selfcheck\nSCENARIO=sweep\nCQED_N_MAX=6\nratio_sweep=5,10\n")

    values = read_config_file(path)

    assert values == {"scenario": "sweep", "n_max": "6", "ratio_sweep": "5,10"}


def test_read_config_file_missing(tmp_path: Path) -> None:
    """存在しないファイルでUsageErrorになることを確認する."""
    with pytest.raises(UsageError):
        read_config_file(tmp_path / "missing.env")


def test_load_config_precedence(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """明示指定 > 設定ファイル > 環境変数 の順に優先されることを確認する."""
    monkeypatch.setenv("CQED_SEED", "1")
    monkeypatch.setenv("CQED_N_MAX", "3")
    path = tmp_path / "run.env"
    path.write_text("SEED=2\nGATE=z_rotation\n")

    config = load_config(path, {"seed": "7", "gate": None})

    assert config.seed == 7
    assert config.gate == "z_rotation"
    assert config.n_max == 3


def test_to_pulse_params_defaults() -> None:
    """既定値が x 回転の較正点（δ = 10g、Δ = g²/δ、Ω = g/2）になることを確認する."""
    p = RunConfig().to_pulse_params()

    assert p.g == pytest.approx(1.0)
    assert p.delta == pytest.approx(10.0)
    assert p.detuning == pytest.approx(0.1)
    assert p.rabi == pytest.approx(0.5)


def test_to_pulse_params_iswap_resonant() -> None:
    """iSWAP ではνの既定値がω_rになることを確認する."""
    p = RunConfig(gate="iswap").to_pulse_params()

    assert p.nu == pytest.approx(p.omega_r)


def test_to_pulse_params_drive_phase() -> None:
    """drive_phaseがεの位相になることを確認する."""
    p = RunConfig(epsilon=2.0, drive_phase=math.pi / 2).to_pulse_params()

    assert p.epsilon == pytest.approx(2.0j)


def test_si_units_convert_to_angular_frequency() -> None:
    """si では MHz の入力に 2π を掛けることを確認する."""
    config = RunConfig(units="si", g=50.0)

    assert config.coupling == pytest.approx(2 * math.pi * 50.0)
    assert config.cavity_frequency == pytest.approx(2 * math.pi * 6000.0)
    assert config.to_pulse_params().delta == pytest.approx(10 * 2 * math.pi * 50.0)


def test_echo_excludes_output_and_logging() -> None:
    """config_echo に出力先とログ設定が含まれないことを確認する."""
    echo = RunConfig(out="report.json", log_level="DEBUG").echo()

    assert echo["scenario"] == "selfcheck"
    assert "out" not in echo
    assert "log_level" not in echo
    assert "log_dir" not in echo
