"""Configuration management."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Any

from dotenv import dotenv_values
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict

from cqed_anyons.application.hilbert import MeasurementPolicy
from cqed_anyons.application.interferometry import InterferometryVariant
from cqed_anyons.application.models import UsageError
from cqed_anyons.application.pulse import PulseGate, PulseParams, Subspace

SCENARIOS = ("prepare", "interfere", "pulse-fidelity", "sweep", "selfcheck")
UNIT_SYSTEMS = ("dimensionless", "si")
OUTPUT_FORMATS = ("json", "csv")

# 無次元の既定値（g = 1 単位）。si では MHz（f/2π）として読む
_DEFAULT_G = {"dimensionless": 1.0, "si": 100.0}
_DEFAULT_OMEGA_R = {"dimensionless": 60.0, "si": 6000.0}
_DEFAULT_RATIO = 10.0

# レポートの config_echo から外すフィールド（出力先・比較先・ログ設定）
_ECHO_EXCLUDE = {"out", "golden", "log_level", "log_dir", "log_backup_count"}


def _split_list(v: Any) -> Any:
    """カンマ区切り文字列または JSON 配列をリストにする."""
    if isinstance(v, str):
        text = v.strip()
        if not text:
            return []
        try:
            parsed = json.loads(text)
            if isinstance(parsed, list):
                return parsed
            return [parsed]
        except json.JSONDecodeError:
            return [item.strip() for item in text.split(",") if item.strip()]
    return v


class RunConfig(BaseSettings):
    """シミュレーション実行設定."""

    model_config = SettingsConfigDict(
        env_prefix="CQED_",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # シナリオ設定
    scenario: str = Field(
        default="selfcheck",
        description="実行シナリオ (prepare, interfere, pulse-fidelity, sweep, selfcheck)",
    )
    variant: str = Field(
        default=InterferometryVariant.BRAIDING.value,
        description="干渉計の実行パターン (braiding, control_no_e_pair, halt_after_creation)",
    )
    labeling: Annotated[list[int] | None, NoDecode] = Field(
        default=None,
        description="役割→スピンの置換（例: 1,2,3,4,5,6）。省略時は較正済みの配置",
    )
    policy: str = Field(
        default=MeasurementPolicy.POSTSELECT_PLUS.value,
        description="キャビティ X 測定の扱い (postselect_plus, sample, both_branches)",
    )
    seed: int = Field(
        default=0,
        description="sample ポリシー用の乱数シード",
    )

    # パルス設定
    units: str = Field(
        default="dimensionless",
        description="物理量の単位系 (dimensionless: g = 1, si: f/2π を MHz で指定)",
    )
    gate: str = Field(
        default=PulseGate.X_ROTATION.value,
        description="pulse-fidelity で評価するゲート (x_rotation, z_rotation, iswap)",
    )
    subspace: str = Field(
        default=Subspace.SINGLE_EXCITATION.value,
        description="iSWAP の比較部分空間 (single_excitation, full)",
    )
    angle: float = Field(
        default=math.pi,
        description="回転角",
    )
    g: float | None = Field(default=None, ge=0, description="結合 g")
    omega_r: float | None = Field(default=None, description="キャビティ周波数 ω_r")
    omega_d: float | None = Field(
        default=None,
        description="ドライブ周波数 ω_d（省略時 ω_r − 10g）",
    )
    nu: float | None = Field(
        default=None,
        description="量子ビット分裂 ν（省略時 x 回転の較正点 ω_d + g²/δ、iSWAP では ω_r）",
    )
    epsilon: float | None = Field(
        default=None,
        description="ドライブ振幅 |ε|（省略時 δ/4、すなわち Ω = g/2）",
    )
    drive_phase: float = Field(
        default=0.0,
        description="ドライブ振幅の位相 arg ε",
    )
    n_max: int = Field(
        default=4,
        ge=1,
        description="キャビティの Fock 打ち切り",
    )
    ratio_sweep: Annotated[list[float] | None, NoDecode] = Field(
        default=None,
        description="スイープする δ/g の値（例: 5,10,20,50）",
    )

    # 出力設定
    out: str = Field(
        default="",
        description="レポートの出力先（空文字で stdout）",
    )
    format: str = Field(
        default="json",
        description="出力形式 (json, csv)",
    )
    golden: str = Field(
        default="",
        description="results を比較する golden レポートのパス（空文字で比較しない）",
    )

    # ロギング設定
    log_level: str = Field(
        default="INFO",
        description="ログレベル（DEBUG, INFO, WARNING, ERROR, CRITICAL）",
    )
    log_dir: str = Field(
        default="",
        description="ログ出力ディレクトリ（空文字でファイル出力なし）",
    )
    log_backup_count: int = Field(
        default=7,
        description="ログローテーションの保持日数",
    )

    @field_validator("labeling", mode="before")
    @classmethod
    def parse_labeling(cls, v: Any) -> Any:
        """labelingをパースする（カンマ区切りまたはJSON配列）."""
        parsed = _split_list(v)
        return parsed or None

    @field_validator("ratio_sweep", mode="before")
    @classmethod
    def parse_ratio_sweep(cls, v: Any) -> Any:
        """ratio_sweepをパースする（カンマ区切りまたはJSON配列）."""
        parsed = _split_list(v)
        return parsed or None

    @field_validator("labeling")
    @classmethod
    def validate_labeling(cls, v: list[int] | None) -> list[int] | None:
        """labelingが 1..6 の置換であることを確認する."""
        if v is not None and sorted(v) != [1, 2, 3, 4, 5, 6]:
            msg = f"labeling は 1..6 の置換を指定してください。got: {v!r}"
            raise ValueError(msg)
        return v

    @field_validator("ratio_sweep")
    @classmethod
    def validate_ratio_sweep(cls, v: list[float] | None) -> list[float] | None:
        """ratio_sweepの各値が正であることを確認する."""
        if v is not None and any(r <= 0 for r in v):
            msg = f"ratio_sweep の値は正にしてください。got: {v!r}"
            raise ValueError(msg)
        return v

    @field_validator("scenario")
    @classmethod
    def validate_scenario(cls, v: str) -> str:
        """scenarioのバリデーション."""
        return _choice("scenario", v, SCENARIOS)

    @field_validator("variant")
    @classmethod
    def validate_variant(cls, v: str) -> str:
        """variantのバリデーション."""
        return _choice("variant", v, [m.value for m in InterferometryVariant])

    @field_validator("policy")
    @classmethod
    def validate_policy(cls, v: str) -> str:
        """policyのバリデーション."""
        return _choice("policy", v, [m.value for m in MeasurementPolicy])

    @field_validator("units")
    @classmethod
    def validate_units(cls, v: str) -> str:
        """unitsのバリデーション."""
        return _choice("units", v, UNIT_SYSTEMS)

    @field_validator("gate")
    @classmethod
    def validate_gate(cls, v: str) -> str:
        """gateのバリデーション."""
        return _choice("gate", v, [m.value for m in PulseGate])

    @field_validator("subspace")
    @classmethod
    def validate_subspace(cls, v: str) -> str:
        """subspaceのバリデーション."""
        return _choice("subspace", v, [m.value for m in Subspace])

    @field_validator("format")
    @classmethod
    def validate_format(cls, v: str) -> str:
        """formatのバリデーション."""
        return _choice("format", v, OUTPUT_FORMATS)

    @property
    def unit_scale(self) -> float:
        """入力値を角周波数に直す係数（si では 2π、MHz → rad/µs）."""
        return 2 * math.pi if self.units == "si" else 1.0

    @property
    def coupling(self) -> float:
        """角周波数単位での g."""
        g = _DEFAULT_G[self.units] if self.g is None else self.g
        return g * self.unit_scale

    @property
    def cavity_frequency(self) -> float:
        """角周波数単位での ω_r."""
        omega_r = _DEFAULT_OMEGA_R[self.units] if self.omega_r is None else self.omega_r
        return omega_r * self.unit_scale

    def to_pulse_params(self) -> PulseParams:
        """
        パルスレベルのパラメータに変換する.

        省略された値は x 回転の較正点（δ = 10g、ν = ω_d + g²/δ、ε = δ/4）で補う。
        iSWAP では ν の既定値を共鳴点 ν = ω_r とする。

        Returns:
            角周波数単位の PulseParams
        """
        scale = self.unit_scale
        g = self.coupling
        omega_r = self.cavity_frequency
        omega_d = omega_r - _DEFAULT_RATIO * g if self.omega_d is None else self.omega_d * scale
        delta = omega_r - omega_d
        if self.nu is not None:
            nu = self.nu * scale
        elif self.gate == PulseGate.ISWAP.value:
            nu = omega_r
        elif delta != 0:
            nu = omega_d + g**2 / delta
        else:
            nu = omega_d
        magnitude = delta / 4 if self.epsilon is None else self.epsilon * scale
        return PulseParams(
            omega_r=omega_r,
            nu=nu,
            g=g,
            omega_d=omega_d,
            epsilon=magnitude * complex(math.cos(self.drive_phase), math.sin(self.drive_phase)),
            n_max=self.n_max,
        )

    def echo(self) -> dict[str, Any]:
        """レポートに載せる設定値（出力先・ログ設定を除く）."""
        return self.model_dump(mode="json", exclude=_ECHO_EXCLUDE)


def _choice(name: str, value: str, allowed: Any) -> str:
    allowed = tuple(allowed)
    if value not in allowed:
        msg = f"{name} は {', '.join(allowed)} のいずれかを指定してください。got: {value!r}"
        raise ValueError(msg)
    return value


def read_config_file(path: str | Path) -> dict[str, str]:
    """
    フラットな KEY=value 形式の設定ファイルを読む.

    キーは RunConfig のフィールド名（大文字小文字・CQED_ 接頭辞は問わない）。

    Args:
        path: 設定ファイルのパス

    Returns:
        フィールド名 → 文字列値

    Raises:
        UsageError: ファイルが読めない場合
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise UsageError(f"Config file not found: {file_path}")
    values: dict[str, str] = {}
    for key, value in dotenv_values(file_path, encoding="utf-8").items():
        name = key.lower().removeprefix("cqed_")
        if value is not None:
            values[name] = value
    return values


def load_config(
    config_path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """
    設定ファイル・環境変数・明示的な指定を合成して RunConfig を作る.

    優先順位は overrides > 設定ファイル > 環境変数（CQED_*） > 既定値。

    Args:
        config_path: 設定ファイルのパス
        overrides: CLI フラグなどの明示指定（None の値は無視）

    Returns:
        設定インスタンス

    Raises:
        UsageError: 設定ファイルが読めない場合
        pydantic.ValidationError: 値が不正な場合
    """
    values: dict[str, Any] = {}
    if config_path:
        values.update(read_config_file(config_path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)
