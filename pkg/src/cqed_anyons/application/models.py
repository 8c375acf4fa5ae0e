"""Data models for cross-layer communication."""

from __future__ import annotations

from dataclasses import dataclass


class SimulationError(Exception):
    """シミュレーション全体の基底例外."""


class PhysicsInvariantError(SimulationError):
    """名前付きの物理的不変条件が破れた場合の例外（CLI では終了コード 2）."""

    def __init__(self, name: str, detail: str) -> None:
        """
        Initialize PhysicsInvariantError.

        Args:
            name: 不変条件の名前（例: "ground-state loop stabilizer"）
            detail: 破れ方の詳細
        """
        super().__init__(f"Invariant '{name}' violated: {detail}")
        self.name = name
        self.detail = detail


class UsageError(SimulationError):
    """コマンドラインや設定ファイルの使い方の誤り（CLI では終了コード 1）."""

    def __init__(self, message: str) -> None:
        """
        Initialize UsageError.

        Args:
            message: エラーメッセージ
        """
        super().__init__(message)


@dataclass(frozen=True)
class InvariantCheck:
    """
    不変条件チェックの結果（selfcheck・レポート間の受け渡し用）.

    soft なチェックは失敗しても警告扱いで、終了コードに影響しない。
    """

    name: str
    passed: bool
    detail: str = ""
    soft: bool = False


@dataclass(frozen=True)
class SweepPoint:
    """パルス忠実度スイープの 1 点."""

    delta_over_g: float
    n_max: int
    fidelity: float
