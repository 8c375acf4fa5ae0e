"""Test cases for main entry point."""

from __future__ import annotations

import json
from collections.abc import Iterator
from typing import TYPE_CHECKING
from unittest.mock import AsyncMock, patch

import pytest

from cqed_anyons.application.models import PhysicsInvariantError, SimulationError
from cqed_anyons.main import main

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture(autouse=True)
def _no_logging_setup() -> Iterator[None]:
    """ロギング設定を差し替える."""
    with patch("cqed_anyons.main.configure_logging"):
        yield


@pytest.mark.asyncio
async def test_selfcheck_exit_ok(tmp_path: Path) -> None:
    """selfcheck が成功すると終了コード 0 になることを確認する."""
    out = tmp_path / "report.json"

    status = await main(["selfcheck", "--out", str(out)])

    assert status == 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["scenario"] == "selfcheck"
    assert all(check["pass"] for check in document["invariant_checks"])


@pytest.mark.asyncio
async def test_unknown_scenario_is_usage_error(capsys: pytest.CaptureFixture[str]) -> None:
    """未知のシナリオで終了コード 1 になることを確認する."""
    status = await main(["teleport"])

    assert status == 1
    assert "usage error" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_invalid_value_is_usage_error() -> None:
    """不正な設定値で終了コード 1 になることを確認する."""
    assert await main(["prepare", "--n-max", "0"]) == 1


@pytest.mark.asyncio
async def test_missing_config_file_is_usage_error(tmp_path: Path) -> None:
    """存在しない設定ファイルで終了コード 1 になることを確認する."""
    assert await main(["prepare", "--config", str(tmp_path / "missing.env")]) == 1


@pytest.mark.asyncio
async def test_physics_invariant_exit_code(capsys: pytest.CaptureFixture[str]) -> None:
    """不変条件の違反で終了コード 2 になり、名前が stderr に出ることを確認する."""
    error = PhysicsInvariantError("unit-trace cavity block", "trace 0.5")
    with patch("cqed_anyons.main.run", AsyncMock(side_effect=error)):
        status = await main(["interfere"])

    assert status == 2
    assert "invariant failed: unit-trace cavity block" in capsys.readouterr().err


@pytest.mark.asyncio
async def test_simulation_error_exit_code() -> None:
    """シミュレーションのエラーで終了コード 1 になることを確認する."""
    with patch("cqed_anyons.main.run", AsyncMock(side_effect=SimulationError("diverged"))):
        assert await main(["sweep"]) == 1


@pytest.mark.asyncio
async def test_unexpected_error_is_logged() -> None:
    """予期しない例外がログに記録され終了コード 1 になることを確認する."""
    with (
        patch("cqed_anyons.main.run", AsyncMock(side_effect=RuntimeError("boom"))),
        patch("cqed_anyons.main.get_logger") as get_logger,
    ):
        status = await main(["prepare"])

    assert status == 1
    get_logger.return_value.exception.assert_called_once_with("Fatal error occurred")
