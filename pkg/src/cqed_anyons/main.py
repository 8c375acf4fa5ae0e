"""Main entry point for the cqed-anyons simulator."""

from __future__ import annotations

import asyncio
import logging
import sys
from collections.abc import Sequence

from pydantic import ValidationError

from cqed_anyons.application.models import (
    PhysicsInvariantError,
    SimulationError,
    UsageError,
)
from cqed_anyons.infrastructure.logging import configure_logging, get_logger
from cqed_anyons.presentation.cli import (
    EXIT_INVARIANT,
    EXIT_USAGE,
    config_from_args,
    run,
)


async def main(argv: Sequence[str] | None = None) -> int:
    """
    アプリケーションのメインエントリポイント.

    Args:
        argv: コマンドライン引数（省略時 sys.argv[1:]）

    Returns:
        終了コード（0: 成功、1: 使い方の誤り、2: 物理的不変条件の違反）
    """
    # 設定を読み込み（ロギング設定より前に必要）
    try:
        config = config_from_args(argv)
    except (UsageError, ValidationError) as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE

    # 構造化ロギングを設定
    configure_logging(
        log_level=config.log_level,
        log_dir=config.log_dir,
        log_backup_count=config.log_backup_count,
    )

    logger = get_logger(__name__)
    logger.info("Configuration loaded", scenario=config.scenario, seed=config.seed)

    try:
        return await run(config)
    except PhysicsInvariantError as e:
        logger.error("Physics invariant violated", invariant=e.name, detail=e.detail)
        sys.stderr.write(f"invariant failed: {e.name}: {e.detail}\n")
        return EXIT_INVARIANT
    except (UsageError, SimulationError, ValueError) as e:
        logger.error("Scenario rejected", error=str(e))
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except Exception:
        logger.exception("Fatal error occurred")
        return EXIT_USAGE
    finally:
        # ログのフラッシュと確実なクローズ
        logging.shutdown()


def run_cli() -> None:
    """コンソールスクリプト用のエントリポイント."""
    sys.exit(asyncio.run(main()))


if __name__ == "__main__":
    run_cli()
